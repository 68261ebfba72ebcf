//! Regressors from feature vectors to quality scores, and their text format.
//!
//! ```text
//! brisque-scorer 1
//! kind rbf-svr            # or: linear
//! features 36
//! bias <f64>
//! gamma <f64>             # rbf-svr only
//! min <36 × f64>          # per-feature scaling bounds
//! max <36 × f64>
//! weights <36 × f64>      # linear only
//! vectors <count>         # rbf-svr only, followed by <count> lines:
//! <coef> <36 × f64>       #   dual coefficient and scaled support vector
//! ```
//!
//! Blank lines and `#` comments are ignored. Features are scaled to `[-1, 1]`
//! with `2·(x − min)/(max − min) − 1` before prediction.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{FeatureVector, NUM_FEATURES};
use crate::error::{Error, Result};

pub const FORMAT_HEADER: &str = "brisque-scorer 1";

#[derive(Clone, Debug, PartialEq)]
pub enum ScorerKind {
    Linear {
        weights: Vec<f64>,
    },
    RbfSvr {
        gamma: f64,
        /// `(coefficient, scaled support vector)` pairs.
        support: Vec<(f64, Vec<f64>)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerModel {
    pub kind: ScorerKind,
    pub bias: f64,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScorerModel {
    /// Linear model with unit scaling bounds `[-1, 1]` (scaling is the identity).
    pub fn linear(weights: Vec<f64>, bias: f64) -> Result<Self> {
        let model = ScorerModel {
            kind: ScorerKind::Linear { weights },
            bias,
            min: vec![-1.0; NUM_FEATURES],
            max: vec![1.0; NUM_FEATURES],
        };
        model.validate()?;
        Ok(model)
    }

    /// Model that scores every image `bias`.
    pub fn constant(bias: f64) -> Self {
        Self::linear(vec![0.0; NUM_FEATURES], bias).expect("valid constant model")
    }

    pub fn validate(&self) -> Result<()> {
        let check_len = |what: &str, len: usize| {
            if len == NUM_FEATURES {
                Ok(())
            } else {
                Err(Error::Model(format!(
                    "{what} has {len} entries, expected {NUM_FEATURES}"
                )))
            }
        };
        check_len("min", self.min.len())?;
        check_len("max", self.max.len())?;
        for (i, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(lo < hi) {
                return Err(Error::Model(format!(
                    "feature {i}: scaling bounds need min < max, got {lo} and {hi}"
                )));
            }
        }
        match &self.kind {
            ScorerKind::Linear { weights } => check_len("weights", weights.len())?,
            ScorerKind::RbfSvr { gamma, support } => {
                if !(*gamma > 0.0) {
                    return Err(Error::Model(format!("gamma must be > 0, got {gamma}")));
                }
                if support.is_empty() {
                    return Err(Error::Model("rbf-svr model has no support vectors".into()));
                }
                for (_, sv) in support {
                    check_len("support vector", sv.len())?;
                }
            }
        }
        let finite = |v: &f64| v.is_finite();
        if !self.bias.is_finite() || !self.min.iter().all(finite) || !self.max.iter().all(finite)
        {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn scale(&self, features: &FeatureVector) -> Vec<f64> {
        features
            .values()
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(x, (lo, hi))| 2.0 * (x - lo) / (hi - lo) - 1.0)
            .collect()
    }

    pub fn predict(&self, features: &FeatureVector) -> f64 {
        let s = self.scale(features);
        self.bias
            + match &self.kind {
                ScorerKind::Linear { weights } => {
                    weights.iter().zip(&s).map(|(w, x)| w * x).sum::<f64>()
                }
                ScorerKind::RbfSvr { gamma, support } => support
                    .iter()
                    .map(|(coef, sv)| coef * rbf(*gamma, sv, &s))
                    .sum::<f64>(),
            }
    }

    /// Fits a least-squares support vector regressor with an RBF kernel.
    ///
    /// Scaling bounds are the per-feature training extremes. Solves
    /// `[0 1ᵀ; 1 K + I/c] [b; α] = [0; y]`; every training vector becomes a
    /// support vector.
    pub fn fit_rbf(
        features: &[FeatureVector],
        labels: &[f64],
        gamma: f64,
        regularization: f64,
    ) -> Result<Self> {
        let n = features.len();
        if n < 2 || n != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "need matching features and labels (at least 2), got {n} and {}",
                labels.len()
            )));
        }
        if !(gamma > 0.0 && regularization > 0.0) {
            return Err(Error::InvalidArgument(
                "gamma and regularization must be > 0".into(),
            ));
        }
        let mut min = vec![f64::INFINITY; NUM_FEATURES];
        let mut max = vec![f64::NEG_INFINITY; NUM_FEATURES];
        for f in features {
            for (i, &v) in f.values().iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        for (lo, hi) in min.iter_mut().zip(max.iter_mut()) {
            if *hi - *lo < 1e-9 {
                *lo -= 0.5;
                *hi += 0.5;
            }
        }
        let mut model = ScorerModel {
            kind: ScorerKind::Linear {
                weights: vec![0.0; NUM_FEATURES],
            },
            bias: 0.0,
            min,
            max,
        };
        let scaled: Vec<Vec<f64>> = features.iter().map(|f| model.scale(f)).collect();

        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            a[(0, i + 1)] = 1.0;
            a[(i + 1, 0)] = 1.0;
            for j in 0..n {
                a[(i + 1, j + 1)] = rbf(gamma, &scaled[i], &scaled[j]);
            }
            a[(i + 1, i + 1)] += 1.0 / regularization;
            rhs[i + 1] = labels[i];
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular kernel system".into()))?;
        model.bias = sol[0];
        model.kind = ScorerKind::RbfSvr {
            gamma,
            support: scaled
                .into_iter()
                .enumerate()
                .map(|(i, sv)| (sol[i + 1], sv))
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        let row = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        let kind = match self.kind {
            ScorerKind::Linear { .. } => "linear",
            ScorerKind::RbfSvr { .. } => "rbf-svr",
        };
        writeln!(s, "kind {kind}").unwrap();
        writeln!(s, "features {NUM_FEATURES}").unwrap();
        writeln!(s, "bias {:e}", self.bias).unwrap();
        if let ScorerKind::RbfSvr { gamma, .. } = self.kind {
            writeln!(s, "gamma {gamma:e}").unwrap();
        }
        writeln!(s, "min {}", row(&self.min)).unwrap();
        writeln!(s, "max {}", row(&self.max)).unwrap();
        match &self.kind {
            ScorerKind::Linear { weights } => {
                writeln!(s, "weights {}", row(weights)).unwrap();
            }
            ScorerKind::RbfSvr { support, .. } => {
                writeln!(s, "vectors {}", support.len()).unwrap();
                for (coef, sv) in support {
                    writeln!(s, "{coef:e} {}", row(sv)).unwrap();
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap().trim())
            .filter(|l| !l.is_empty());
        let bad = |msg: String| Error::Model(msg);

        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header != FORMAT_HEADER {
            return Err(bad(format!("expected header '{FORMAT_HEADER}', got '{header}'")));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| bad(format!("missing '{name}' line")))?;
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            if key != name {
                return Err(bad(format!("expected '{name}', got '{key}'")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let single = |v: Vec<String>, name: &str| -> Result<String> {
            match <[String; 1]>::try_from(v) {
                Ok([s]) => Ok(s),
                Err(_) => Err(bad(format!("'{name}' takes one value"))),
            }
        };

        let kind = single(field("kind")?, "kind")?;
        let count: usize = parse_one(&single(field("features")?, "features")?)?;
        if count != NUM_FEATURES {
            return Err(bad(format!(
                "model declares {count} features, expected {NUM_FEATURES}"
            )));
        }
        let bias = parse_one(&single(field("bias")?, "bias")?)?;
        let gamma = if kind == "rbf-svr" {
            Some(parse_one(&single(field("gamma")?, "gamma")?)?)
        } else {
            None
        };
        let min = parse_row(&field("min")?)?;
        let max = parse_row(&field("max")?)?;
        let kind = match (kind.as_str(), gamma) {
            ("linear", _) => ScorerKind::Linear {
                weights: parse_row(&field("weights")?)?,
            },
            ("rbf-svr", Some(gamma)) => {
                let n: usize = parse_one(&single(field("vectors")?, "vectors")?)?;
                let mut support = Vec::with_capacity(n);
                for i in 0..n {
                    let line = lines
                        .next()
                        .ok_or_else(|| bad(format!("missing support vector {i}")))?;
                    let vals = parse_row(&line.split_whitespace().map(str::to_owned).collect::<Vec<_>>())?;
                    if vals.len() != NUM_FEATURES + 1 {
                        return Err(bad(format!(
                            "support vector {i} has {} values, expected {}",
                            vals.len(),
                            NUM_FEATURES + 1
                        )));
                    }
                    support.push((vals[0], vals[1..].to_vec()));
                }
                ScorerKind::RbfSvr { gamma, support }
            }
            (other, _) => return Err(bad(format!("unknown model kind '{other}'"))),
        };
        if let Some(extra) = lines.next() {
            return Err(bad(format!("unexpected trailing line '{extra}'")));
        }
        let model = ScorerModel {
            kind,
            bias,
            min,
            max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

fn parse_one<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Model(format!("cannot parse '{s}'")))
}

fn parse_row(parts: &[String]) -> Result<Vec<f64>> {
    parts.iter().map(|p| parse_one(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(v: f64) -> FeatureVector {
        FeatureVector([v; NUM_FEATURES])
    }

    #[test]
    fn constant_model_scores_bias() {
        let m = ScorerModel::constant(42.0);
        assert_eq!(m.predict(&features(0.3)), 42.0);
        assert_eq!(m.predict(&features(-7.0)), 42.0);
    }

    #[test]
    fn linear_text_round_trip() {
        let w: Vec<f64> = (0..NUM_FEATURES).map(|i| i as f64 * 0.1 - 1.7).collect();
        let m = ScorerModel::linear(w, 3.25).unwrap();
        assert_eq!(ScorerModel::from_text(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rbf_fit_interpolates_and_round_trips() {
        let feats: Vec<FeatureVector> = (0..6)
            .map(|i| {
                let mut a = [0.0; NUM_FEATURES];
                for (k, v) in a.iter_mut().enumerate() {
                    *v = ((i * 7 + k * 3) % 11) as f64 / 10.0;
                }
                FeatureVector(a)
            })
            .collect();
        let labels = [0.0, 100.0, 0.0, 100.0, 50.0, 25.0];
        let m = ScorerModel::fit_rbf(&feats, &labels, 0.05, 1e6).unwrap();
        for (f, &y) in feats.iter().zip(&labels) {
            assert!((m.predict(f) - y).abs() < 1e-2, "{} vs {y}", m.predict(f));
        }
        let back = ScorerModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn wrong_feature_count_rejected() {
        let text = ScorerModel::constant(1.0)
            .to_text()
            .replace("features 36", "features 35");
        let err = ScorerModel::from_text(&text).unwrap_err();
        assert!(err.to_string().contains("35"), "{err}");

        let mut m = ScorerModel::constant(1.0);
        m.min.pop();
        assert!(m.validate().is_err());
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(ScorerModel::from_text("").is_err());
        assert!(ScorerModel::from_text("brisque-scorer 2\n").is_err());
        let good = ScorerModel::constant(1.0).to_text();
        assert!(ScorerModel::from_text(&good.replace("kind linear", "kind tree")).is_err());
        let mut bad_bounds = ScorerModel::constant(1.0);
        bad_bounds.max[3] = bad_bounds.min[3];
        assert!(ScorerModel::from_text(&bad_bounds.to_text()).is_err());
    }
}
