//! Plain-text `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default, so
//! an empty file is valid. Unknown keys and out-of-range values are rejected
//! when parsed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use derain_core::filters::{FilterKind, FilterSpec};
use derain_core::mask::MaskConfig;
use derain_core::rl::TrainConfig;

use crate::error::{CliError, Result};
use crate::synth::StreakConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Seeds the mask, pseudo references, action sampling, network init and
    /// the streak generator.
    pub seed: u64,
    pub mask: MaskConfig,
    pub train: TrainConfig,
    pub streaks: StreakConfig,
    /// Scorer model file; `None` uses the built-in synthetic scorer.
    pub scorer: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            seed: 0,
            mask: MaskConfig::default(),
            train: TrainConfig::default(),
            streaks: StreakConfig::default(),
            scorer: None,
        };
        cfg.set_seed(0);
        cfg
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

fn bilateral_params(spec: &FilterSpec) -> (f64, f64) {
    match spec.kind {
        FilterKind::Bilateral { sigma_c, sigma_s } => (sigma_c, sigma_s),
        _ => (0.3, 2.0),
    }
}

impl RunConfig {
    pub const KEYS: [&'static str; 32] = [
        "seed",
        "scorer",
        "mask.patch_size",
        "mask.stride",
        "mask.atoms",
        "mask.lambda",
        "mask.epochs",
        "mask.hog_bins",
        "mask.threshold",
        "mask.min_response",
        "mask.decomp_kernel",
        "mask.decomp_sigma_c",
        "mask.decomp_sigma_s",
        "train.t_max",
        "train.episodes",
        "train.max_episode",
        "train.lr0",
        "train.gamma",
        "train.lambda_brisque",
        "train.entropy_weight",
        "train.width",
        "train.brisque_every",
        "train.eval_every",
        "train.resample_reference",
        "train.reference_radius",
        "synth.count",
        "synth.angle",
        "synth.angle_jitter",
        "synth.width",
        "synth.length_min",
        "synth.length_max",
        "synth.intensity",
    ];

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.mask.seed = seed;
        self.train.seed = seed;
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => {
                let seed = parse(key, value)?;
                self.set_seed(seed);
                return Ok(());
            }
            "scorer" => {
                self.scorer = (!value.is_empty()).then(|| PathBuf::from(value));
                return Ok(());
            }
            _ => {}
        }
        let m = &mut self.mask;
        let t = &mut self.train;
        let s = &mut self.streaks;
        match key {
            "mask.patch_size" => m.patch_size = parse(key, value)?,
            "mask.stride" => m.stride = parse(key, value)?,
            "mask.atoms" => m.atoms = parse(key, value)?,
            "mask.lambda" => m.lambda = parse(key, value)?,
            "mask.epochs" => m.epochs = parse(key, value)?,
            "mask.hog_bins" => m.hog_bins = parse(key, value)?,
            "mask.threshold" => m.threshold = parse(key, value)?,
            "mask.min_response" => m.min_response = parse(key, value)?,
            "mask.decomp_kernel" => m.decomposition.kernel = parse(key, value)?,
            "mask.decomp_sigma_c" | "mask.decomp_sigma_s" => {
                let (mut sigma_c, mut sigma_s) = bilateral_params(&m.decomposition);
                if key.ends_with("_c") {
                    sigma_c = parse(key, value)?;
                } else {
                    sigma_s = parse(key, value)?;
                }
                m.decomposition.kind = FilterKind::Bilateral { sigma_c, sigma_s };
            }
            "train.t_max" => t.t_max = parse(key, value)?,
            "train.episodes" => t.episodes = parse(key, value)?,
            "train.max_episode" => t.max_episode = parse(key, value)?,
            "train.lr0" => t.lr0 = parse(key, value)?,
            "train.gamma" => t.gamma = parse(key, value)?,
            "train.lambda_brisque" => t.lambda_brisque = parse(key, value)?,
            "train.entropy_weight" => t.entropy_weight = parse(key, value)?,
            "train.width" => t.width = parse(key, value)?,
            "train.brisque_every" => t.brisque_every = parse(key, value)?,
            "train.eval_every" => t.eval_every = parse(key, value)?,
            "train.resample_reference" => t.resample_reference = parse(key, value)?,
            "train.reference_radius" => t.reference_radius = parse(key, value)?,
            "synth.count" => s.count = parse(key, value)?,
            "synth.angle" => s.angle = parse(key, value)?,
            "synth.angle_jitter" => s.angle_jitter = parse(key, value)?,
            "synth.width" => s.width = parse(key, value)?,
            "synth.length_min" => s.length_min = parse(key, value)?,
            "synth.length_max" => s.length_max = parse(key, value)?,
            "synth.intensity" => s.intensity = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// Parses a config file body on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.mask.validate()?;
        self.train.validate()?;
        self.streaks.validate()?;
        Ok(())
    }

    /// Every effective value, one `key = value` per line, in [`Self::KEYS`]
    /// order. Parsing the output reproduces `self`.
    pub fn to_text(&self) -> String {
        let m = &self.mask;
        let t = &self.train;
        let s = &self.streaks;
        let (sigma_c, sigma_s) = bilateral_params(&m.decomposition);
        let scorer = self
            .scorer
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let values: Vec<String> = vec![
            self.seed.to_string(),
            scorer,
            m.patch_size.to_string(),
            m.stride.to_string(),
            m.atoms.to_string(),
            m.lambda.to_string(),
            m.epochs.to_string(),
            m.hog_bins.to_string(),
            m.threshold.to_string(),
            m.min_response.to_string(),
            m.decomposition.kernel.to_string(),
            sigma_c.to_string(),
            sigma_s.to_string(),
            t.t_max.to_string(),
            t.episodes.to_string(),
            t.max_episode.to_string(),
            t.lr0.to_string(),
            t.gamma.to_string(),
            t.lambda_brisque.to_string(),
            t.entropy_weight.to_string(),
            t.width.to_string(),
            t.brisque_every.to_string(),
            t.eval_every.to_string(),
            t.resample_reference.to_string(),
            t.reference_radius.to_string(),
            s.count.to_string(),
            s.angle.to_string(),
            s.angle_jitter.to_string(),
            s.width.to_string(),
            s.length_min.to_string(),
            s.length_max.to_string(),
            s.intensity.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}
