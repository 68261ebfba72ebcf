//! Classical filters and the nine-action set the agents choose from.
//!
//! Every filter is defined pointwise by [`Prepared::value_at`]; the whole-image
//! versions simply evaluate it at every pixel. Evaluating a filter at one pixel
//! and taking the same pixel from the whole-image output therefore give
//! bit-identical results. Borders use edge-replicate padding throughout.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::gaussian_1d;

/// One 8-bit quantization step on the `[0, 1]` scale.
pub const INTENSITY_STEP: f64 = 1.0 / 255.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterKind {
    Box,
    Gaussian { sigma: f64 },
    Median,
    /// `sigma_c` is the range std-dev on the `[0, 1]` value scale.
    Bilateral { sigma_c: f64, sigma_s: f64 },
    Increment,
    Decrement,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub kernel: usize,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, kernel: usize) -> Result<Self> {
        let spec = FilterSpec { kind, kernel };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        match self.kind {
            FilterKind::Gaussian { sigma } => positive("sigma", sigma),
            FilterKind::Bilateral { sigma_c, sigma_s } => {
                positive("sigma_c", sigma_c)?;
                positive("sigma_s", sigma_s)
            }
            _ => Ok(()),
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let k = self.kernel;
        let r = (k / 2) as isize;
        let weights = match self.kind {
            FilterKind::Box => vec![1.0 / (k * k) as f64; k * k],
            FilterKind::Gaussian { sigma } => {
                let g = gaussian_1d(k, sigma);
                let mut w = Vec::with_capacity(k * k);
                for a in &g {
                    for b in &g {
                        w.push(a * b);
                    }
                }
                w
            }
            FilterKind::Bilateral { sigma_s, .. } => {
                let mut w = Vec::with_capacity(k * k);
                for dy in -r..=r {
                    for dx in -r..=r {
                        let d2 = (dy * dy + dx * dx) as f64;
                        w.push((-d2 / (2.0 * sigma_s * sigma_s)).exp());
                    }
                }
                w
            }
            _ => Vec::new(),
        };
        Ok(Prepared {
            spec: *self,
            radius: r,
            weights,
        })
    }

    /// Whole-image filter output.
    pub fn apply(&self, img: &Image) -> Result<Image> {
        Ok(self.prepare()?.apply(img))
    }
}

/// A filter with its kernel weights precomputed.
#[derive(Clone, Debug)]
pub struct Prepared {
    spec: FilterSpec,
    radius: isize,
    weights: Vec<f64>,
}

impl Prepared {
    pub fn spec(&self) -> FilterSpec {
        self.spec
    }

    /// Filter output for one sample.
    pub fn value_at(&self, img: &Image, y: usize, x: usize, c: usize) -> f64 {
        let r = self.radius;
        let (yi, xi) = (y as isize, x as isize);
        match self.spec.kind {
            FilterKind::Box | FilterKind::Gaussian { .. } => {
                let mut acc = 0.0;
                let mut w = self.weights.iter();
                for dy in -r..=r {
                    for dx in -r..=r {
                        acc += w.next().unwrap() * img.get_clamped(yi + dy, xi + dx, c);
                    }
                }
                acc.clamp(0.0, 1.0)
            }
            FilterKind::Bilateral { sigma_c, .. } => {
                let center = img.get(y, x, c);
                let inv = 1.0 / (2.0 * sigma_c * sigma_c);
                let (mut num, mut den) = (0.0, 0.0);
                let mut w = self.weights.iter();
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.get_clamped(yi + dy, xi + dx, c);
                        let dv = v - center;
                        let wt = w.next().unwrap() * (-dv * dv * inv).exp();
                        num += wt * v;
                        den += wt;
                    }
                }
                (num / den).clamp(0.0, 1.0)
            }
            FilterKind::Median => {
                let k = self.spec.kernel;
                let mut window = Vec::with_capacity(k * k);
                for dy in -r..=r {
                    for dx in -r..=r {
                        window.push(img.get_clamped(yi + dy, xi + dx, c));
                    }
                }
                lower_median(&mut window)
            }
            FilterKind::Increment => (img.get(y, x, c) + INTENSITY_STEP).min(1.0),
            FilterKind::Decrement => (img.get(y, x, c) - INTENSITY_STEP).max(0.0),
            FilterKind::Identity => img.get(y, x, c),
        }
    }

    pub fn apply(&self, img: &Image) -> Image {
        let (h, w, ch) = img.dims();
        let mut data = vec![0.0; h * w * ch];
        data.par_chunks_mut(w * ch).enumerate().for_each(|(y, row)| {
            for x in 0..w {
                for c in 0..ch {
                    row[x * ch + c] = self.value_at(img, y, x, c);
                }
            }
        });
        Image::new(h, w, ch, data).expect("filter preserves dimensions")
    }
}

/// Lower median: element `(n - 1) / 2` of the sorted window.
fn lower_median(window: &mut [f64]) -> f64 {
    let mid = (window.len() - 1) / 2;
    let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

pub fn box_filter(img: &Image, kernel: usize) -> Result<Image> {
    FilterSpec::new(FilterKind::Box, kernel)?.apply(img)
}

pub fn gaussian_filter(img: &Image, kernel: usize, sigma: f64) -> Result<Image> {
    FilterSpec::new(FilterKind::Gaussian { sigma }, kernel)?.apply(img)
}

pub fn median_filter(img: &Image, kernel: usize) -> Result<Image> {
    FilterSpec::new(FilterKind::Median, kernel)?.apply(img)
}

pub fn bilateral_filter(img: &Image, kernel: usize, sigma_c: f64, sigma_s: f64) -> Result<Image> {
    FilterSpec::new(FilterKind::Bilateral { sigma_c, sigma_s }, kernel)?.apply(img)
}

/// The nine per-pixel actions, indexed 1..=9.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Box5 = 1,
    BilateralWide = 2,
    BilateralNarrow = 3,
    Median5 = 4,
    GaussianWide = 5,
    GaussianNarrow = 6,
    Increment = 7,
    Decrement = 8,
    Nothing = 9,
}

pub const NUM_ACTIONS: usize = 9;

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Box5,
        Action::BilateralWide,
        Action::BilateralNarrow,
        Action::Median5,
        Action::GaussianWide,
        Action::GaussianNarrow,
        Action::Increment,
        Action::Decrement,
        Action::Nothing,
    ];

    /// Looks up an action by its 1-based index.
    pub fn from_index(index: usize) -> Result<Action> {
        if (1..=NUM_ACTIONS).contains(&index) {
            Ok(Self::ALL[index - 1])
        } else {
            Err(Error::InvalidArgument(format!(
                "action index must be in 1..=9, got {index}"
            )))
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn spec(self) -> FilterSpec {
        let (kind, kernel) = match self {
            Action::Box5 => (FilterKind::Box, 5),
            Action::BilateralWide => (
                FilterKind::Bilateral {
                    sigma_c: 1.0,
                    sigma_s: 5.0,
                },
                5,
            ),
            Action::BilateralNarrow => (
                FilterKind::Bilateral {
                    sigma_c: 0.1,
                    sigma_s: 5.0,
                },
                5,
            ),
            Action::Median5 => (FilterKind::Median, 5),
            Action::GaussianWide => (FilterKind::Gaussian { sigma: 1.5 }, 5),
            Action::GaussianNarrow => (FilterKind::Gaussian { sigma: 0.5 }, 5),
            Action::Increment => (FilterKind::Increment, 1),
            Action::Decrement => (FilterKind::Decrement, 1),
            Action::Nothing => (FilterKind::Identity, 1),
        };
        FilterSpec { kind, kernel }
    }
}

/// The full action set with kernels precomputed, indexed by `action - 1`.
#[derive(Clone, Debug)]
pub struct ActionBank {
    filters: Vec<Prepared>,
}

impl Default for ActionBank {
    fn default() -> Self {
        ActionBank {
            filters: Action::ALL
                .iter()
                .map(|a| a.spec().prepare().expect("action specs are valid"))
                .collect(),
        }
    }
}

impl ActionBank {
    pub fn filter(&self, action: Action) -> &Prepared {
        &self.filters[action.index() - 1]
    }

    /// Writes the output of `action` at pixel `(y, x)` (all channels) into `out`.
    pub fn apply_into(&self, img: &Image, action: Action, y: usize, x: usize, out: &mut [f64]) {
        let f = self.filter(action);
        for (c, o) in out.iter_mut().enumerate() {
            *o = f.value_at(img, y, x, c);
        }
    }
}

/// Value the indexed action produces at `(y, x)`, one entry per channel.
pub fn apply_action(img: &Image, action_index: usize, y: usize, x: usize) -> Result<Vec<f64>> {
    let action = Action::from_index(action_index)?;
    if y >= img.height() || x >= img.width() {
        return Err(Error::InvalidArgument(format!(
            "pixel ({y}, {x}) outside {}x{}",
            img.height(),
            img.width()
        )));
    }
    let f = action.spec().prepare()?;
    Ok((0..img.channels()).map(|c| f.value_at(img, y, x, c)).collect())
}
