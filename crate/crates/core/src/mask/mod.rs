//! Rain-streak localization by dictionary learning.
//!
//! [`compute_rdp`] chains the stages:
//! luma → bilateral low/high split → mean-centered patches of the high band →
//! dictionary → per-atom HOG → two-means split (tight cluster = rain atoms) →
//! rain-only reconstruction → relative-threshold binarization.

mod decompose;
mod dictionary;
mod hog;
mod kmeans;
mod patches;

use std::path::Path;

use image::{GrayImage, ImageReader};

pub use self::decompose::{decompose, FrequencyDecomposition};
pub use self::dictionary::{
    kkt_residual, learn_dictionary, reconstruct_rain, sparse_code, Dictionary,
    DictionaryTraining, LassoSolver, SparseCode, LASSO_MAX_SWEEPS, LASSO_TOLERANCE,
};
pub use self::hog::{hog_of_atom, HOG_BINS};
pub use self::kmeans::{split_atoms, AtomSplit};
pub use self::patches::{extract_patches, PatchSet};

use crate::error::{Error, Result};
use crate::filters::{FilterKind, FilterSpec};
use crate::image::{Image, Plane};

/// Binary per-pixel rain map; `true` marks a suspected rain pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RainMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl RainMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} mask bits for {height}x{width}",
                bits.len()
            )));
        }
        Ok(RainMask {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        RainMask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        RainMask {
            height,
            width,
            bits,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels marked as rain.
    pub fn density(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn matches(&self, img: &Image) -> bool {
        self.height == img.height() && self.width == img.width()
    }

    pub(crate) fn ensure_matches(&self, img: &Image) -> Result<()> {
        if self.matches(img) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs image {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )))
        }
    }

    /// Writes an 8-bit grayscale PNG: 0 = keep, 255 = rain.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf = GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("mask buffer size");
        buf.save(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Encode {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
    }

    /// Reads a mask PNG; any channel layout is reduced to luma, and values of
    /// 128 or more count as rain.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Decode {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let bits = img.into_raw().into_iter().map(|v| v >= 128).collect();
        RainMask::new(h, w, bits)
    }
}

/// Marks pixels with `|value| > threshold · max|value|`.
pub fn binarize(rain: &Plane, threshold: f64) -> Result<RainMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in (0, 1), got {threshold}"
        )));
    }
    let cut = threshold * rain.max_abs();
    let bits = rain.data.iter().map(|v| v.abs() > cut).collect();
    RainMask::new(rain.height, rain.width, bits)
}

/// Tunables for [`compute_rdp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaskConfig {
    /// Low-pass used for the frequency split.
    pub decomposition: FilterSpec,
    /// Odd patch side `p`.
    pub patch_size: usize,
    pub stride: usize,
    pub atoms: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub hog_bins: usize,
    /// Relative binarization threshold.
    pub threshold: f64,
    /// Absolute floor on the rain response; weaker pixels are never marked.
    pub min_response: f64,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            decomposition: FilterSpec {
                kind: FilterKind::Bilateral {
                    sigma_c: 0.3,
                    sigma_s: 2.0,
                },
                kernel: 7,
            },
            patch_size: 7,
            stride: 2,
            atoms: 128,
            lambda: 0.15,
            epochs: 10,
            hog_bins: HOG_BINS,
            threshold: 0.2,
            min_response: 0.02,
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        self.decomposition.validate()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.patch_size % 2 == 0 {
            return bad(format!("patch size must be odd, got {}", self.patch_size));
        }
        if self.stride == 0 || self.atoms < 2 || self.hog_bins == 0 {
            return bad("stride, atoms (>= 2) and hog bins must be positive".into());
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must be in (0, 1), got {}", self.threshold));
        }
        if !(self.min_response >= 0.0) {
            return bad("min_response must be >= 0".into());
        }
        Ok(())
    }
}

/// Every intermediate of a mask computation, for inspection.
#[derive(Clone, Debug)]
pub struct RdpOutput {
    pub decomposition: FrequencyDecomposition,
    pub training: Option<DictionaryTraining>,
    pub split: Option<AtomSplit>,
    pub rain: Plane,
    pub mask: RainMask,
}

pub fn compute_rdp(img: &Image, cfg: &MaskConfig) -> Result<RainMask> {
    compute_rdp_detailed(img, cfg).map(|o| o.mask)
}

/// Runs the full rain-mask pipeline and keeps the intermediates.
///
/// A high band with no response above `min_response` yields an empty mask
/// without learning a dictionary. The atom count is capped at the number of
/// patches available.
pub fn compute_rdp_detailed(img: &Image, cfg: &MaskConfig) -> Result<RdpOutput> {
    cfg.validate()?;
    let decomposition = decompose(img, &cfg.decomposition)?;
    let (h, w) = (img.height(), img.width());
    if decomposition.high.max_abs() <= cfg.min_response {
        return Ok(RdpOutput {
            rain: Plane::zeros(h, w),
            decomposition,
            training: None,
            split: None,
            mask: RainMask::empty(h, w),
        });
    }

    let patches = extract_patches(&decomposition.high, cfg.patch_size, cfg.stride)?.centered();
    let atoms = cfg.atoms.min(patches.len());
    let training = learn_dictionary(&patches, atoms, cfg.lambda, cfg.epochs, cfg.seed)?;
    let dict = &training.dictionary;
    let descriptors: Vec<Vec<f64>> = dict
        .atoms()
        .map(|a| hog_of_atom(a, cfg.patch_size, cfg.hog_bins))
        .collect();
    let split = split_atoms(&descriptors, cfg.seed)?;
    let rain = reconstruct_rain(&patches, dict, &split.rain)?;

    let mut mask = binarize(&rain, cfg.threshold)?;
    for (bit, v) in mask.bits.iter_mut().zip(&rain.data) {
        if v.abs() <= cfg.min_response {
            *bit = false;
        }
    }
    Ok(RdpOutput {
        decomposition,
        training: Some(training),
        split: Some(split),
        rain,
        mask,
    })
}
