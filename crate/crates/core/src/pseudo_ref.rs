//! Stochastic pseudo-clean references.
//!
//! Each rain pixel is overwritten with a copy of a uniformly chosen non-rain
//! pixel from its neighborhood. Choices are keyed by `(seed, draw, pixel)`, so
//! a given draw is reproducible and independent of evaluation order.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::RainMask;
use crate::rng::{below, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    /// Chebyshev half-width of the initial search window.
    pub radius: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { radius: 5, seed: 0 }
    }
}

/// Draws pseudo-reference number `draw`.
///
/// Non-rain pixels are copied unchanged. For a rain pixel the window starts at
/// `cfg.radius` and doubles until it contains a non-rain pixel; all channels
/// are taken from that one source pixel.
pub fn sample_pseudo_reference(
    img: &Image,
    mask: &RainMask,
    cfg: &SamplerConfig,
    draw: u64,
) -> Result<Image> {
    mask.ensure_matches(img)?;
    if cfg.radius == 0 {
        return Err(Error::InvalidArgument("sampler radius must be >= 1".into()));
    }
    let total = mask.bits().len();
    if mask.count() == total {
        return Err(Error::Degenerate(
            "mask covers every pixel; no source pixels available".into(),
        ));
    }
    let (h, w) = (img.height(), img.width());
    let max_radius = h.max(w);
    let mut out = img.clone();
    let mut candidates = Vec::new();
    for index in 0..total {
        if !mask.at(index) {
            continue;
        }
        let (y, x) = (index / w, index % w);
        let mut r = cfg.radius;
        loop {
            candidates.clear();
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            for yy in y0..=y1 {
                for xx in x0..=x1 {
                    let j = yy * w + xx;
                    if !mask.at(j) {
                        candidates.push(j);
                    }
                }
            }
            if !candidates.is_empty() || r >= max_radius {
                break;
            }
            r = (r * 2).min(max_radius);
        }
        let pick = candidates[below(
            cfg.seed,
            Stream::PseudoReference,
            draw,
            index as u64,
            candidates.len(),
        )];
        out.set_pixel(index, img.pixel(pick));
    }
    Ok(out)
}
