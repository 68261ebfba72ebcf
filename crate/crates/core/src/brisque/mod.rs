//! No-reference quality scoring from natural-scene statistics.
//!
//! Features follow the usual two-scale recipe: MSCN coefficients of the luma
//! plane are summarized by a GGD fit, and the four neighbor products
//! (horizontal, vertical, both diagonals) by AGGD fits. A [`ScorerModel`]
//! maps the 36 features to a score where lower means cleaner.

mod fit;
mod scorer;

pub use self::fit::{fit_aggd, fit_ggd, invert_ratio, moment_ratio, AggdFit, GgdFit};
pub use self::scorer::{ScorerKind, ScorerModel, FORMAT_HEADER};

use crate::error::{Error, Result};
use crate::image::{Image, Plane};
use crate::metrics::gaussian_window;

pub const NUM_FEATURES: usize = 36;
pub const MIN_SIDE: usize = 32;

const WINDOW: usize = 7;
const WINDOW_SIGMA: f64 = 7.0 / 6.0;
/// Stabilizer in the MSCN denominator, one 8-bit step.
const MSCN_C: f64 = 1.0 / 255.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn values(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }
}

/// Mean-subtracted contrast-normalized coefficients of the image luma.
pub fn mscn(img: &Image) -> Result<Plane> {
    mscn_plane(&img.luma_plane())
}

/// `(I − μ)/(σ + C)` with μ, σ from a 7×7 Gaussian window (σ_w = 7/6),
/// edge-replicated.
///
/// The numerator is accumulated as `Σ g·(I_center − I_k)`, which is exactly
/// zero on flat regions.
pub fn mscn_plane(plane: &Plane) -> Result<Plane> {
    if plane.height < WINDOW || plane.width < WINDOW {
        return Err(Error::TooSmall(format!(
            "mscn needs at least {WINDOW}x{WINDOW}, got {}x{}",
            plane.height, plane.width
        )));
    }
    let g = gaussian_window(WINDOW, WINDOW_SIGMA);
    let r = (WINDOW / 2) as isize;
    let (h, w) = (plane.height, plane.width);
    let mut out = Vec::with_capacity(h * w);
    let mut window = [0.0; WINDOW * WINDOW];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let center = plane.get(y as usize, x as usize);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    window[k] = plane.get_clamped(y + dy, x + dx);
                    k += 1;
                }
            }
            let mut dev = 0.0;
            let mut mu = 0.0;
            for (gk, vk) in g.iter().zip(&window) {
                dev += gk * (center - vk);
                mu += gk * vk;
            }
            let var: f64 = g
                .iter()
                .zip(&window)
                .map(|(gk, vk)| gk * (vk - mu) * (vk - mu))
                .sum();
            out.push(dev / (var.sqrt() + MSCN_C));
        }
    }
    Plane::new(h, w, out)
}

/// 2×2 block average (odd trailing row/column dropped).
fn downsample(plane: &Plane) -> Plane {
    let (h, w) = (plane.height / 2, plane.width / 2);
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let s = plane.get(2 * y, 2 * x)
                + plane.get(2 * y, 2 * x + 1)
                + plane.get(2 * y + 1, 2 * x)
                + plane.get(2 * y + 1, 2 * x + 1);
            data.push(0.25 * s);
        }
    }
    Plane {
        height: h,
        width: w,
        data,
    }
}

fn scale_features(luma: &Plane, out: &mut Vec<f64>) -> Result<()> {
    let m = mscn_plane(luma)?;
    let g = fit_ggd(&m.data)?;
    out.extend([g.alpha, g.sigma * g.sigma]);
    let (h, w) = (m.height, m.width);
    let shifts: [(usize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];
    for (dy, dx) in shifts {
        let mut prod = Vec::with_capacity(h * w);
        for y in 0..h - dy {
            for x in 0..w {
                let xx = x as isize + dx;
                if xx < 0 || xx >= w as isize {
                    continue;
                }
                prod.push(m.get(y, x) * m.get(y + dy, xx as usize));
            }
        }
        let a = fit_aggd(&prod)?;
        out.extend([a.alpha, a.mean, a.sigma_l * a.sigma_l, a.sigma_r * a.sigma_r]);
    }
    Ok(())
}

/// The 36-dimensional feature vector: 18 values at full resolution followed
/// by 18 at half resolution.
pub fn brisque_features(img: &Image) -> Result<FeatureVector> {
    if img.height() < MIN_SIDE || img.width() < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "brisque needs at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    let luma = img.luma_plane();
    let mut v = Vec::with_capacity(NUM_FEATURES);
    scale_features(&luma, &mut v)?;
    scale_features(&downsample(&luma), &mut v)?;
    let arr: [f64; NUM_FEATURES] = v.try_into().expect("36 features");
    Ok(FeatureVector(arr))
}

/// Features followed by model prediction.
pub fn brisque_score(img: &Image, model: &ScorerModel) -> Result<f64> {
    Ok(model.predict(&brisque_features(img)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_mscn_is_exactly_zero() {
        let img = Image::filled(16, 16, 3, 0.37).unwrap();
        assert!(mscn(&img).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_images_rejected() {
        let img = Image::filled(6, 16, 1, 0.5).unwrap();
        assert!(matches!(mscn(&img), Err(Error::TooSmall(_))));
        let img = Image::filled(31, 64, 1, 0.5).unwrap();
        assert!(matches!(brisque_features(&img), Err(Error::TooSmall(_))));
    }

    #[test]
    fn downsample_averages_blocks() {
        let p = Plane::new(2, 3, vec![1.0, 2.0, 9.0, 3.0, 4.0, 9.0]).unwrap();
        let d = downsample(&p);
        assert_eq!((d.height, d.width), (1, 1));
        assert_eq!(d.data, vec![2.5]);
    }
}
