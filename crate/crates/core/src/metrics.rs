//! Full-reference quality metrics.
//!
//! PSNR is computed over every sample (the mean squared error averages all
//! channels). SSIM is computed on luma.

use crate::error::{Error, Result};
use crate::image::Image;

/// PSNR reported for bit-identical inputs, where the ratio is unbounded.
pub const PSNR_IDENTICAL: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn evaluate(a: &Image, b: &Image) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB for peak value 1.
///
/// Returns [`PSNR_IDENTICAL`] when the mean squared error is exactly zero.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Mean structural similarity over all fully-covered 11×11 Gaussian windows.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}",
            a.height(),
            a.width()
        )));
    }
    let x = a.luma_plane();
    let y = b.luma_plane();
    let kernel = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let (h, w) = (x.height, x.width);
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);

    let mut total = 0.0;
    for oy in 0..oh {
        for ox in 0..ow {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for ky in 0..SSIM_WINDOW {
                for kx in 0..SSIM_WINDOW {
                    let g = kernel[ky * SSIM_WINDOW + kx];
                    let xv = x.get(oy + ky, ox + kx);
                    let yv = y.get(oy + ky, ox + kx);
                    mx += g * xv;
                    my += g * yv;
                    sxx += g * xv * xv;
                    syy += g * yv * yv;
                    sxy += g * xv * yv;
                }
            }
            let vx = sxx - mx * mx;
            let vy = syy - my * my;
            let cov = sxy - mx * my;
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
        }
    }
    Ok(total / (oh * ow) as f64)
}

/// Normalized 2-D Gaussian window (outer product of a normalized 1-D kernel).
pub(crate) fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let k1 = gaussian_1d(size, sigma);
    let mut out = Vec::with_capacity(size * size);
    for a in &k1 {
        for b in &k1 {
            out.push(a * b);
        }
    }
    out
}

pub(crate) fn gaussian_1d(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}
