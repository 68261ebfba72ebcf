//! Procedural test data: clean scenes, additive rain streaks, and the
//! built-in quality scorer fitted on such scenes.

use derain_core::brisque::{brisque_features, ScorerModel};
use derain_core::rng::seeded;
use derain_core::{Image, RainMask};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CliError, Result};

/// Streak overlay parameters. Angles are degrees from vertical.
#[derive(Clone, Debug, PartialEq)]
pub struct StreakConfig {
    pub count: usize,
    pub angle: f64,
    pub angle_jitter: f64,
    /// Stroke thickness in pixels.
    pub width: f64,
    pub length_min: f64,
    pub length_max: f64,
    /// Brightness added to every channel of a painted pixel.
    pub intensity: f64,
}

impl Default for StreakConfig {
    fn default() -> Self {
        StreakConfig {
            count: 60,
            angle: 15.0,
            angle_jitter: 5.0,
            width: 1.0,
            length_min: 8.0,
            length_max: 24.0,
            intensity: 0.4,
        }
    }
}

impl StreakConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0.0
            && self.length_min > 0.0
            && self.length_min <= self.length_max
            && self.intensity > 0.0
            && self.intensity <= 1.0
            && self.angle.is_finite()
            && self.angle_jitter >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CliError::Config(format!("invalid streak parameters {self:?}")))
        }
    }
}

/// Distance from `(px, py)` to the segment `a`–`b`.
fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (px - cx).hypot(py - cy)
}

/// Paints `cfg.count` straight streaks onto `clean`.
///
/// Returns the rainy image and the exact set of painted pixels. Painted
/// pixels get `min(1, clean + intensity)`; overlapping streaks do not stack.
pub fn add_streaks(clean: &Image, cfg: &StreakConfig, seed: u64) -> Result<(Image, RainMask)> {
    cfg.validate()?;
    let (h, w, c) = clean.dims();
    let mut rng = seeded(seed);
    let mut painted = vec![false; h * w];
    let half = 0.5 * cfg.width;
    for _ in 0..cfg.count {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let len = if cfg.length_max > cfg.length_min {
            rng.random_range(cfg.length_min..cfg.length_max)
        } else {
            cfg.length_min
        };
        let jitter = if cfg.angle_jitter > 0.0 {
            rng.random_range(-cfg.angle_jitter..cfg.angle_jitter)
        } else {
            0.0
        };
        let theta = (cfg.angle + jitter).to_radians();
        let (ux, uy) = (theta.sin() * 0.5 * len, theta.cos() * 0.5 * len);
        let a = (cx - ux, cy - uy);
        let b = (cx + ux, cy + uy);
        let pad = half + 1.0;
        let x0 = (a.0.min(b.0) - pad).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + pad).ceil().max(0.0) as usize).min(w - 1);
        let y0 = (a.1.min(b.1) - pad).floor().max(0.0) as usize;
        let y1 = ((a.1.max(b.1) + pad).ceil().max(0.0) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if segment_distance(x as f64 + 0.5, y as f64 + 0.5, a, b) <= half {
                    painted[y * w + x] = true;
                }
            }
        }
    }
    let rain = Image::from_fn(h, w, c, |y, x, ch| {
        let v = clean.get(y, x, ch);
        if painted[y * w + x] {
            (v + cfg.intensity).min(1.0)
        } else {
            v
        }
    })?;
    Ok((rain, RainMask::new(h, w, painted)?))
}

fn smoothstep(edge: f64, softness: f64, d: f64) -> f64 {
    (0.5 - (d - edge) / softness).clamp(0.0, 1.0)
}

/// A smooth color scene: graded background, soft blobs, a few rectangles and
/// gentle texture. Values stay within `[0.05, 0.75]` to leave headroom for
/// bright streaks.
pub fn natural_scene(height: usize, width: usize, seed: u64) -> Result<Image> {
    let mut rng = seeded(seed ^ 0x5eed_5ce0e);
    let (h, w) = (height as f64, width as f64);
    let top: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.3..0.9));
    let bottom: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.6));

    struct Blob {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        color: [f64; 3],
    }
    let blobs: Vec<Blob> = (0..rng.random_range(4..8))
        .map(|_| Blob {
            cx: rng.random_range(0.0..w),
            cy: rng.random_range(0.0..h),
            rx: rng.random_range(0.08..0.3) * w,
            ry: rng.random_range(0.08..0.3) * h,
            color: std::array::from_fn(|_| rng.random_range(0.0..1.0)),
        })
        .collect();
    let rects: Vec<([f64; 4], [f64; 3])> = (0..rng.random_range(1..4))
        .map(|_| {
            let x0 = rng.random_range(0.0..w * 0.8);
            let y0 = rng.random_range(h * 0.3..h * 0.9);
            let bw = rng.random_range(0.1..0.3) * w;
            (
                [x0, y0, x0 + bw, h],
                std::array::from_fn(|_| rng.random_range(0.0..0.7)),
            )
        })
        .collect();
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.02..0.15),
                rng.random_range(0.02..0.15),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.01..0.04),
            )
        })
        .collect();
    let grain = Normal::new(0.0, 0.008).unwrap();
    let noise: Vec<f64> = (0..height * width).map(|_| grain.sample(&mut rng)).collect();

    Image::from_fn(height, width, 3, |y, x, c| {
        let (fy, fx) = (y as f64 + 0.5, x as f64 + 0.5);
        let t = fy / h;
        let mut v = top[c] * (1.0 - t) + bottom[c] * t;
        for b in &blobs {
            let d = (((fx - b.cx) / b.rx).powi(2) + ((fy - b.cy) / b.ry).powi(2)).sqrt();
            let a = smoothstep(1.0, 0.4, d);
            v = v * (1.0 - 0.7 * a) + b.color[c] * 0.7 * a;
        }
        for (r, color) in &rects {
            if fx >= r[0] && fx < r[2] && fy >= r[1] && fy < r[3] {
                v = 0.2 * v + 0.8 * color[c];
            }
        }
        for &(kx, ky, phase, amp) in &waves {
            v += amp * (kx * fx + ky * fy + phase).sin();
        }
        v += noise[y * width + x];
        0.05 + 0.7 * v.clamp(0.0, 1.0)
    })
    .map_err(Into::into)
}

fn add_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    img.map(|v| v + normal.sample(&mut rng))
}

const SCORER_SIDE: usize = 64;
const SCORER_SCENES: u64 = 12;
const SCORER_GAMMA: f64 = 0.01;
const SCORER_REGULARIZATION: f64 = 0.3;
/// Noise levels of the training corpus; the largest gets [`WORST_LABEL`].
const NOISE_SIGMAS: [f64; 3] = [0.01, 0.03, 0.06];
/// Streak counts of the training corpus; the largest gets [`WORST_LABEL`].
const STREAK_COUNTS: [usize; 3] = [8, 16, 32];
/// Label of a clean training image.
pub const CLEAN_LABEL: f64 = 0.0;
/// Label of the most distorted training images.
pub const WORST_LABEL: f64 = 100.0;

/// Fits the default scorer on procedural scenes and graded distortions of
/// them. Labels grow linearly with noise level and streak count, from
/// [`CLEAN_LABEL`] to [`WORST_LABEL`], so score differences track how much
/// distortion was removed.
///
/// Deterministic; the same model is produced on every call.
pub fn synthetic_scorer() -> Result<ScorerModel> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let max_sigma = NOISE_SIGMAS[NOISE_SIGMAS.len() - 1];
    let max_count = STREAK_COUNTS[STREAK_COUNTS.len() - 1] as f64;
    for i in 0..SCORER_SCENES {
        let clean = natural_scene(SCORER_SIDE, SCORER_SIDE, 1000 + i)?;
        features.push(brisque_features(&clean)?);
        labels.push(CLEAN_LABEL);
        for (j, sigma) in NOISE_SIGMAS.into_iter().enumerate() {
            let noisy = add_noise(&clean, sigma, 2000 + 10 * i + j as u64);
            features.push(brisque_features(&noisy)?);
            labels.push(WORST_LABEL * sigma / max_sigma);
        }
        for (j, count) in STREAK_COUNTS.into_iter().enumerate() {
            let cfg = StreakConfig {
                count,
                ..StreakConfig::default()
            };
            let (rain, _) = add_streaks(&clean, &cfg, 3000 + 10 * i + j as u64)?;
            features.push(brisque_features(&rain)?);
            labels.push(WORST_LABEL * count as f64 / max_count);
        }
    }
    Ok(ScorerModel::fit_rbf(
        &features,
        &labels,
        SCORER_GAMMA,
        SCORER_REGULARIZATION,
    )?)
}
