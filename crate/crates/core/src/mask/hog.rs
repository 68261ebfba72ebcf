use std::f64::consts::PI;

/// Default number of unsigned orientation bins.
pub const HOG_BINS: usize = 9;

/// Single-cell histogram of oriented gradients for a `p × p` atom.
///
/// Gradients are central differences with edge-replicated neighbors.
/// Orientations are unsigned (`[0, π)`), hard-binned, magnitude-weighted,
/// and the histogram is ℓ2-normalized. A gradient-free atom yields zeros.
pub fn hog_of_atom(atom: &[f64], p: usize, bins: usize) -> Vec<f64> {
    assert_eq!(atom.len(), p * p, "atom length must be p²");
    assert!(bins > 0);
    let at = |y: isize, x: isize| {
        let y = y.clamp(0, p as isize - 1) as usize;
        let x = x.clamp(0, p as isize - 1) as usize;
        atom[y * p + x]
    };
    let mut hist = vec![0.0; bins];
    let width = PI / bins as f64;
    for y in 0..p as isize {
        for x in 0..p as isize {
            let gx = 0.5 * (at(y, x + 1) - at(y, x - 1));
            let gy = 0.5 * (at(y + 1, x) - at(y - 1, x));
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(PI);
            let bin = ((theta / width) as usize).min(bins - 1);
            hist[bin] += mag;
        }
    }
    let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        hist.iter_mut().for_each(|v| *v /= norm);
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_atom_is_zero() {
        assert!(hog_of_atom(&[0.3; 9], 3, HOG_BINS).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_stripe_is_horizontal_gradient() {
        // Column 1 bright: gradients point along x only.
        let atom = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let d = hog_of_atom(&atom, 3, HOG_BINS);
        assert!((d[0] - 1.0).abs() < 1e-12, "{d:?}");
        assert!(d[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_stripe_is_vertical_gradient() {
        let atom = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let d = hog_of_atom(&atom, 3, HOG_BINS);
        // π/2 falls in bin 4 of 9.
        assert!((d[4] - 1.0).abs() < 1e-12, "{d:?}");
    }
}
