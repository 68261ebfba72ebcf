use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

const MAX_ITERATIONS: usize = 100;

/// Result of splitting atoms into two clusters.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomSplit {
    /// Members of the tighter cluster.
    pub rain: Vec<usize>,
    pub non_rain: Vec<usize>,
    /// Mean squared distance to centroid for (rain, non-rain).
    pub variances: (f64, f64),
}

/// Two-means clustering of descriptors; the cluster with the lower mean
/// squared distance to its centroid is reported as rain. Ties go to the
/// cluster holding the lowest descriptor index.
pub fn split_atoms(descriptors: &[Vec<f64>], seed: u64) -> Result<AtomSplit> {
    if descriptors.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two descriptors to split".into(),
        ));
    }
    if descriptors.iter().all(|d| *d == descriptors[0]) {
        return Err(Error::Degenerate(
            "all descriptors are identical; no split possible".into(),
        ));
    }
    let labels = two_means(descriptors, seed);

    let mut clusters: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    let var = |members: &[usize]| {
        let c = centroid(descriptors, members);
        members
            .iter()
            .map(|&i| sq_dist(&descriptors[i], &c))
            .sum::<f64>()
            / members.len() as f64
    };
    let v0 = var(&clusters[0]);
    let v1 = var(&clusters[1]);
    let first_is_rain = if v0 != v1 {
        v0 < v1
    } else {
        clusters[0][0] < clusters[1][0]
    };
    let [c0, c1] = clusters;
    Ok(if first_is_rain {
        AtomSplit {
            rain: c0,
            non_rain: c1,
            variances: (v0, v1),
        }
    } else {
        AtomSplit {
            rain: c1,
            non_rain: c0,
            variances: (v1, v0),
        }
    })
}

/// Lloyd iterations with k-means++ seeding; returns a label (0 or 1) per point.
/// Both clusters are guaranteed non-empty.
fn two_means(points: &[Vec<f64>], seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let first = rng.random_range(0..points.len());
    let d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    let total: f64 = d2.iter().sum();
    let mut target = rng.random::<f64>() * total;
    let mut second = d2.iter().rposition(|&d| d > 0.0).unwrap();
    for (i, &d) in d2.iter().enumerate() {
        if d > 0.0 && target < d {
            second = i;
            break;
        }
        target -= d;
    }
    let mut centers = [points[first].clone(), points[second].clone()];

    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let l = usize::from(sq_dist(p, &centers[1]) < sq_dist(p, &centers[0]));
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        for k in 0..2 {
            if !labels.contains(&k) {
                // Steal the point farthest from the other centroid.
                let other = &centers[1 - k];
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], other).total_cmp(&sq_dist(&points[b], other))
                    })
                    .unwrap();
                labels[far] = k;
                changed = true;
            }
        }
        for (k, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..points.len()).filter(|&i| labels[i] == k).collect();
            *center = centroid(points, &members);
        }
        if !changed {
            break;
        }
    }
    labels
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for &i in members {
        for (ci, v) in c.iter_mut().zip(&points[i]) {
            *ci += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
