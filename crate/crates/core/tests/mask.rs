use derain_core::filters::{FilterKind, FilterSpec};
use derain_core::mask::{
    binarize, compute_rdp, decompose, extract_patches, hog_of_atom, kkt_residual,
    learn_dictionary, reconstruct_rain, sparse_code, split_atoms, Dictionary, MaskConfig,
    PatchSet, HOG_BINS,
};
use derain_core::rng::seeded;
use derain_core::{Image, Plane, RainMask};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gram-Schmidt on random Gaussian vectors.
fn orthonormal_atoms(count: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < count {
        let mut v = gaussian_vec(&mut rng, n);
        for q in &out {
            let c = dot(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let l = norm(&v);
        out.push(v.into_iter().map(|x| x / l).collect());
    }
    out
}

fn residual_correlation(dict: &Dictionary, y: &[f64], code: &[f64]) -> Vec<f64> {
    let recon = dict.reconstruct(code);
    let r: Vec<f64> = y.iter().zip(&recon).map(|(a, b)| a - b).collect();
    dict.correlate(&r)
}

#[test]
fn decomposition_sums_back() {
    let mut rng = seeded(1);
    let img = Image::new(12, 9, 3, (0..12 * 9 * 3).map(|_| rng.random()).collect()).unwrap();
    let spec = MaskConfig::default().decomposition;
    let d = decompose(&img, &spec).unwrap();
    let luma = img.to_grayscale();
    for (i, v) in luma.data().iter().enumerate() {
        assert!((d.low.data()[i] + d.high.data[i] - v).abs() < 1e-9);
    }
    let flat = decompose(&Image::filled(8, 8, 3, 0.6).unwrap(), &spec).unwrap();
    assert!(flat.high.data.iter().all(|&v| v.abs() < 1e-15));
}

#[test]
fn narrow_bilateral_leaves_step_in_low_band() {
    let img = Image::from_fn(8, 12, 1, |_, x, _| if x < 6 { 0.2 } else { 0.8 }).unwrap();
    let spec = FilterSpec {
        kind: FilterKind::Bilateral { sigma_c: 0.1, sigma_s: 5.0 },
        kernel: 5,
    };
    let d = decompose(&img, &spec).unwrap();
    assert!(d.high.max_abs() < 0.01 * 0.6);
}

#[test]
fn patch_extraction_counts_and_zeroes() {
    let zero = Plane::zeros(5, 5);
    let set = extract_patches(&zero, 3, 1).unwrap();
    assert_eq!(set.len(), 25);
    assert_eq!(set.dim(), 9);
    assert!(set.iter().all(|p| p.iter().all(|&v| v == 0.0)));
    let strided = extract_patches(&Plane::zeros(9, 7), 3, 2).unwrap();
    assert_eq!(strided.len(), 5 * 4);
    assert!(extract_patches(&zero, 4, 1).is_err());
    assert!(extract_patches(&zero, 7, 1).is_err());
}

#[test]
fn zero_patch_codes_to_zero() {
    let dict = Dictionary::from_atoms(orthonormal_atoms(4, 9, 2), 0.1).unwrap();
    let code = sparse_code(&[0.0; 9], &dict).unwrap();
    assert!(code.coefficients.iter().all(|&c| c == 0.0));
}

#[test]
fn single_atom_patch_is_soft_thresholded() {
    let atoms = orthonormal_atoms(6, 16, 3);
    let lambda = 0.05;
    let dict = Dictionary::from_atoms(atoms.clone(), lambda).unwrap();
    let code = sparse_code(&atoms[3], &dict).unwrap().coefficients;
    for (j, c) in code.iter().enumerate() {
        let expected = if j == 3 { 1.0 - lambda } else { 0.0 };
        assert!((c - expected).abs() < 1e-6, "atom {j}: {c}");
    }
}

#[test]
fn large_lambda_shrinks_everything() {
    let atoms = orthonormal_atoms(5, 16, 4);
    let mut rng = seeded(5);
    let y = gaussian_vec(&mut rng, 16);
    let dict0 = Dictionary::from_atoms(atoms.clone(), 1.0).unwrap();
    let max_corr = dict0.correlate(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dict = Dictionary::from_atoms(atoms, max_corr * 1.01).unwrap();
    assert!(sparse_code(&y, &dict).unwrap().coefficients.iter().all(|&c| c == 0.0));
}

#[test]
fn lasso_kkt_on_random_instances() {
    let mut rng = seeded(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (n, m) = (rng.random_range(4..30), rng.random_range(2..40));
        let atoms: Vec<Vec<f64>> = (0..m).map(|_| gaussian_vec(&mut rng, n)).collect();
        let lambda = rng.random_range(0.01..0.5);
        let dict = Dictionary::from_atoms(atoms, lambda).unwrap();
        let y = gaussian_vec(&mut rng, n);
        let code = sparse_code(&y, &dict).unwrap().coefficients;
        let g = residual_correlation(&dict, &y, &code);
        worst = worst.max(kkt_residual(&code, &g, lambda));
    }
    assert!(worst <= 1e-5, "worst KKT residual {worst}");
}

fn sparse_mixtures(atoms: &[Vec<f64>], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..count)
        .map(|_| {
            let mut v = vec![0.0; atoms[0].len()];
            let k = rng.random_range(1..=2);
            for _ in 0..k {
                let j = rng.random_range(0..atoms.len());
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let c = sign * rng.random_range(1.0..2.0);
                v.iter_mut().zip(&atoms[j]).for_each(|(a, b)| *a += c * b);
            }
            v
        })
        .collect()
}

#[test]
fn dictionary_recovers_known_atoms() {
    let truth = orthonormal_atoms(8, 25, 7);
    let train = PatchSet::from_vectors(5, &sparse_mixtures(&truth, 400, 8)).unwrap();
    let lambda = 0.05;
    let learned = learn_dictionary(&train, 8, lambda, 30, 9).unwrap();
    let dict = learned.dictionary;
    for a in dict.atoms() {
        assert!((norm(a) - 1.0).abs() < 1e-6);
    }
    let held_out = sparse_mixtures(&truth, 100, 10);
    let (mut err, mut total) = (0.0, 0.0);
    for y in &held_out {
        let code = sparse_code(y, &dict).unwrap().coefficients;
        let recon = dict.reconstruct(&code);
        err += y.iter().zip(&recon).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        total += dot(y, y);
    }
    let rel = (err / total).sqrt();
    assert!(rel < 0.1, "relative reconstruction error {rel}");
}

#[test]
fn dictionary_objective_is_monotone() {
    let mut rng = seeded(11);
    let plane = Plane::new(24, 24, (0..576).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
    let patches = extract_patches(&plane, 5, 2).unwrap().centered();
    let t = learn_dictionary(&patches, 16, 0.1, 6, 12).unwrap();
    assert_eq!(t.objective.len(), 6);
    for w in t.objective.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{:?}", t.objective);
    }
}

#[test]
fn zero_epochs_returns_initial_dictionary() {
    let mut rng = seeded(13);
    let vectors: Vec<Vec<f64>> = (0..20).map(|_| gaussian_vec(&mut rng, 9)).collect();
    let set = PatchSet::from_vectors(3, &vectors).unwrap();
    let a = learn_dictionary(&set, 5, 0.1, 0, 14).unwrap();
    let b = learn_dictionary(&set, 5, 0.1, 0, 14).unwrap();
    assert!(a.objective.is_empty());
    assert_eq!(a.dictionary, b.dictionary);
    // Initial atoms are normalized training patches.
    for atom in a.dictionary.atoms() {
        assert!(vectors.iter().any(|v| {
            let l = norm(v);
            v.iter().zip(atom).all(|(x, d)| (x / l - d).abs() < 1e-12)
        }));
    }
}

#[test]
fn degenerate_patch_sets_rejected() {
    let zero = PatchSet::from_vectors(3, &vec![vec![0.0; 9]; 10]).unwrap();
    assert!(learn_dictionary(&zero, 4, 0.1, 2, 0).is_err());
    assert!(learn_dictionary(&zero, 11, 0.1, 2, 0).is_err());
}

#[test]
fn hog_descriptors_are_unit_or_zero() {
    let mut rng = seeded(15);
    for _ in 0..20 {
        let atom = gaussian_vec(&mut rng, 49);
        let d = hog_of_atom(&atom, 7, HOG_BINS);
        assert_eq!(d.len(), HOG_BINS);
        assert!((norm(&d) - 1.0).abs() < 1e-12);
    }
    assert_eq!(norm(&hog_of_atom(&[1.0; 49], 7, HOG_BINS)), 0.0);
}

#[test]
fn tight_cluster_is_rain() {
    let mut rng = seeded(16);
    let mut descriptors = Vec::new();
    for _ in 0..10 {
        descriptors.push(vec![1.0 + 0.01 * rng.random::<f64>(), 0.0]);
    }
    for _ in 0..10 {
        descriptors.push(vec![-3.0 + rng.random::<f64>(), 2.0 * rng.random::<f64>()]);
    }
    let split = split_atoms(&descriptors, 3).unwrap();
    assert_eq!(split.rain, (0..10).collect::<Vec<_>>());
    assert_eq!(split.non_rain, (10..20).collect::<Vec<_>>());
    assert!(split.variances.0 < split.variances.1);
}

#[test]
fn all_atoms_reconstruct_the_full_approximation() {
    let mut rng = seeded(17);
    let plane = Plane::new(10, 10, (0..100).map(|_| rng.random::<f64>()).collect()).unwrap();
    let patches = extract_patches(&plane, 3, 1).unwrap();
    let dict = Dictionary::from_atoms((0..6).map(|_| gaussian_vec(&mut rng, 9)).collect(), 0.05)
        .unwrap();
    let all: Vec<usize> = (0..6).collect();
    let raster = reconstruct_rain(&patches, &dict, &all).unwrap();
    let recons: Vec<Vec<f64>> = patches
        .iter()
        .map(|p| dict.reconstruct(&sparse_code(p, &dict).unwrap().coefficients))
        .collect();
    let expected = patches.overlap_average(recons.iter().map(|v| v.as_slice()));
    for (a, b) in raster.data.iter().zip(&expected.data) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(reconstruct_rain(&patches, &dict, &[]).is_err());
}

#[test]
fn single_patch_reconstruction_by_hand() {
    let mut rng = seeded(18);
    let plane = Plane::new(5, 5, (0..25).map(|_| rng.random::<f64>()).collect()).unwrap();
    // One center at (0, 0); its footprint covers rows/cols -2..=2.
    let patches = extract_patches(&plane, 5, 5).unwrap();
    assert_eq!(patches.len(), 1);
    let y = patches.patch(0).to_vec();
    let ny = norm(&y);
    let d0: Vec<f64> = y.iter().map(|v| v / ny).collect();
    let mut e = gaussian_vec(&mut rng, 25);
    let c = dot(&e, &d0);
    e.iter_mut().zip(&d0).for_each(|(a, b)| *a -= c * b);
    let lambda = 0.01;
    let dict = Dictionary::from_atoms(vec![d0.clone(), e], lambda).unwrap();
    let raster = reconstruct_rain(&patches, &dict, &[0]).unwrap();
    let code = ny - lambda;
    for y_ in 0..5 {
        for x in 0..5 {
            let v = raster.get(y_, x);
            if y_ <= 2 && x <= 2 {
                let k = (y_ + 2) * 5 + (x + 2);
                assert!((v - code * d0[k]).abs() < 1e-6);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }
    // Only atom 1 kept: its coefficient is zero, so nothing is reconstructed.
    let none = reconstruct_rain(&patches, &dict, &[1]).unwrap();
    assert!(none.data.iter().all(|&v| v.abs() < 1e-9));
}

#[test]
fn binarize_ramp_and_zero() {
    let ramp = Plane::new(1, 10, (0..10).map(|i| i as f64 / 9.0).collect()).unwrap();
    let m = binarize(&ramp, 0.5).unwrap();
    assert_eq!(m.bits(), &[false, false, false, false, false, true, true, true, true, true]);
    let zero = binarize(&Plane::zeros(3, 3), 0.5).unwrap();
    assert_eq!(zero.count(), 0);
    let mut hot = Plane::zeros(3, 3);
    hot.data[4] = -2.0;
    assert_eq!(binarize(&hot, 0.5).unwrap().count(), 1);
    assert!(binarize(&hot, 1.0).is_err());
}

#[test]
fn smooth_images_get_almost_no_mask() {
    let gradient = Image::from_fn(64, 64, 3, |y, x, c| {
        0.2 + 0.5 * (y as f64 / 63.0) * (1.0 - 0.2 * c as f64) + 0.1 * x as f64 / 63.0
    })
    .unwrap();
    let cfg = MaskConfig::default();
    assert!(compute_rdp(&gradient, &cfg).unwrap().density() < 0.05);
    let flat = Image::filled(40, 40, 1, 0.5).unwrap();
    assert!(compute_rdp(&flat, &cfg).unwrap().density() < 0.05);
}

#[test]
fn rdp_is_deterministic_and_png_round_trips() {
    let img = Image::from_fn(48, 48, 3, |y, x, _| {
        let streak = (x + 48 - (y / 4)) % 9 == 0;
        0.3 + 0.1 * (y as f64 / 48.0) + if streak { 0.4 } else { 0.0 }
    })
    .unwrap();
    let cfg = MaskConfig::default();
    let a = compute_rdp(&img, &cfg).unwrap();
    let b = compute_rdp(&img, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.count() > 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.png");
    a.save(&path).unwrap();
    assert_eq!(RainMask::load(&path).unwrap(), a);
}
