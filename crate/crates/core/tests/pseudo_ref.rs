use derain_core::pseudo_ref::{sample_pseudo_reference, SamplerConfig};
use derain_core::rng::seeded;
use derain_core::{Image, RainMask};
use rand::Rng;

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut rng = seeded(seed);
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

#[test]
fn neighbors_are_chosen_uniformly() {
    // 3x3 image, center is rain: eight candidates with distinct values.
    let img = Image::new(3, 3, 1, (0..9).map(|v| v as f64 / 10.0).collect()).unwrap();
    let mask = RainMask::from_fn(3, 3, |y, x| (y, x) == (1, 1));
    let cfg = SamplerConfig { radius: 1, seed: 11 };
    let mut counts = [0usize; 9];
    let draws = 10_000;
    for d in 0..draws {
        let out = sample_pseudo_reference(&img, &mask, &cfg, d).unwrap();
        counts[(out.get(1, 1, 0) * 10.0).round() as usize] += 1;
    }
    assert_eq!(counts[4], 0);
    for (i, &c) in counts.iter().enumerate().filter(|&(i, _)| i != 4) {
        let f = c as f64 / draws as f64;
        assert!((f - 0.125).abs() < 0.02, "source {i}: {f}");
    }
}

#[test]
fn off_mask_pixels_are_untouched_and_sources_are_clean_neighbors() {
    let img = random_image(20, 17, 3, 12);
    let mut rng = seeded(13);
    let mask = RainMask::from_fn(20, 17, |_, _| rng.random::<f64>() < 0.3);
    let cfg = SamplerConfig { radius: 2, seed: 1 };
    for draw in 0..5 {
        let out = sample_pseudo_reference(&img, &mask, &cfg, draw).unwrap();
        for y in 0..20 {
            for x in 0..17 {
                let i = y * 17 + x;
                if !mask.get(y, x) {
                    assert_eq!(out.pixel(i), img.pixel(i));
                    continue;
                }
                // Some clean pixel within the window (or an expanded one) supplied all channels.
                let found = (0..20).any(|yy: usize| {
                    (0..17).any(|xx: usize| {
                        !mask.get(yy, xx) && img.pixel(yy * 17 + xx) == out.pixel(i)
                    })
                });
                assert!(found);
            }
        }
    }
}

#[test]
fn draws_are_reproducible_and_vary() {
    let img = random_image(16, 16, 3, 14);
    let mask = RainMask::from_fn(16, 16, |y, x| (x + y) % 5 == 0);
    let cfg = SamplerConfig { radius: 3, seed: 2 };
    let a = sample_pseudo_reference(&img, &mask, &cfg, 7).unwrap();
    assert_eq!(a, sample_pseudo_reference(&img, &mask, &cfg, 7).unwrap());
    assert_ne!(a, sample_pseudo_reference(&img, &mask, &cfg, 8).unwrap());
}

#[test]
fn empty_mask_is_identity_and_full_mask_errors() {
    let img = random_image(6, 6, 1, 15);
    let cfg = SamplerConfig::default();
    assert_eq!(
        sample_pseudo_reference(&img, &RainMask::empty(6, 6), &cfg, 0).unwrap(),
        img
    );
    assert!(sample_pseudo_reference(&img, &RainMask::from_fn(6, 6, |_, _| true), &cfg, 0).is_err());
}
