use derain_core::filters::{
    apply_action, bilateral_filter, box_filter, gaussian_filter, median_filter, Action, FilterKind,
    FilterSpec, NUM_ACTIONS,
};
use derain_core::rng::seeded;
use derain_core::Image;
use rand::Rng;

fn impulse(n: usize) -> Image {
    Image::from_fn(n, n, 1, |y, x, _| if y == n / 2 && x == n / 2 { 1.0 } else { 0.0 }).unwrap()
}

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut rng = seeded(seed);
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

#[test]
fn box_impulse_is_one_over_25() {
    let out = box_filter(&impulse(5), 5).unwrap();
    assert!((out.get(2, 2, 0) - 1.0 / 25.0).abs() < 1e-15);
    let v = apply_action(&impulse(5), 1, 2, 2).unwrap();
    assert!((v[0] - 1.0 / 25.0).abs() < 1e-15);
}

#[test]
fn kernel_one_is_identity() {
    let img = random_image(6, 7, 3, 1);
    assert_eq!(box_filter(&img, 1).unwrap(), img);
    assert_eq!(median_filter(&img, 1).unwrap(), img);
}

#[test]
fn gaussian_impulse_matches_normalized_kernel() {
    for sigma in [0.5, 1.5] {
        let w = |dy: f64, dx: f64| (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
        let total: f64 = (-2..=2)
            .flat_map(|dy| (-2..=2).map(move |dx| (dy, dx)))
            .map(|(dy, dx)| w(dy as f64, dx as f64))
            .sum();
        let out = gaussian_filter(&impulse(5), 5, sigma).unwrap();
        assert!((out.get(2, 2, 0) - w(0.0, 0.0) / total).abs() < 1e-14);
        assert!((out.get(2, 3, 0) - w(0.0, 1.0) / total).abs() < 1e-14);
        assert!((out.get(1, 3, 0) - w(1.0, 1.0) / total).abs() < 1e-14);
    }
}

#[test]
fn gaussian_step_has_no_overshoot() {
    let img = Image::from_fn(9, 12, 1, |_, x, _| if x < 6 { 0.2 } else { 0.8 }).unwrap();
    let out = gaussian_filter(&img, 5, 1.5).unwrap();
    for y in 0..9 {
        for x in 1..12 {
            assert!(out.get(y, x, 0) >= out.get(y, x - 1, 0));
        }
        assert!(out.data().iter().all(|&v| (0.2..=0.8).contains(&v)));
    }
}

#[test]
fn median_of_checkerboard_is_window_majority() {
    let (h, w) = (7, 8);
    let img = Image::from_fn(h, w, 1, |y, x, _| ((y + x) % 2) as f64).unwrap();
    let out = median_filter(&img, 3).unwrap();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut ones = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    ones += img.get_clamped(y + dy, x + dx, 0) as usize;
                }
            }
            let majority = if ones >= 5 { 1.0 } else { 0.0 };
            assert_eq!(out.get(y as usize, x as usize, 0), majority);
        }
    }
}

#[test]
fn median_removes_single_impulse() {
    let mut img = Image::filled(9, 9, 1, 0.3).unwrap();
    img.set_pixel(40, &[1.0]);
    assert_eq!(median_filter(&img, 5).unwrap(), Image::filled(9, 9, 1, 0.3).unwrap());
}

#[test]
fn bilateral_with_huge_range_sigma_is_gaussian() {
    let img = random_image(12, 10, 3, 3);
    let b = bilateral_filter(&img, 5, 1e6, 1.5).unwrap();
    let g = gaussian_filter(&img, 5, 1.5).unwrap();
    for (x, y) in b.data().iter().zip(g.data()) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn narrow_bilateral_preserves_step() {
    let (lo, hi) = (0.2, 0.8);
    let img = Image::from_fn(5, 12, 1, |_, x, _| if x < 6 { lo } else { hi }).unwrap();
    let out = bilateral_filter(&img, 5, 0.1, 5.0).unwrap();
    for y in 0..5 {
        for x in 0..12 {
            let moved = (out.get(y, x, 0) - img.get(y, x, 0)).abs();
            assert!(moved < 0.1 * (hi - lo), "({y},{x}) moved {moved}");
        }
    }
}

#[test]
fn constant_images_are_fixed_points() {
    let img = Image::filled(8, 8, 3, 0.42).unwrap();
    for a in Action::ALL {
        let out = a.spec().apply(&img).unwrap();
        match a {
            Action::Increment => assert!(out.data().iter().all(|&v| (v - (0.42 + 1.0 / 255.0)).abs() < 1e-15)),
            Action::Decrement => assert!(out.data().iter().all(|&v| (v - (0.42 - 1.0 / 255.0)).abs() < 1e-15)),
            _ => assert!(out.data().iter().all(|&v| (v - 0.42).abs() < 1e-15), "{a:?}"),
        }
    }
}

#[test]
fn action_table() {
    assert_eq!(Action::ALL.len(), NUM_ACTIONS);
    let expect = [
        (FilterKind::Box, 5),
        (FilterKind::Bilateral { sigma_c: 1.0, sigma_s: 5.0 }, 5),
        (FilterKind::Bilateral { sigma_c: 0.1, sigma_s: 5.0 }, 5),
        (FilterKind::Median, 5),
        (FilterKind::Gaussian { sigma: 1.5 }, 5),
        (FilterKind::Gaussian { sigma: 0.5 }, 5),
        (FilterKind::Increment, 1),
        (FilterKind::Decrement, 1),
        (FilterKind::Identity, 1),
    ];
    for (i, (kind, kernel)) in expect.into_iter().enumerate() {
        let a = Action::from_index(i + 1).unwrap();
        assert_eq!(a.index(), i + 1);
        assert_eq!(a.spec(), FilterSpec { kind, kernel });
    }
    assert!(Action::from_index(0).is_err());
    assert!(Action::from_index(10).is_err());
}

#[test]
fn point_actions() {
    let img = Image::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
    assert_eq!(apply_action(&img, 7, 0, 0).unwrap(), vec![1.0]);
    assert_eq!(apply_action(&img, 8, 0, 1).unwrap(), vec![0.0]);
    assert_eq!(apply_action(&img, 9, 0, 0).unwrap(), vec![1.0]);
    assert!(apply_action(&img, 9, 1, 0).is_err());
}

#[test]
fn invalid_specs_rejected() {
    assert!(box_filter(&impulse(5), 4).is_err());
    assert!(box_filter(&impulse(5), 0).is_err());
    assert!(gaussian_filter(&impulse(5), 3, 0.0).is_err());
    assert!(bilateral_filter(&impulse(5), 3, -1.0, 1.0).is_err());
}
