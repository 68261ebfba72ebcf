use derain_core::image::{quantize, Image};
use derain_core::metrics::{psnr, ssim, PSNR_IDENTICAL};
use derain_core::rng::seeded;
use derain_core::Error;
use rand::Rng;

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
    let mut rng = seeded(seed);
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

#[test]
fn constructor_clamps() {
    let img = Image::new(1, 3, 1, vec![-0.5, 0.25, 7.0]).unwrap();
    assert_eq!(img.data(), &[0.0, 0.25, 1.0]);
    assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
}

#[test]
fn png_bytes_map_to_unit_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.png");
    image::GrayImage::from_raw(2, 1, vec![128, 255]).unwrap().save(&path).unwrap();
    let img = Image::load(&path).unwrap();
    assert_eq!(img.channels(), 1);
    assert_eq!(img.data(), &[128.0 / 255.0, 1.0]);
}

#[test]
fn save_quantizes_half_to_128() {
    assert_eq!(quantize(0.5), 128);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.png");
    Image::filled(1, 1, 1, 0.5).unwrap().save(&path).unwrap();
    assert_eq!(Image::load(&path).unwrap().data(), &[128.0 / 255.0]);
}

#[test]
fn round_trip_within_half_step() {
    let dir = tempfile::tempdir().unwrap();
    for c in [1, 3] {
        let img = random_image(8, 8, c, c as u64);
        let path = dir.path().join(format!("r{c}.png"));
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(back.dims(), img.dims());
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
}

#[test]
fn unsupported_png_is_a_decode_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.png");
    image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![1000u16])
        .unwrap()
        .save(&path)
        .unwrap();
    assert!(matches!(Image::load(&path), Err(Error::Decode { .. })));
    assert!(matches!(
        Image::load(dir.path().join("missing.png")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn grayscale_weights() {
    let red = Image::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
    assert!((red.to_grayscale().data()[0] - 0.299).abs() < 1e-15);
    let gray = Image::new(1, 1, 3, vec![0.4, 0.4, 0.4]).unwrap();
    assert!((gray.to_grayscale().data()[0] - 0.4).abs() < 1e-15);
    let one = random_image(4, 5, 1, 2);
    assert_eq!(one.to_grayscale(), one);
}

#[test]
fn psnr_hand_values() {
    let zeros = Image::filled(4, 4, 3, 0.0).unwrap();
    let ones = Image::filled(4, 4, 3, 1.0).unwrap();
    assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);
    assert_eq!(psnr(&ones, &ones).unwrap(), PSNR_IDENTICAL);
    let a = Image::filled(4, 4, 3, 0.3).unwrap();
    let b = Image::filled(4, 4, 3, 0.4).unwrap();
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    let small = Image::filled(4, 3, 3, 0.0).unwrap();
    assert!(psnr(&a, &small).is_err());
}

#[test]
fn psnr_symmetric_and_monotone_in_scale() {
    let a = random_image(16, 16, 3, 1);
    let b = random_image(16, 16, 3, 2);
    assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    let base = Image::filled(16, 16, 3, 0.5).unwrap();
    let diff = random_image(16, 16, 3, 3);
    let shifted =
        |s: f64| Image::from_fn(16, 16, 3, |y, x, c| 0.5 + s * (diff.get(y, x, c) - 0.5)).unwrap();
    assert!(psnr(&base, &shifted(0.5)).unwrap() > psnr(&base, &shifted(1.0)).unwrap());
}

#[test]
fn ssim_identity_symmetry_and_epsilon() {
    let a = random_image(24, 24, 3, 4);
    let b = random_image(24, 24, 3, 5);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);

    // Constant c against c + ε: every window gives (2c(c+ε) + C1)/(c² + (c+ε)² + C1).
    let (c, eps) = (0.5, 0.002);
    let x = Image::filled(16, 16, 1, c).unwrap();
    let y = Image::filled(16, 16, 1, c + eps).unwrap();
    let c1 = 1e-4;
    let expected = (2.0 * c * (c + eps) + c1) / (c * c + (c + eps) * (c + eps) + c1);
    let got = ssim(&x, &y).unwrap();
    assert!((got - expected).abs() < 1e-9);
    assert!(got >= 0.99);
}

#[test]
fn ssim_of_independent_noise_is_near_zero() {
    let a = random_image(64, 64, 1, 10);
    let b = random_image(64, 64, 1, 11);
    assert!(ssim(&a, &b).unwrap().abs() < 0.1);
}

#[test]
fn ssim_rejects_small_images() {
    let a = Image::filled(10, 30, 1, 0.1).unwrap();
    assert!(matches!(ssim(&a, &a), Err(Error::TooSmall(_))));
}
