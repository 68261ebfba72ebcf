use derain_core::filters::{apply_action, Action, NUM_ACTIONS};
use derain_core::mask::{decompose, MaskConfig};
use derain_core::metrics::psnr;
use derain_core::pseudo_ref::{sample_pseudo_reference, SamplerConfig};
use derain_core::rl::{n_step_returns, select_actions, Mode, StepRecord, Trajectory};
use derain_core::{Image, RainMask};
use proptest::prelude::*;

fn image(max_side: usize, channels: usize) -> impl Strategy<Value = Image> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(h, w)| {
        prop::collection::vec(0.0..=1.0f64, h * w * channels)
            .prop_map(move |data| Image::new(h, w, channels, data).unwrap())
    })
}

fn image_and_mask(max_side: usize) -> impl Strategy<Value = (Image, RainMask)> {
    image(max_side, 3).prop_flat_map(|img| {
        let (h, w) = (img.height(), img.width());
        prop::collection::vec(any::<bool>(), h * w)
            .prop_map(move |bits| (img.clone(), RainMask::new(h, w, bits).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_outputs_stay_in_unit_range(img in image(9, 3), a in 1..=NUM_ACTIONS) {
        let out = Action::from_index(a).unwrap().spec().apply(&img).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn pointwise_action_matches_whole_image_filter(img in image(8, 3), a in 1..=NUM_ACTIONS, yx in (0usize..64, 0usize..64)) {
        let (y, x) = (yx.0 % img.height(), yx.1 % img.width());
        let full = Action::from_index(a).unwrap().spec().apply(&img).unwrap();
        let px = apply_action(&img, a, y, x).unwrap();
        for (c, v) in px.iter().enumerate() {
            prop_assert!((v - full.get(y, x, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_is_symmetric((a, b) in (1usize..8, 1usize..8).prop_flat_map(|(h, w)| {
        let v = prop::collection::vec(0.0..=1.0f64, h * w);
        (v.clone(), v).prop_map(move |(x, y)| (Image::new(h, w, 1, x).unwrap(), Image::new(h, w, 1, y).unwrap()))
    })) {
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn pseudo_reference_keeps_clean_pixels((img, mask) in image_and_mask(8), draw in 0u64..100) {
        prop_assume!(mask.count() < mask.bits().len());
        let out = sample_pseudo_reference(&img, &mask, &SamplerConfig { radius: 2, seed: 3 }, draw).unwrap();
        for i in 0..img.pixels() {
            if !mask.at(i) {
                prop_assert_eq!(out.pixel(i), img.pixel(i));
            } else {
                let src_is_clean = (0..img.pixels()).any(|j| !mask.at(j) && img.pixel(j) == out.pixel(i));
                prop_assert!(src_is_clean);
            }
        }
    }

    #[test]
    fn sampled_actions_are_in_range(raw in prop::collection::vec(0.0..1.0f64, NUM_ACTIONS * 10), seed in any::<u64>()) {
        let mut probs = raw.clone();
        for row in probs.chunks_exact_mut(NUM_ACTIONS) {
            let s: f64 = row.iter().sum::<f64>() + 1e-12;
            row.iter_mut().for_each(|v| *v /= s);
        }
        for mode in [Mode::Sample, Mode::Greedy] {
            let acts = select_actions(&probs, mode, seed, 0);
            prop_assert_eq!(acts.len(), 10);
            prop_assert!(acts.iter().all(|&a| (1..=NUM_ACTIONS as u8).contains(&a)));
        }
    }

    #[test]
    fn zero_discount_returns_equal_rewards(rewards in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 1..6)) {
        let img = Image::filled(2, 3, 1, 0.5).unwrap();
        let traj = Trajectory {
            steps: rewards.iter().map(|r| StepRecord {
                state: img.clone(),
                actions: vec![9; 6],
                reward: r.clone(),
                value: vec![0.0; 6],
                policy_logits: vec![0.0; 6 * NUM_ACTIONS],
            }).collect(),
            bootstrap_value: vec![100.0; 6],
            final_state: img,
        };
        prop_assert_eq!(n_step_returns(&traj, 0.0), rewards);
    }

    #[test]
    fn decomposition_sums_to_luma(img in image(12, 3)) {
        let d = decompose(&img, &MaskConfig::default().decomposition).unwrap();
        let luma = img.to_grayscale();
        for (i, v) in luma.data().iter().enumerate() {
            prop_assert!((d.low.data()[i] + d.high.data[i] - v).abs() < 1e-12);
        }
    }
}
