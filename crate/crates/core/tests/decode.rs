use ddgrasp::metrics::double_dot_error;
use ddgrasp::{decode, rect_to_grasp, render_targets, DecodeConfig, LabelConfig, Maps, Point, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn label_cfg() -> LabelConfig<f64> {
    LabelConfig { map_height: 32, map_width: 32, stride: 4, ..LabelConfig::default() }
}

fn rect_in(lo: f64, hi: f64) -> impl Strategy<Value = Rect> {
    (lo..hi, lo..hi, 12.0..40.0f64, 2.0..12.0f64, 0.0..std::f64::consts::PI)
        .prop_map(|(x, y, w, h, t)| Rect::new(Point::new(x, y), w, h, t).unwrap())
}

fn random_maps(seed: u64, h: usize, w: usize) -> Maps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Maps::zeros(h, w);
    for (c, ch) in m.channels_mut().into_iter().enumerate() {
        for v in ch.as_mut_slice() {
            *v = match c {
                0 | 1 => rng.gen_range(0.0..1.0),
                2..=5 => rng.gen_range(0.0..1.0),
                _ => rng.gen_range(-1.0..1.0),
            };
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rendered_grasp_is_recovered(r in rect_in(40.0, 88.0)) {
        let t = render_targets(&[r], &label_cfg()).unwrap();
        let out = decode(&t.maps, &DecodeConfig::default()).unwrap();
        prop_assert!(!out.is_empty());
        let (err, _) = double_dot_error(&out[0].grasp, &rect_to_grasp(&r));
        prop_assert!(err <= 0.5, "error {err}");
        prop_assert!((out[0].score - 3.0).abs() < 1e-12);
    }

    #[test]
    fn distant_grasps_do_not_pair_up(a in rect_in(22.0, 30.0), b in rect_in(98.0, 106.0)) {
        let t = render_targets(&[a, b], &label_cfg()).unwrap();
        let out = decode(&t.maps, &DecodeConfig::default()).unwrap();
        prop_assert_eq!(out.len(), 2);
        for gt in [a, b] {
            let g = rect_to_grasp(&gt);
            prop_assert!(out.iter().any(|c| double_dot_error(&c.grasp, &g).0 <= 0.5));
        }
    }

    #[test]
    fn integer_shift_translates_output(r in rect_in(50.0, 78.0), dr in -3isize..=3, dc in -3isize..=3) {
        let t = render_targets(&[r], &label_cfg()).unwrap();
        let cfg = DecodeConfig::default();
        let base = decode(&t.maps, &cfg).unwrap();
        let moved = decode(&t.maps.shifted(dr, dc), &cfg).unwrap();
        prop_assert_eq!(base.len(), moved.len());
        let d = Point::new(4.0 * dc as f64, 4.0 * dr as f64);
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!(a.grasp.c1.distance(b.grasp.c1 - d) < 1e-9);
            prop_assert!(a.grasp.c2.distance(b.grasp.c2 - d) < 1e-9);
            prop_assert!((a.score - b.score).abs() < 1e-12);
        }
    }

    #[test]
    fn candidates_respect_constraints(seed in 0u64..1000, k in 2usize..30) {
        let maps = random_maps(seed, 12, 12);
        let cfg = DecodeConfig { top_k: k, ..DecodeConfig::default() };
        let out = decode(&maps, &cfg).unwrap();
        prop_assert!(out.len() <= k * (k - 1) / 2);
        for c in &out {
            prop_assert!((0.0..=3.0).contains(&c.score));
            let o = c.grasp.opening();
            prop_assert!((cfg.min_opening..=cfg.max_opening).contains(&o));
            prop_assert!(c.center_used.is_some());
        }
        prop_assert!(out.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn dropping_filters_only_adds_candidates(seed in 0u64..1000) {
        let maps = random_maps(seed, 12, 12);
        let both = decode(&maps, &DecodeConfig::default()).unwrap().len();
        let ori = decode(&maps, &DecodeConfig { center_matching: false, ..DecodeConfig::default() }).unwrap().len();
        let none = decode(
            &maps,
            &DecodeConfig { center_matching: false, orientation_matching: false, ..DecodeConfig::default() },
        )
        .unwrap()
        .len();
        prop_assert!(both <= ori && ori <= none);
    }
}

#[test]
fn decode_is_deterministic() {
    let maps = random_maps(7, 16, 16);
    let cfg = DecodeConfig::default();
    assert_eq!(decode(&maps, &cfg).unwrap(), decode(&maps, &cfg).unwrap());
}

#[test]
fn all_zero_maps_decode_to_nothing() {
    assert!(decode(&Maps::zeros(8, 8), &DecodeConfig::<f64>::default()).unwrap().is_empty());
}
