use ddgrasp::losses::{focal_loss, smooth_l1};
use ddgrasp::raster::Mask;
use ddgrasp::{loss_gradients, total_loss, FocalParams, Maps, Raster, TargetMaps};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 6;

fn random_pair(seed: u64) -> (Maps, TargetMaps<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pred = Maps::zeros(N, N);
    let mut target = Maps::zeros(N, N);
    let mut tips = Mask::filled(N, N, false);
    let mut centers = Mask::filled(N, N, false);
    for (c, (p, t)) in pred.channels_mut().into_iter().zip(target.channels_mut()).enumerate() {
        for (pv, tv) in p.as_mut_slice().iter_mut().zip(t.as_mut_slice()) {
            if c < 2 {
                *pv = rng.gen_range(0.05..0.95);
                *tv = if rng.gen_bool(0.2) { 1.0 } else { rng.gen_range(0.0..0.9) };
            } else {
                *pv = rng.gen_range(-3.0..3.0);
                *tv = rng.gen_range(-1.0..1.0);
            }
        }
    }
    for m in [&mut tips, &mut centers] {
        for v in m.as_mut_slice() {
            *v = rng.gen_bool(0.3);
        }
    }
    (pred, TargetMaps { maps: target, fingertip_mask: tips, center_mask: centers })
}

#[test]
fn gradients_match_finite_differences() {
    let params = FocalParams::default();
    let h = 1e-5;
    for seed in 0..20 {
        let (pred, target) = random_pair(seed);
        let grad = loss_gradients(&pred, &target, &params).unwrap();
        for c in 0..8 {
            for i in 0..N * N {
                let mut plus = pred.clone();
                plus.channels_mut()[c].as_mut_slice()[i] += h;
                let mut minus = pred.clone();
                minus.channels_mut()[c].as_mut_slice()[i] -= h;
                let fd = (total_loss(&plus, &target, &params).unwrap().total
                    - total_loss(&minus, &target, &params).unwrap().total)
                    / (2.0 * h);
                let d = pred.channels()[c].as_slice()[i] - target.maps.channels()[c].as_slice()[i];
                if c >= 2 && (d.abs() - 1.0).abs() < 1e-3 {
                    continue;
                }
                let a = grad.channels()[c].as_slice()[i];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "seed {seed} channel {c} cell {i}: analytic {a} fd {fd}");
            }
        }
    }
}

#[test]
fn total_is_sum_of_terms() {
    let params = FocalParams::default();
    for seed in 0..10 {
        let (pred, target) = random_pair(seed);
        let b = total_loss(&pred, &target, &params).unwrap();
        let sum: f64 = b.terms().iter().sum();
        assert!((b.total - sum).abs() < 1e-12);
        assert!(b.terms().iter().all(|&t| t >= 0.0));
    }
}

#[test]
fn perfect_prediction_has_zero_regression_loss() {
    let (_, target) = random_pair(3);
    let mut pred = target.maps.clone();
    pred.fingertip_score = Raster::filled(N, N, 0.5);
    pred.center_score = Raster::filled(N, N, 0.5);
    let b = total_loss(&pred, &target, &FocalParams::default()).unwrap();
    assert_eq!(b.terms()[2..], [0.0; 4]);
}

proptest! {
    #[test]
    fn smooth_l1_is_even_and_nonnegative(d in -100.0..100.0f64) {
        prop_assert_eq!(smooth_l1(d), smooth_l1(-d));
        prop_assert!(smooth_l1(d) >= 0.0);
        prop_assert!(smooth_l1(d) <= d.abs() * d.abs().max(1.0));
    }

    #[test]
    fn focal_decreases_toward_positive_target(q in 0.01..0.98f64) {
        let one = Raster::filled(1, 1, 1.0);
        let a = focal_loss(&Raster::filled(1, 1, q), &one, &FocalParams::default()).unwrap();
        let b = focal_loss(&Raster::filled(1, 1, q + 0.01), &one, &FocalParams::default()).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn focal_increases_with_negative_confidence(q in 0.01..0.98f64, s in 0.0..0.99f64) {
        let t = Raster::filled(1, 1, s);
        let a = focal_loss(&Raster::filled(1, 1, q), &t, &FocalParams::default()).unwrap();
        let b = focal_loss(&Raster::filled(1, 1, q + 0.01), &t, &FocalParams::default()).unwrap();
        prop_assert!(b > a);
    }
}
