use std::f64::consts::FRAC_PI_2;

use ddgrasp::labeling::gaussian_score_at;
use ddgrasp::{rect_to_grasp, render_targets, Grasp, LabelConfig, LabelError, Point, Rect};
use proptest::prelude::*;

fn cfg(size: usize, stride: usize) -> LabelConfig<f64> {
    LabelConfig { map_height: size, map_width: size, stride, ..LabelConfig::default() }
}

/// Rectangles whose fingertips and center fit comfortably in a 128-pixel image.
fn inner_rect() -> impl Strategy<Value = Rect> {
    (40.0..88.0f64, 40.0..88.0f64, 2.0..40.0f64, 2.0..16.0f64, 0.0..std::f64::consts::PI)
        .prop_map(|(x, y, w, h, t)| Rect::new(Point::new(x, y), w, h, t).unwrap())
}

fn cell(p: Point, n: f64) -> (usize, usize) {
    ((p.y / n).floor() as usize, (p.x / n).floor() as usize)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fingertip_cells_score_one(r in inner_rect(), stride in 1usize..=4) {
        let c = cfg(128usize.div_ceil(stride), stride);
        let t = render_targets(&[r], &c).unwrap();
        let g = rect_to_grasp(&r);
        for p in [g.c1, g.c2] {
            let (row, col) = cell(p, stride as f64);
            prop_assert_eq!(t.maps.fingertip_score.get(row, col), 1.0);
            prop_assert!(t.fingertip_mask.get(row, col));
        }
        let (row, col) = cell(r.center, stride as f64);
        prop_assert_eq!(t.maps.center_score.get(row, col), 1.0);
        prop_assert!(t.center_mask.get(row, col));
    }

    #[test]
    fn regression_targets_are_well_formed(rects in prop::collection::vec(inner_rect(), 1..4)) {
        let t = render_targets(&rects, &cfg(32, 4)).unwrap();
        let (h, w) = t.maps.shape();
        for row in 0..h {
            for col in 0..w {
                let s = t.maps.fingertip_score.get(row, col);
                prop_assert!((0.0..=1.0).contains(&s));
                if t.fingertip_mask.get(row, col) {
                    let (si, co) = (t.maps.sin.get(row, col), t.maps.cos.get(row, col));
                    prop_assert!((si * si + co * co - 1.0).abs() < 1e-12);
                    for o in [t.maps.fingertip_offset_x.get(row, col), t.maps.fingertip_offset_y.get(row, col)] {
                        prop_assert!((0.0..1.0).contains(&o));
                    }
                } else {
                    prop_assert_eq!(t.maps.sin.get(row, col), 0.0);
                    prop_assert_eq!(t.maps.fingertip_offset_x.get(row, col), 0.0);
                }
            }
        }
    }

    #[test]
    fn score_decays_away_from_fingertip(
        x in 10.0..20.0f64, y in 10.0..20.0f64, open in 3.0..20.0f64, axis in -3.0..3.0f64,
        h in 1.0..10.0f64, dir in -1.5..1.5f64,
    ) {
        let c1 = Point::new(x, y);
        let u = Point::from_angle(axis);
        let g = Grasp::new(c1, c1 - u * open).unwrap();
        // Directions with a non-negative component away from the other fingertip.
        let d = Point::from_angle(axis + dir);
        let c = LabelConfig::default();
        let mut prev = gaussian_score_at(c1, &[(g, h)], &c).unwrap();
        for step in 1..40 {
            let s = gaussian_score_at(c1 + d * (step as f64 * 0.25), &[(g, h)], &c).unwrap();
            prop_assert!(s <= prev + 1e-15, "step {step}: {s} > {prev}");
            prev = s;
        }
    }

    #[test]
    fn quarter_turn_equivariance(r in inner_rect()) {
        let n = 128;
        let c = cfg(n, 1);
        let a = render_targets(&[r], &c).unwrap();
        let center = Point::new(64.0, 64.0);
        let d = r.center - center;
        let rotated = Rect::new(center + Point::new(-d.y, d.x), r.w, r.h, r.theta + FRAC_PI_2).unwrap();
        let b = render_targets(&[rotated], &c).unwrap();
        for row in 0..n {
            for col in 0..n {
                let va = a.maps.fingertip_score.get(row, col);
                let vb = b.maps.fingertip_score.get(col, n - 1 - row);
                prop_assert!((va - vb).abs() < 1e-9, "({row},{col}) {va} vs {vb}");
            }
        }
    }
}

#[test]
fn render_matches_pointwise_evaluation() {
    // Integer fingertip positions make the cell-centered kernels coincide
    // with the pointwise ones.
    let r = Rect::new(Point::new(64.0, 40.0), 24.0, 8.0, 0.0).unwrap();
    let c = cfg(32, 4);
    let t = render_targets(&[r], &c).unwrap();
    let g = rect_to_grasp(&r);
    let map_grasp = Grasp::new(g.c1 / 4.0, g.c2 / 4.0).unwrap();
    for row in 0..32 {
        for col in 0..32 {
            let p = Point::new(col as f64, row as f64);
            let expected = gaussian_score_at(p, &[(map_grasp, 2.0)], &c).unwrap();
            assert!((t.maps.fingertip_score.get(row, col) - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let rects: Vec<Rect> = (0..6)
        .map(|i| Rect::new(Point::new(50.0 + 5.0 * i as f64, 60.0), 20.0, 6.0, 0.3 * i as f64).unwrap())
        .collect();
    let c = cfg(64, 2);
    let single =
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| render_targets(&rects, &c).unwrap());
    let multi =
        rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| render_targets(&rects, &c).unwrap());
    assert_eq!(single, multi);
}

#[test]
fn out_of_bounds_reports_index() {
    let ok = Rect::new(Point::new(20.0, 20.0), 10.0, 4.0, 0.0).unwrap();
    let bad = Rect::new(Point::new(126.0, 20.0), 10.0, 4.0, 0.0).unwrap();
    let err = render_targets(&[ok, bad], &cfg(32, 4)).unwrap_err();
    assert!(matches!(err, LabelError::OutOfBounds { index: 1, .. }), "{err:?}");
}
