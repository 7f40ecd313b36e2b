use std::f64::consts::PI;

use ddgrasp::polygon::is_simple;
use ddgrasp::sim::{execute_in_clutter, run_trials, FailureReason, OracleSource};
use ddgrasp::{
    execute_grasp, generate_scene, gt_grasps, Grasp, GraspOutcome, GripperModel, Point, RigidTransform, Scene,
    SceneParams,
};
use proptest::prelude::*;

fn scene(seed: u64) -> Scene {
    generate_scene(seed, &SceneParams::default()).unwrap()
}

fn near_grasp() -> impl Strategy<Value = Grasp> {
    (80.0..176.0f64, 80.0..176.0f64, 4.0..80.0f64, 0.0..PI).prop_map(|(x, y, w, t)| {
        let c = Point::new(x, y);
        let u = Point::from_angle(t) * (w / 2.0);
        Grasp::new(c + u, c - u).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_scenes_are_simple(seed in any::<u64>()) {
        let s = scene(seed);
        prop_assert!(is_simple(s.vertices()));
        prop_assert!((5..=9).contains(&s.vertices().len()));
    }

    #[test]
    fn oracle_grasps_succeed(seed in 0u64..100_000) {
        let s = scene(seed);
        let gripper = GripperModel::default();
        for g in gt_grasps(&s, &gripper) {
            prop_assert_eq!(execute_grasp(&s, &g, &gripper), GraspOutcome::Success);
        }
    }

    #[test]
    fn outcome_is_rigid_invariant(seed in 0u64..10_000, g in near_grasp(), t in -PI..PI, x in -100.0..100.0f64, y in -100.0..100.0f64) {
        let s = scene(seed);
        let gripper = GripperModel::default();
        let tf = RigidTransform::new(t, Point::new(x, y));
        prop_assert_eq!(
            execute_grasp(&s, &g, &gripper).is_success(),
            execute_grasp(&s.transformed(&tf), &g.transformed(&tf), &gripper).is_success()
        );
    }

    #[test]
    fn outcome_ignores_fingertip_order(seed in 0u64..10_000, g in near_grasp()) {
        let s = scene(seed);
        let gripper = GripperModel::default();
        prop_assert_eq!(execute_grasp(&s, &g, &gripper), execute_grasp(&s, &g.swapped(), &gripper));
    }

    #[test]
    fn fingertips_inside_collide(seed in 0u64..10_000, i in 0usize..5, t1 in 0.1..0.6f64, t2 in 0.1..0.6f64) {
        let s = scene(seed);
        let c = Point::new(128.0, 128.0);
        let v = s.vertices();
        let a = c + (v[i] - c) * t1;
        let b = c + (v[(i + 2) % v.len()] - c) * t2;
        let g = Grasp::new(a, b).unwrap();
        prop_assert_eq!(
            execute_grasp(&s, &g, &GripperModel::default()),
            GraspOutcome::Failure(FailureReason::Collision)
        );
    }
}

#[test]
fn oracle_trials_are_deterministic_and_perfect() {
    let gripper = GripperModel::<f64>::default();
    let source = OracleSource { gripper };
    let a = run_trials(0..64, &SceneParams::default(), &source, &gripper).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_trials(0..64, &SceneParams::default(), &source, &gripper).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.success_rate(), 1.0);
}

#[test]
fn contacts_on_different_objects_fail() {
    let gripper = GripperModel::default();
    let left = generate_scene::<f64>(1, &SceneParams { center: (60.0, 128.0), ..SceneParams::default() }).unwrap();
    let right = generate_scene::<f64>(2, &SceneParams { center: (130.0, 128.0), ..SceneParams::default() }).unwrap();
    // Spans the gap between the objects, closing onto one face of each.
    let g = Grasp::new(Point::new(30.0, 128.0), Point::new(160.0, 128.0)).unwrap();
    let wide = GripperModel { max_opening: 200.0, ..gripper };
    let outcome = execute_in_clutter(&[&left, &right], &g, &wide);
    assert_eq!(outcome, GraspOutcome::Failure(FailureReason::NoContact));
}
