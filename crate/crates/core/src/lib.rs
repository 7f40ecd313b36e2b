//! Double-dot antipodal grasp detection.
//!
//! A grasp is a pair of fingertip contact points. The crate covers the
//! pieces around a keypoint network: rendering training targets from
//! oriented-rectangle annotations ([`labeling`]), the training losses and
//! their gradients ([`losses`]), grouping predicted keypoints into grasps
//! ([`decode`]), evaluation ([`metrics`]), a 2D polygon grasp simulator
//! ([`sim`]) and file formats ([`io`]).
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `F32` variants for the map types.
//!
//! ```
//! use ddgrasp::{decode, render_targets, DecodeConfig, LabelConfig, Point, Rect};
//!
//! let rect = Rect::new(Point::new(64.0, 64.0), 24.0, 10.0, 0.0).unwrap();
//! let targets = render_targets(&[rect], &LabelConfig::default()).unwrap();
//! let best = decode(&targets.maps, &DecodeConfig::default()).unwrap();
//! assert!((best[0].grasp.opening() - 24.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decode;
pub mod geometry;
pub mod io;
pub mod labeling;
pub mod losses;
pub mod metrics;
pub mod pipeline;
pub mod polygon;
pub mod raster;
pub mod scalar;
pub mod sim;

pub use decode::{decode, DecodeConfig, DecodeError, GraspCandidate, KeyPoint};
pub use geometry::{
    fingertip_orientation, grasp_axis_angle, grasp_to_rect, rect_to_grasp, DoubleDotGrasp, GeometryError, OrientedRect,
    Point2, RigidTransform, Rotation2,
};
pub use io::FormatError;
pub use labeling::{render_targets, LabelConfig, LabelError, TargetMaps};
pub use losses::{loss_gradients, total_loss, FocalParams, LossBreakdown, LossError};
pub use metrics::{double_dot_error, oriented_iou, rectangle_match, EvalReport, MetricsError, RectMetricConfig};
pub use raster::{GraspMaps, Mask, Raster};
pub use scalar::Real;
pub use sim::{
    execute_grasp, generate_scene, gt_grasps, GraspOutcome, GripperModel, PolygonScene, SceneParams, SimError,
};

pub type Point = Point2<f64>;
pub type Grasp = DoubleDotGrasp<f64>;
pub type Rect = OrientedRect<f64>;
pub type Maps = GraspMaps<f64>;
pub type MapsF32 = GraspMaps<f32>;
pub type Scene = PolygonScene<f64>;
pub type Candidate = GraspCandidate<f64>;
