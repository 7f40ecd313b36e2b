//! Grasp quality metrics: the rectangle metric (IoU plus axis angle) and a
//! fingertip distance metric.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{axis_angle_difference, grasp_axis_angle, DoubleDotGrasp, OrientedRect};
use crate::polygon::{area, clip_convex};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no ground-truth rectangles to match against")]
    EmptyGroundTruth,
    #[error("invalid metric config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectMetricConfig<T> {
    /// A match needs IoU strictly above this.
    pub iou_threshold: T,
    /// A match needs axis difference at most this (radians).
    pub angle_threshold: T,
}

impl<T: Real> Default for RectMetricConfig<T> {
    fn default() -> Self {
        Self { iou_threshold: T::lit(0.25), angle_threshold: T::FRAC_PI_6() }
    }
}

impl<T: Real> RectMetricConfig<T> {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.iou_threshold > T::zero() && self.iou_threshold <= T::one()) {
            return Err(MetricsError::Config("iou threshold must lie in (0, 1]"));
        }
        if !(self.angle_threshold > T::zero() && self.angle_threshold <= T::FRAC_PI_2()) {
            return Err(MetricsError::Config("angle threshold must lie in (0, pi/2]"));
        }
        Ok(())
    }
}

/// Exact intersection-over-union of two oriented rectangles.
pub fn oriented_iou<T: Real>(a: &OrientedRect<T>, b: &OrientedRect<T>) -> T {
    let inter = area(&clip_convex(&a.corners(), &b.corners()));
    if !(inter > T::zero()) {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// Best IoU among ground truths whose axis is within the angle threshold,
/// paired with that ground truth's angle error.
fn best_match<T: Real>(pred: &OrientedRect<T>, gts: &[OrientedRect<T>], cfg: &RectMetricConfig<T>) -> (bool, T, T) {
    let mut matched = false;
    let mut best_iou = T::zero();
    let mut best_angle = T::FRAC_PI_2();
    for gt in gts {
        let iou = oriented_iou(pred, gt);
        let angle = axis_angle_difference(pred.theta, gt.theta);
        let ok = iou > cfg.iou_threshold && angle <= cfg.angle_threshold;
        let better = (ok && !matched) || (ok == matched && iou > best_iou);
        if better {
            best_iou = iou;
            best_angle = angle;
        }
        matched |= ok;
    }
    (matched, best_iou, best_angle)
}

/// True iff some ground truth has IoU above the threshold and an axis
/// within the angle threshold.
pub fn rectangle_match<T: Real>(
    pred: &OrientedRect<T>,
    gts: &[OrientedRect<T>],
    cfg: &RectMetricConfig<T>,
) -> Result<bool, MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    Ok(best_match(pred, gts, cfg).0)
}

/// `(max fingertip distance under the better assignment, axis angle error)`.
pub fn double_dot_error<T: Real>(pred: &DoubleDotGrasp<T>, gt: &DoubleDotGrasp<T>) -> (T, T) {
    let direct = pred.c1.distance(gt.c1).max(pred.c2.distance(gt.c2));
    let crossed = pred.c1.distance(gt.c2).max(pred.c2.distance(gt.c1));
    let angle = match (grasp_axis_angle(pred), grasp_axis_angle(gt)) {
        (Ok(a), Ok(b)) => axis_angle_difference(a, b),
        _ => T::zero(),
    };
    (direct.min(crossed), angle)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult<T> {
    pub image_id: String,
    pub success: bool,
    /// `None` when the image had no prediction.
    pub best_iou: Option<T>,
    pub angle_error: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub n_images: usize,
    pub n_success: usize,
    pub accuracy: T,
    pub per_image: Vec<ImageResult<T>>,
    /// Images without any prediction (counted as failures).
    pub missing: Vec<String>,
}

impl<T: Real> EvalReport<T> {
    /// Machine-readable `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = format!(
            "n_images={}\nn_success={}\naccuracy={:.6}\nmissing={}\n",
            self.n_images,
            self.n_success,
            self.accuracy.as_f64(),
            self.missing.len()
        );
        for r in &self.per_image {
            let fmt = |v: Option<T>| v.map_or_else(|| "nan".to_string(), |v| format!("{:.6}", v.as_f64()));
            s.push_str(&format!(
                "image={} success={} best_iou={} angle_error_deg={}\n",
                r.image_id,
                r.success as u8,
                fmt(r.best_iou),
                fmt(r.angle_error.map(|a| a.to_degrees())),
            ));
        }
        s
    }
}

/// Top-prediction rectangle metric over a set of images.
///
/// `preds` maps image id to its single top prediction (`None` when the
/// detector produced nothing). Every image in `gts` is scored; ids absent
/// from `preds` are reported as missing and count as failures.
pub fn evaluate<T: Real>(
    preds: &BTreeMap<String, Option<OrientedRect<T>>>,
    gts: &BTreeMap<String, Vec<OrientedRect<T>>>,
    cfg: &RectMetricConfig<T>,
) -> Result<EvalReport<T>, MetricsError> {
    cfg.validate()?;
    let mut per_image = Vec::with_capacity(gts.len());
    let mut missing = Vec::new();
    for (id, gt) in gts {
        let result = match preds.get(id) {
            None => {
                missing.push(id.clone());
                ImageResult { image_id: id.clone(), success: false, best_iou: None, angle_error: None }
            }
            Some(None) => ImageResult { image_id: id.clone(), success: false, best_iou: None, angle_error: None },
            Some(Some(pred)) => {
                if gt.is_empty() {
                    return Err(MetricsError::EmptyGroundTruth);
                }
                let (success, iou, angle) = best_match(pred, gt, cfg);
                ImageResult { image_id: id.clone(), success, best_iou: Some(iou), angle_error: Some(angle) }
            }
        };
        per_image.push(result);
    }
    let n_images = per_image.len();
    let n_success = per_image.iter().filter(|r| r.success).count();
    let accuracy =
        if n_images == 0 { T::zero() } else { T::from_usize(n_success).unwrap() / T::from_usize(n_images).unwrap() };
    Ok(EvalReport { n_images, n_success, accuracy, per_image, missing })
}
