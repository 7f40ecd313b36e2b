//! Training objective as a pure numerical oracle, with analytic gradients.
//!
//! The total loss is the unweighted sum of six terms: a penalty-reduced focal
//! loss on each score map, smooth-L1 on fingertip and center offsets at
//! their true cells, and smooth-L1 on the fingertip sine and cosine.

use thiserror::Error;

use crate::labeling::TargetMaps;
use crate::raster::{GraspMaps, Mask, Raster};
use crate::scalar::{pairwise_sum, Real};

/// Clamp margin applied to predicted scores before the focal loss.
pub const SCORE_EPSILON: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("shape mismatch: {what} is {got:?}, expected {expected:?}")]
    ShapeMismatch { what: &'static str, got: (usize, usize), expected: (usize, usize) },
    #[error("predicted score {value} at ({row}, {col}) is outside (0, 1)")]
    ScoreOutOfRange { row: usize, col: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams<T> {
    /// Exponent on the prediction term.
    pub alpha: T,
    /// Exponent on the `(1 - s)` penalty reduction.
    pub beta: T,
    /// Divide by the number of positive cells (at least one).
    pub normalize_by_positives: bool,
}

impl<T: Real> Default for FocalParams<T> {
    fn default() -> Self {
        Self { alpha: T::lit(2.0), beta: T::lit(4.0), normalize_by_positives: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown<T> {
    pub l_det_con: T,
    pub l_det_cen: T,
    pub l_off_con: T,
    pub l_off_cen: T,
    pub l_ori_sin: T,
    pub l_ori_cos: T,
    pub total: T,
}

impl<T: Real> LossBreakdown<T> {
    /// Fills `total` with the plain sum of the six terms.
    pub fn from_terms(terms: [T; 6]) -> Self {
        let [l_det_con, l_det_cen, l_off_con, l_off_cen, l_ori_sin, l_ori_cos] = terms;
        Self {
            l_det_con,
            l_det_cen,
            l_off_con,
            l_off_cen,
            l_ori_sin,
            l_ori_cos,
            total: l_det_con + l_det_cen + l_off_con + l_off_cen + l_ori_sin + l_ori_cos,
        }
    }

    /// `[l_det_con, l_det_cen, l_off_con, l_off_cen, l_ori_sin, l_ori_cos]`.
    pub fn terms(&self) -> [T; 6] {
        [self.l_det_con, self.l_det_cen, self.l_off_con, self.l_off_cen, self.l_ori_sin, self.l_ori_cos]
    }
}

pub fn smooth_l1<T: Real>(d: T) -> T {
    let a = d.abs();
    if a < T::one() {
        T::lit(0.5) * d * d
    } else {
        a - T::lit(0.5)
    }
}

pub fn smooth_l1_derivative<T: Real>(d: T) -> T {
    if d.abs() < T::one() {
        d
    } else {
        d.signum()
    }
}

fn check_shape<T>(what: &'static str, r: &Raster<T>, expected: (usize, usize)) -> Result<(), LossError>
where
    T: Copy,
{
    if r.shape() != expected {
        return Err(LossError::ShapeMismatch { what, got: r.shape(), expected });
    }
    Ok(())
}

fn is_positive<T: Real>(s: T) -> bool {
    s == T::one()
}

fn focal_normalizer<T: Real>(target: &Raster<T>, params: &FocalParams<T>) -> T {
    if params.normalize_by_positives {
        let n = target.as_slice().iter().filter(|&&s| is_positive(s)).count();
        T::from_usize(n.max(1)).unwrap()
    } else {
        T::one()
    }
}

#[inline]
fn focal_cell<T: Real>(q: T, s: T, p: &FocalParams<T>) -> T {
    if is_positive(s) {
        -(T::one() - q).powf(p.alpha) * q.ln()
    } else {
        -(T::one() - s).powf(p.beta) * q.powf(p.alpha) * (T::one() - q).ln()
    }
}

#[inline]
fn focal_cell_derivative<T: Real>(q: T, s: T, p: &FocalParams<T>) -> T {
    let one = T::one();
    if is_positive(s) {
        // d/dq[-(1-q)^α ln q]
        let lead = if p.alpha == T::zero() { T::zero() } else { p.alpha * (one - q).powf(p.alpha - one) * q.ln() };
        lead - (one - q).powf(p.alpha) / q
    } else {
        // d/dq[-(1-s)^β q^α ln(1-q)]
        let w = (one - s).powf(p.beta);
        let lead = if p.alpha == T::zero() { T::zero() } else { p.alpha * q.powf(p.alpha - one) * (one - q).ln() };
        -w * (lead - q.powf(p.alpha) / (one - q))
    }
}

/// Penalty-reduced focal loss summed over all cells.
///
/// Every prediction must lie strictly inside `(0, 1)`; use
/// [`clamp_scores`] first when that is not guaranteed.
pub fn focal_loss<T: Real>(pred: &Raster<T>, target: &Raster<T>, params: &FocalParams<T>) -> Result<T, LossError> {
    check_shape("target", target, pred.shape())?;
    let w = pred.width();
    let mut terms = Vec::with_capacity(pred.as_slice().len());
    for (i, (&q, &s)) in pred.as_slice().iter().zip(target.as_slice()).enumerate() {
        if !(q > T::zero() && q < T::one()) {
            return Err(LossError::ScoreOutOfRange { row: i / w, col: i % w, value: q.as_f64() });
        }
        terms.push(focal_cell(q, s, params));
    }
    Ok(pairwise_sum(&terms) / focal_normalizer(target, params))
}

/// Clamps scores into `[ε, 1 − ε]` with ε = [`SCORE_EPSILON`].
pub fn clamp_scores<T: Real>(r: &Raster<T>) -> Raster<T> {
    let eps = T::lit(SCORE_EPSILON);
    r.map(|q| q.max(eps).min(T::one() - eps))
}

fn masked_smooth_l1<T: Real>(pred: &Raster<T>, target: &Raster<T>, mask: &Mask) -> T {
    let terms: Vec<T> = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|((&p, &t), _)| smooth_l1(p - t))
        .collect();
    pairwise_sum(&terms)
}

/// Smooth-L1 of both offset coordinates over the masked cells.
pub fn offset_loss<T: Real>(
    pred: (&Raster<T>, &Raster<T>),
    target: (&Raster<T>, &Raster<T>),
    mask: &Mask,
) -> Result<T, LossError> {
    let shape = mask.shape();
    check_shape("pred_offset_x", pred.0, shape)?;
    check_shape("pred_offset_y", pred.1, shape)?;
    check_shape("target_offset_x", target.0, shape)?;
    check_shape("target_offset_y", target.1, shape)?;
    Ok(masked_smooth_l1(pred.0, target.0, mask) + masked_smooth_l1(pred.1, target.1, mask))
}

/// Returns `(l_sin, l_cos)`.
pub fn orientation_loss<T: Real>(
    pred_sin: &Raster<T>,
    pred_cos: &Raster<T>,
    target_sin: &Raster<T>,
    target_cos: &Raster<T>,
    mask: &Mask,
) -> Result<(T, T), LossError> {
    let shape = mask.shape();
    check_shape("pred_sin", pred_sin, shape)?;
    check_shape("pred_cos", pred_cos, shape)?;
    check_shape("target_sin", target_sin, shape)?;
    check_shape("target_cos", target_cos, shape)?;
    Ok((masked_smooth_l1(pred_sin, target_sin, mask), masked_smooth_l1(pred_cos, target_cos, mask)))
}

fn check_pair<T: Real>(pred: &GraspMaps<T>, target: &TargetMaps<T>) -> Result<(), LossError> {
    let shape = target.maps.shape();
    for (name, ch) in crate::raster::CHANNEL_NAMES.iter().zip(pred.channels()) {
        check_shape(name, ch, shape)?;
    }
    check_shape("fingertip_mask", &target.fingertip_mask, shape)?;
    check_shape("center_mask", &target.center_mask, shape)?;
    Ok(())
}

/// All six terms and their sum. Predicted scores are clamped into
/// `[ε, 1 − ε]` before the focal terms.
pub fn total_loss<T: Real>(
    pred: &GraspMaps<T>,
    target: &TargetMaps<T>,
    params: &FocalParams<T>,
) -> Result<LossBreakdown<T>, LossError> {
    check_pair(pred, target)?;
    let t = &target.maps;
    let l_det_con = focal_loss(&clamp_scores(&pred.fingertip_score), &t.fingertip_score, params)?;
    let l_det_cen = focal_loss(&clamp_scores(&pred.center_score), &t.center_score, params)?;
    let l_off_con = offset_loss(
        (&pred.fingertip_offset_x, &pred.fingertip_offset_y),
        (&t.fingertip_offset_x, &t.fingertip_offset_y),
        &target.fingertip_mask,
    )?;
    let l_off_cen = offset_loss(
        (&pred.center_offset_x, &pred.center_offset_y),
        (&t.center_offset_x, &t.center_offset_y),
        &target.center_mask,
    )?;
    let (l_ori_sin, l_ori_cos) = orientation_loss(&pred.sin, &pred.cos, &t.sin, &t.cos, &target.fingertip_mask)?;
    Ok(LossBreakdown::from_terms([l_det_con, l_det_cen, l_off_con, l_off_cen, l_ori_sin, l_ori_cos]))
}

fn focal_gradient<T: Real>(pred: &Raster<T>, target: &Raster<T>, params: &FocalParams<T>) -> Raster<T> {
    let norm = focal_normalizer(target, params);
    let eps = T::lit(SCORE_EPSILON);
    let data = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&q, &s)| {
            let qc = q.max(eps).min(T::one() - eps);
            focal_cell_derivative(qc, s, params) / norm
        })
        .collect();
    Raster::from_vec(pred.height(), pred.width(), data)
}

fn smooth_l1_gradient<T: Real>(pred: &Raster<T>, target: &Raster<T>, mask: &Mask) -> Raster<T> {
    let data = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .zip(mask.as_slice())
        .map(|((&p, &t), &m)| if m { smooth_l1_derivative(p - t) } else { T::zero() })
        .collect();
    Raster::from_vec(pred.height(), pred.width(), data)
}

/// Partial derivatives of [`total_loss`] with respect to every prediction
/// channel, laid out like the prediction itself.
///
/// Scores are differentiated at their clamped value.
pub fn loss_gradients<T: Real>(
    pred: &GraspMaps<T>,
    target: &TargetMaps<T>,
    params: &FocalParams<T>,
) -> Result<GraspMaps<T>, LossError> {
    check_pair(pred, target)?;
    let t = &target.maps;
    let fm = &target.fingertip_mask;
    let cm = &target.center_mask;
    Ok(GraspMaps {
        fingertip_score: focal_gradient(&pred.fingertip_score, &t.fingertip_score, params),
        center_score: focal_gradient(&pred.center_score, &t.center_score, params),
        fingertip_offset_x: smooth_l1_gradient(&pred.fingertip_offset_x, &t.fingertip_offset_x, fm),
        fingertip_offset_y: smooth_l1_gradient(&pred.fingertip_offset_y, &t.fingertip_offset_y, fm),
        center_offset_x: smooth_l1_gradient(&pred.center_offset_x, &t.center_offset_x, cm),
        center_offset_y: smooth_l1_gradient(&pred.center_offset_y, &t.center_offset_y, cm),
        sin: smooth_l1_gradient(&pred.sin, &t.sin, fm),
        cos: smooth_l1_gradient(&pred.cos, &t.cos, fm),
    })
}
