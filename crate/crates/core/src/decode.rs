//! Grasp inference from predicted maps.
//!
//! 1. Take the top-k local maxima of the fingertip and center score maps.
//! 2. Refine each to input-image coordinates with its predicted offset.
//! 3. Enumerate every unordered fingertip pair and drop pairs whose opening
//!    is out of bounds, whose predicted orientations do not point at each
//!    other (orientation matching), or whose midpoint region holds no
//!    center keypoint (center matching).
//! 4. Score survivors by the sum of the three keypoint scores and rank.

use thiserror::Error;

use crate::geometry::{angular_distance, DoubleDotGrasp, Point2};
use crate::raster::{GraspMaps, Raster};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("empty score map")]
    EmptyMap,
    #[error("offset maps do not match the score map shape")]
    ShapeMismatch,
    #[error("invalid decode config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig<T> {
    pub top_k: usize,
    /// Input pixels per map cell.
    pub stride: usize,
    /// Inclusive opening bounds in input pixels.
    pub min_opening: T,
    pub max_opening: T,
    /// Largest accepted deviation of a predicted fingertip orientation.
    pub orientation_tolerance: T,
    /// Center region radius as a fraction of the opening.
    pub center_radius_factor: T,
    /// Side of the square non-maximum suppression window.
    pub nms_window: usize,
    pub orientation_matching: bool,
    pub center_matching: bool,
}

impl<T: Real> Default for DecodeConfig<T> {
    fn default() -> Self {
        Self {
            top_k: 70,
            stride: 4,
            min_opening: T::lit(2.0),
            max_opening: T::lit(70.0),
            orientation_tolerance: T::FRAC_PI_6(),
            center_radius_factor: T::one() / T::lit(3.0),
            nms_window: 3,
            orientation_matching: true,
            center_matching: true,
        }
    }
}

impl<T: Real> DecodeConfig<T> {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.top_k < 2 {
            return Err(DecodeError::Config("top_k must be at least 2"));
        }
        if self.stride == 0 {
            return Err(DecodeError::Config("stride must be >= 1"));
        }
        if !(self.min_opening > T::zero() && self.min_opening < self.max_opening) {
            return Err(DecodeError::Config("opening bounds must satisfy 0 < min < max"));
        }
        if !(self.orientation_tolerance > T::zero() && self.orientation_tolerance < T::FRAC_PI_2()) {
            return Err(DecodeError::Config("orientation tolerance must lie in (0, pi/2)"));
        }
        if !(self.center_radius_factor > T::zero()) {
            return Err(DecodeError::Config("center radius factor must be positive"));
        }
        if self.nms_window == 0 || self.nms_window.is_multiple_of(2) {
            return Err(DecodeError::Config("nms window must be odd and >= 1"));
        }
        Ok(())
    }
}

/// A detected fingertip or center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPoint<T> {
    pub row: usize,
    pub col: usize,
    /// Input-image position: `(cell + offset) · stride`.
    pub refined: Point2<T>,
    pub score: T,
    /// Predicted direction toward the grasp center (fingertips only).
    pub orientation: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspCandidate<T> {
    pub grasp: DoubleDotGrasp<T>,
    pub fingertips: [KeyPoint<T>; 2],
    /// `None` only when center matching is disabled.
    pub center_used: Option<KeyPoint<T>>,
    pub score: T,
}

fn is_local_max<T: Real>(score: &Raster<T>, row: usize, col: usize, radius: usize) -> bool {
    let v = score.get(row, col);
    let (h, w) = score.shape();
    let r0 = row.saturating_sub(radius);
    let c0 = col.saturating_sub(radius);
    for r in r0..=(row + radius).min(h - 1) {
        for c in c0..=(col + radius).min(w - 1) {
            if (r, c) == (row, col) {
                continue;
            }
            let u = score.get(r, c);
            // Plateaus keep only their first cell in row-major order.
            let earlier = (r, c) < (row, col);
            if u > v || (u == v && earlier) {
                return false;
            }
        }
    }
    true
}

/// Top `k` positive local maxima of `score`, refined by the offset maps.
///
/// Ordered by descending score, ties in row-major order.
pub fn extract_peaks<T: Real>(
    score: &Raster<T>,
    offsets: (&Raster<T>, &Raster<T>),
    k: usize,
    stride: usize,
    nms_window: usize,
) -> Result<Vec<KeyPoint<T>>, DecodeError> {
    let (h, w) = score.shape();
    if h == 0 || w == 0 {
        return Err(DecodeError::EmptyMap);
    }
    if offsets.0.shape() != (h, w) || offsets.1.shape() != (h, w) {
        return Err(DecodeError::ShapeMismatch);
    }
    if k == 0 {
        return Err(DecodeError::Config("k must be at least 1"));
    }
    if nms_window == 0 || nms_window.is_multiple_of(2) {
        return Err(DecodeError::Config("nms window must be odd and >= 1"));
    }
    let radius = nms_window / 2;
    let n = T::from_usize(stride).unwrap();

    let mut peaks = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let v = score.get(row, col);
            if v > T::zero() && is_local_max(score, row, col, radius) {
                peaks.push((row, col, v));
            }
        }
    }
    // Stable sort keeps row-major order among equal scores.
    peaks.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));
    peaks.truncate(k);

    Ok(peaks
        .into_iter()
        .map(|(row, col, s)| {
            let x = (T::from_usize(col).unwrap() + offsets.0.get(row, col)) * n;
            let y = (T::from_usize(row).unwrap() + offsets.1.get(row, col)) * n;
            KeyPoint { row, col, refined: Point2::new(x, y), score: s, orientation: None }
        })
        .collect())
}

/// True iff each fingertip's predicted orientation points at the pair
/// midpoint within `tolerance`.
pub fn orientation_match<T: Real>(pair: (&KeyPoint<T>, &KeyPoint<T>), tolerance: T) -> bool {
    let (a, b) = pair;
    let mid = a.refined.midpoint(b.refined);
    [a, b].iter().all(|k| {
        let Some(predicted) = k.orientation else {
            return false;
        };
        let toward = mid - k.refined;
        if toward.x == T::zero() && toward.y == T::zero() {
            return false;
        }
        angular_distance(predicted, toward.angle()) <= tolerance
    })
}

/// Highest-scoring center inside the circle of radius
/// `radius_factor · opening` around the pair midpoint.
pub fn center_match<'c, T: Real>(
    pair: (&KeyPoint<T>, &KeyPoint<T>),
    centers: &'c [KeyPoint<T>],
    radius_factor: T,
) -> Option<&'c KeyPoint<T>> {
    let (a, b) = pair;
    let mid = a.refined.midpoint(b.refined);
    let radius = radius_factor * a.refined.distance(b.refined);
    let mut best: Option<&KeyPoint<T>> = None;
    for c in centers {
        if c.refined.distance(mid) <= radius && best.is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
    }
    best
}

/// Ranked grasp candidates, best first. An empty list is a valid outcome.
pub fn decode<T: Real>(maps: &GraspMaps<T>, cfg: &DecodeConfig<T>) -> Result<Vec<GraspCandidate<T>>, DecodeError> {
    cfg.validate()?;
    if !maps.is_consistent() {
        return Err(DecodeError::ShapeMismatch);
    }
    let mut tips = extract_peaks(
        &maps.fingertip_score,
        (&maps.fingertip_offset_x, &maps.fingertip_offset_y),
        cfg.top_k,
        cfg.stride,
        cfg.nms_window,
    )?;
    for t in &mut tips {
        t.orientation = Some(maps.sin.get(t.row, t.col).atan2(maps.cos.get(t.row, t.col)));
    }
    let centers = extract_peaks(
        &maps.center_score,
        (&maps.center_offset_x, &maps.center_offset_y),
        cfg.top_k,
        cfg.stride,
        cfg.nms_window,
    )?;

    let mut out = Vec::new();
    for i in 0..tips.len() {
        for j in (i + 1)..tips.len() {
            let (a, b) = (&tips[i], &tips[j]);
            let opening = a.refined.distance(b.refined);
            if opening < cfg.min_opening || opening > cfg.max_opening {
                continue;
            }
            if cfg.orientation_matching && !orientation_match((a, b), cfg.orientation_tolerance) {
                continue;
            }
            let center_used = if cfg.center_matching {
                match center_match((a, b), &centers, cfg.center_radius_factor) {
                    Some(c) => Some(*c),
                    None => continue,
                }
            } else {
                None
            };
            let score = a.score + b.score + center_used.map_or(T::zero(), |c| c.score);
            out.push(GraspCandidate {
                grasp: DoubleDotGrasp { c1: a.refined, c2: b.refined },
                fingertips: [*a, *b],
                center_used,
                score,
            });
        }
    }
    out.sort_by(|x, y| y.score.partial_cmp(&x.score).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    fn kp(x: f64, y: f64, orientation: Option<f64>, score: f64) -> KeyPoint<f64> {
        KeyPoint { row: 0, col: 0, refined: Point2::new(x, y), score, orientation }
    }

    #[test]
    fn single_peak_refined() {
        let mut s = Raster::zeros(8, 8);
        s.set(4, 5, 0.9);
        let ox = Raster::filled(8, 8, 0.5);
        let oy = Raster::filled(8, 8, 0.5);
        let peaks = extract_peaks(&s, (&ox, &oy), 3, 4, 3).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].refined, Point2::new(22.0, 18.0));
        assert_eq!(peaks[0].score, 0.9);
        assert_eq!((peaks[0].row, peaks[0].col), (4, 5));
    }

    #[test]
    fn zero_map_has_no_peaks() {
        let z = Raster::<f64>::zeros(5, 5);
        assert!(extract_peaks(&z, (&z, &z), 3, 4, 3).unwrap().is_empty());
    }

    #[test]
    fn adjacent_lower_cell_suppressed() {
        let mut s = Raster::zeros(5, 5);
        s.set(2, 2, 0.9);
        s.set(2, 3, 0.8);
        let z = Raster::zeros(5, 5);
        let peaks = extract_peaks(&s, (&z, &z), 5, 1, 3).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].row, peaks[0].col), (2, 2));
        // Without suppression both survive.
        assert_eq!(extract_peaks(&s, (&z, &z), 5, 1, 1).unwrap().len(), 2);
    }

    #[test]
    fn plateau_yields_one_peak() {
        let mut s = Raster::zeros(5, 5);
        s.set(2, 2, 1.0);
        s.set(2, 3, 1.0);
        let z = Raster::zeros(5, 5);
        let peaks = extract_peaks(&s, (&z, &z), 5, 1, 3).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].row, peaks[0].col), (2, 2));
    }

    #[test]
    fn ties_ranked_row_major() {
        let mut s = Raster::zeros(6, 6);
        s.set(4, 1, 0.5);
        s.set(1, 4, 0.5);
        s.set(0, 0, 0.7);
        let z = Raster::zeros(6, 6);
        let peaks = extract_peaks(&s, (&z, &z), 2, 1, 3).unwrap();
        assert_eq!((peaks[0].row, peaks[0].col), (0, 0));
        assert_eq!((peaks[1].row, peaks[1].col), (1, 4));
    }

    #[test]
    fn empty_map_is_error() {
        let z = Raster::<f64>::zeros(0, 0);
        assert_eq!(extract_peaks(&z, (&z, &z), 3, 4, 3), Err(DecodeError::EmptyMap));
    }

    #[test]
    fn orientation_match_examples() {
        let a = kp(0.0, 0.0, Some(0.1), 1.0);
        let b = kp(4.0, 0.0, Some(PI - 0.05), 1.0);
        assert!(orientation_match((&a, &b), FRAC_PI_6));

        let a = kp(0.0, 0.0, Some(FRAC_PI_2), 1.0);
        let b = kp(4.0, 0.0, Some(PI), 1.0);
        assert!(!orientation_match((&a, &b), FRAC_PI_6));

        let a = kp(1.0, 1.0, Some(FRAC_PI_2 / 2.0), 1.0);
        let b = kp(3.0, 3.0, Some(-3.0 * FRAC_PI_2 / 2.0), 1.0);
        assert!(orientation_match((&a, &b), 1e-9));
    }

    #[test]
    fn orientation_wraps_across_pi() {
        let a = kp(4.0, 0.0, Some(-PI + 0.05), 1.0);
        let b = kp(0.0, 0.0, Some(0.0), 1.0);
        assert!(orientation_match((&a, &b), 0.1));
    }

    #[test]
    fn center_match_examples() {
        let a = kp(0.0, 0.0, None, 1.0);
        let b = kp(6.0, 0.0, None, 1.0);
        let third = 1.0 / 3.0;
        let inside = [kp(4.0, 0.5, None, 0.7)];
        assert_eq!(center_match((&a, &b), &inside, third).unwrap().refined, Point2::new(4.0, 0.5));
        let outside = [kp(3.0, 2.5, None, 0.7)];
        assert!(center_match((&a, &b), &outside, third).is_none());
        let exact = [kp(3.0, 0.0, None, 0.1)];
        assert!(center_match((&a, &b), &exact, third).is_some());
    }

    #[test]
    fn center_match_prefers_highest_score() {
        let a = kp(0.0, 0.0, None, 1.0);
        let b = kp(6.0, 0.0, None, 1.0);
        let cs = [kp(3.0, 0.0, None, 0.4), kp(3.5, 0.0, None, 0.9), kp(2.5, 0.0, None, 0.9)];
        assert_eq!(center_match((&a, &b), &cs, 1.0 / 3.0).unwrap().refined.x, 3.5);
    }

    #[test]
    fn all_zero_maps_decode_to_nothing() {
        let m = GraspMaps::<f64>::zeros(16, 16);
        assert!(decode(&m, &DecodeConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn config_validation() {
        let base = DecodeConfig::<f64>::default();
        assert!(base.validate().is_ok());
        assert!(DecodeConfig { top_k: 1, ..base }.validate().is_err());
        assert!(DecodeConfig { nms_window: 2, ..base }.validate().is_err());
        assert!(DecodeConfig { min_opening: 80.0, ..base }.validate().is_err());
        assert!(DecodeConfig { orientation_tolerance: FRAC_PI_2, ..base }.validate().is_err());
    }
}
