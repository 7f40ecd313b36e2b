//! Ground-truth target maps from grasp rectangles.
//!
//! Every fingertip spreads an anisotropic Gaussian over the fingertip score
//! map: narrow (`sigma_x`) along the grasp axis, wide (`sigma_y_factor · h`)
//! along the plate. Centers spread an isotropic Gaussian of width `sigma_x`.
//! Contributions are summed and clamped at 1. Offsets and orientations are
//! written only at the cell that contains each true point.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    fingertip_orientation, grasp_axis_angle, rect_to_grasp, DoubleDotGrasp, OrientedRect, Point2, Rotation2,
};
use crate::raster::{GraspMaps, Mask};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("grasp {index} lies outside the {height}x{width} map")]
    OutOfBounds { index: usize, height: usize, width: usize },
    #[error("grasp {index}: jaw size must be positive")]
    NonPositiveJaw { index: usize },
    #[error("grasp {index}: zero opening")]
    ZeroOpening { index: usize },
    #[error("invalid label config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig<T> {
    pub map_height: usize,
    pub map_width: usize,
    /// Input pixels per map cell.
    pub stride: usize,
    /// Spread along the grasp axis, in map cells.
    pub sigma_x: T,
    /// Spread along the plate as a multiple of the jaw size.
    pub sigma_y_factor: T,
    /// Drop the `1/(σx·σy)` amplitude so every peak equals 1.
    pub peak_normalized: bool,
    /// Use `exp(-½·d²)` instead of `exp(-d²)`.
    pub half_exponent: bool,
}

impl<T: Real> Default for LabelConfig<T> {
    fn default() -> Self {
        Self {
            map_height: 128,
            map_width: 128,
            stride: 4,
            sigma_x: T::one(),
            sigma_y_factor: T::lit(0.75),
            peak_normalized: true,
            half_exponent: false,
        }
    }
}

impl<T: Real> LabelConfig<T> {
    pub fn validate(&self) -> Result<(), LabelError> {
        if self.map_height == 0 || self.map_width == 0 {
            return Err(LabelError::Config("map dimensions must be positive"));
        }
        if self.stride == 0 {
            return Err(LabelError::Config("stride must be >= 1"));
        }
        if !(self.sigma_x > T::zero()) {
            return Err(LabelError::Config("sigma_x must be positive"));
        }
        if !(self.sigma_y_factor > T::zero()) {
            return Err(LabelError::Config("sigma_y_factor must be positive"));
        }
        Ok(())
    }

    fn exponent_factor(&self) -> T {
        if self.half_exponent {
            T::lit(0.5)
        } else {
            T::one()
        }
    }
}

/// Rendered targets plus the cells at which regression targets exist.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps<T> {
    pub maps: GraspMaps<T>,
    /// Cells holding a fingertip offset and orientation target.
    pub fingertip_mask: Mask,
    /// Cells holding a center offset target.
    pub center_mask: Mask,
}

/// One oriented Gaussian bump.
#[derive(Debug, Clone, Copy)]
struct Kernel<T> {
    mean: Point2<T>,
    axis: Rotation2<T>,
    inv_var_x: T,
    inv_var_y: T,
    amplitude: T,
}

impl<T: Real> Kernel<T> {
    fn new(mean: Point2<T>, theta: T, sigma_x: T, sigma_y: T, cfg: &LabelConfig<T>) -> Self {
        let amplitude = if cfg.peak_normalized { T::one() } else { T::one() / (sigma_x * sigma_y) };
        let k = cfg.exponent_factor();
        Self {
            mean,
            axis: Rotation2::new(theta),
            inv_var_x: k / (sigma_x * sigma_x),
            inv_var_y: k / (sigma_y * sigma_y),
            amplitude,
        }
    }

    #[inline]
    fn eval(&self, p: Point2<T>) -> T {
        // Rᵀ(θ)·Q expresses Q in the grasp frame.
        let local = self.axis.apply_inverse(p - self.mean);
        let q = local.x * local.x * self.inv_var_x + local.y * local.y * self.inv_var_y;
        self.amplitude * (-q).exp()
    }
}

fn fingertip_kernels<T: Real>(
    g: &DoubleDotGrasp<T>,
    h: T,
    means: [Point2<T>; 2],
    cfg: &LabelConfig<T>,
) -> Option<[Kernel<T>; 2]> {
    let theta = grasp_axis_angle(g).ok()?;
    let sigma_y = cfg.sigma_y_factor * h;
    Some(means.map(|m| Kernel::new(m, theta, cfg.sigma_x, sigma_y, cfg)))
}

/// Fingertip score at `p` from every fingertip of `grasps`, clamped to 1.
///
/// Grasps and `p` share one coordinate frame; the jaw size `h` is in that
/// frame's units.
pub fn gaussian_score_at<T: Real>(
    p: Point2<T>,
    grasps: &[(DoubleDotGrasp<T>, T)],
    cfg: &LabelConfig<T>,
) -> Result<T, LabelError> {
    let mut sum = T::zero();
    for (index, (g, h)) in grasps.iter().enumerate() {
        if !(*h > T::zero()) {
            return Err(LabelError::NonPositiveJaw { index });
        }
        let kernels = fingertip_kernels(g, *h, [g.c1, g.c2], cfg).ok_or(LabelError::ZeroOpening { index })?;
        for k in &kernels {
            sum = sum + k.eval(p);
        }
    }
    Ok(sum.min(T::one()))
}

/// A true point in map coordinates together with the cell that holds it.
#[derive(Debug, Clone, Copy)]
struct Anchor<T> {
    point: Point2<T>,
    row: usize,
    col: usize,
}

impl<T: Real> Anchor<T> {
    fn cell_point(&self) -> Point2<T> {
        Point2::new(T::from_usize(self.col).unwrap(), T::from_usize(self.row).unwrap())
    }

    fn offset(&self) -> Point2<T> {
        self.point - self.cell_point()
    }
}

fn anchor<T: Real>(input: Point2<T>, cfg: &LabelConfig<T>) -> Option<Anchor<T>> {
    let n = T::from_usize(cfg.stride).unwrap();
    let point = input / n;
    let (fx, fy) = (point.x.floor(), point.y.floor());
    if !(fx >= T::zero() && fy >= T::zero()) {
        return None;
    }
    let (col, row) = (fx.to_usize()?, fy.to_usize()?);
    if row >= cfg.map_height || col >= cfg.map_width {
        return None;
    }
    Some(Anchor { point, row, col })
}

/// Regression target competing for a cell; nearest true point wins, ties go
/// to the earliest writer.
struct CellClaims<T> {
    width: usize,
    best: Vec<Option<(T, usize)>>,
}

impl<T: Real> CellClaims<T> {
    fn new(height: usize, width: usize) -> Self {
        Self { width, best: vec![None; height * width] }
    }

    /// Returns true if `order` now owns the cell.
    fn claim(&mut self, a: &Anchor<T>, order: usize) -> bool {
        let d = a.point.distance(a.cell_point());
        let slot = &mut self.best[a.row * self.width + a.col];
        match slot {
            Some((best_d, _)) if *best_d <= d => false,
            _ => {
                *slot = Some((d, order));
                true
            }
        }
    }
}

fn fill_scores<T: Real>(score: &mut [T], width: usize, kernels: &[Kernel<T>]) {
    score.par_chunks_mut(width).enumerate().for_each(|(row, line)| {
        let y = T::from_usize(row).unwrap();
        for (col, cell) in line.iter_mut().enumerate() {
            let p = Point2::new(T::from_usize(col).unwrap(), y);
            let mut s = T::zero();
            for k in kernels {
                s = s + k.eval(p);
            }
            *cell = s.min(T::one());
        }
    });
}

/// Renders target maps for rectangles given in input-image pixels.
///
/// Gaussians are centered on the cell holding each true point so that every
/// ground-truth cell scores exactly 1 in peak-normalized mode; the sub-cell
/// remainder is carried by the offset channels.
pub fn render_targets<T: Real>(rects: &[OrientedRect<T>], cfg: &LabelConfig<T>) -> Result<TargetMaps<T>, LabelError> {
    cfg.validate()?;
    let (height, width) = (cfg.map_height, cfg.map_width);
    let n = T::from_usize(cfg.stride).unwrap();

    let mut tip_kernels = Vec::with_capacity(rects.len() * 2);
    let mut center_kernels = Vec::with_capacity(rects.len());
    let mut tips = Vec::with_capacity(rects.len());
    let mut centers = Vec::with_capacity(rects.len());

    for (index, r) in rects.iter().enumerate() {
        if !(r.h > T::zero()) {
            return Err(LabelError::NonPositiveJaw { index });
        }
        let g = rect_to_grasp(r);
        let oob = LabelError::OutOfBounds { index, height, width };
        let a1 = anchor(g.c1, cfg).ok_or_else(|| oob.clone())?;
        let a2 = anchor(g.c2, cfg).ok_or_else(|| oob.clone())?;
        let ac = anchor(r.center, cfg).ok_or(oob)?;

        let means = [a1.cell_point(), a2.cell_point()];
        let map_grasp = DoubleDotGrasp { c1: g.c1 / n, c2: g.c2 / n };
        let ks = fingertip_kernels(&map_grasp, r.h / n, means, cfg).ok_or(LabelError::ZeroOpening { index })?;
        tip_kernels.extend_from_slice(&ks);
        center_kernels.push(Kernel::new(ac.cell_point(), T::zero(), cfg.sigma_x, cfg.sigma_x, cfg));

        let o1 = fingertip_orientation(g.c1, r.center).map_err(|_| LabelError::ZeroOpening { index })?;
        let o2 = fingertip_orientation(g.c2, r.center).map_err(|_| LabelError::ZeroOpening { index })?;
        tips.push((a1, o1));
        tips.push((a2, o2));
        centers.push(ac);
    }

    let mut maps = GraspMaps::zeros(height, width);
    fill_scores(maps.fingertip_score.as_mut_slice(), width, &tip_kernels);
    fill_scores(maps.center_score.as_mut_slice(), width, &center_kernels);

    let mut fingertip_mask = Mask::filled(height, width, false);
    let mut claims = CellClaims::new(height, width);
    for (order, (a, orientation)) in tips.iter().enumerate() {
        if claims.claim(a, order) {
            let o = a.offset();
            maps.fingertip_offset_x.set(a.row, a.col, o.x);
            maps.fingertip_offset_y.set(a.row, a.col, o.y);
            maps.sin.set(a.row, a.col, orientation.sin());
            maps.cos.set(a.row, a.col, orientation.cos());
            fingertip_mask.set(a.row, a.col, true);
        }
    }

    let mut center_mask = Mask::filled(height, width, false);
    let mut claims = CellClaims::new(height, width);
    for (order, a) in centers.iter().enumerate() {
        if claims.claim(a, order) {
            let o = a.offset();
            maps.center_offset_x.set(a.row, a.col, o.x);
            maps.center_offset_y.set(a.row, a.col, o.y);
            center_mask.set(a.row, a.col, true);
        }
    }

    Ok(TargetMaps { maps, fingertip_mask, center_mask })
}
