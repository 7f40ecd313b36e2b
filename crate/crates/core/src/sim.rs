//! Desk-scale grasp trials on planar polygons.
//!
//! Objects are simple polygons. A grasp succeeds when both fingertips start
//! clear of every object, the opening fits the gripper, closing each
//! fingertip toward the grasp midpoint meets the same object, and at both
//! contacts the closing direction lies inside the friction cone.

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{DoubleDotGrasp, Point2, RigidTransform};
use crate::polygon::{contains, distance_to_boundary, is_simple, segment_intersection, signed_area};
use crate::scalar::Real;

/// Fingertip clearance beyond the contact point used by [`gt_grasps`].
pub const CONTACT_CLEARANCE: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene parameters: {0}")]
    Params(&'static str),
    #[error("invalid polygon: {0}")]
    Polygon(&'static str),
    #[error("invalid gripper: {0}")]
    Gripper(&'static str),
    #[error("no scenes to run")]
    NoScenes,
}

/// Random star-shaped polygon generator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Jitter of vertex angles and radii, in `[0, 1)`.
    pub irregularity: f64,
    pub center: (f64, f64),
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            min_vertices: 5,
            max_vertices: 9,
            min_radius: 16.0,
            max_radius: 28.0,
            irregularity: 0.4,
            center: (128.0, 128.0),
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.min_vertices < 3 {
            return Err(SimError::Params("at least 3 vertices required"));
        }
        if self.min_vertices > self.max_vertices {
            return Err(SimError::Params("vertex range is empty"));
        }
        if !(self.min_radius > 0.0 && self.min_radius <= self.max_radius && self.max_radius.is_finite()) {
            return Err(SimError::Params("radius range must satisfy 0 < min <= max"));
        }
        if !(0.0..1.0).contains(&self.irregularity) {
            return Err(SimError::Params("irregularity must lie in [0, 1)"));
        }
        // The widest angular gap must stay below a half turn.
        let step = std::f64::consts::TAU / self.min_vertices as f64;
        if step * (1.0 + self.irregularity) >= std::f64::consts::PI {
            return Err(SimError::Params("irregularity too large for the vertex count"));
        }
        if !(self.center.0.is_finite() && self.center.1.is_finite()) {
            return Err(SimError::Params("center must be finite"));
        }
        Ok(())
    }
}

/// A simple polygon with positive signed area.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonScene<T> {
    vertices: Vec<Point2<T>>,
    pub seed: u64,
}

impl<T: Real> PolygonScene<T> {
    pub fn new(vertices: Vec<Point2<T>>, seed: u64) -> Result<Self, SimError> {
        if vertices.len() < 3 {
            return Err(SimError::Polygon("fewer than 3 vertices"));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(SimError::Polygon("non-finite vertex"));
        }
        if !is_simple(&vertices) {
            return Err(SimError::Polygon("self-intersecting"));
        }
        if !(signed_area(&vertices) > T::zero()) {
            return Err(SimError::Polygon("orientation must be counterclockwise with nonzero area"));
        }
        Ok(Self { vertices, seed })
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2<T> {
        let v = &self.vertices;
        let n = v.len();
        let (mut cx, mut cy, mut a2) = (T::zero(), T::zero(), T::zero());
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let c = p.cross(q);
            a2 = a2 + c;
            cx = cx + (p.x + q.x) * c;
            cy = cy + (p.y + q.y) * c;
        }
        let k = T::lit(3.0) * a2;
        Point2::new(cx / k, cy / k)
    }

    /// Rigid motions preserve orientation, so the result stays valid.
    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self { vertices: self.vertices.iter().map(|&p| tf.apply(p)).collect(), seed: self.seed }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point2<T>, Point2<T>) {
        let mut lo = self.vertices[0];
        let mut hi = lo;
        for p in &self.vertices {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    fn edge_normal(&self, i: usize) -> Point2<T> {
        let n = self.vertices.len();
        let d = self.vertices[(i + 1) % n] - self.vertices[i];
        Point2::new(d.y, -d.x).normalized().unwrap_or(Point2::origin())
    }

    /// Outward unit normal of edge `i` (from vertex `i` to `i + 1`).
    pub fn outward_normal(&self, i: usize) -> Point2<T> {
        self.edge_normal(i)
    }

    /// Bisector of the two edge normals adjacent to vertex `i`.
    pub fn vertex_normal(&self, i: usize) -> Point2<T> {
        let n = self.vertices.len();
        let prev = self.edge_normal((i + n - 1) % n);
        let next = self.edge_normal(i);
        (prev + next).normalized().unwrap_or(next)
    }

    /// True iff `p` is neither inside nor on the boundary.
    pub fn strictly_outside(&self, p: Point2<T>) -> bool {
        !contains(&self.vertices, p) && distance_to_boundary(&self.vertices, p) > T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperModel<T> {
    pub min_opening: T,
    pub max_opening: T,
    pub plate_halfwidth: T,
    pub friction_coefficient: T,
}

impl<T: Real> Default for GripperModel<T> {
    fn default() -> Self {
        Self {
            min_opening: T::lit(2.0),
            max_opening: T::lit(70.0),
            plate_halfwidth: T::lit(5.0),
            friction_coefficient: T::lit(0.4),
        }
    }
}

impl<T: Real> GripperModel<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.min_opening > T::zero() && self.min_opening < self.max_opening) {
            return Err(SimError::Gripper("opening bounds must satisfy 0 < min < max"));
        }
        if !(self.friction_coefficient > T::zero()) {
            return Err(SimError::Gripper("friction coefficient must be positive"));
        }
        if !(self.plate_halfwidth > T::zero()) {
            return Err(SimError::Gripper("plate half-width must be positive"));
        }
        Ok(())
    }

    /// Half-angle of the friction cone, `atan μ`.
    pub fn cone_half_angle(&self) -> T {
        self.friction_coefficient.atan()
    }

    /// Full jaw size, `2 · plate_halfwidth`.
    pub fn jaw_size(&self) -> T {
        self.plate_halfwidth + self.plate_halfwidth
    }
}

/// Deterministic random star-shaped polygon.
pub fn generate_scene<T: Real>(seed: u64, params: &SceneParams) -> Result<PolygonScene<T>, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(params.min_vertices..=params.max_vertices);
    let radius = if params.max_radius > params.min_radius {
        rng.gen_range(params.min_radius..params.max_radius)
    } else {
        params.min_radius
    };
    let phase = rng.gen::<f64>() * std::f64::consts::TAU;
    let step = std::f64::consts::TAU / n as f64;
    let irr = params.irregularity;
    let (cx, cy) = params.center;
    let vertices = (0..n)
        .map(|i| {
            let jitter: f64 = rng.gen_range(-1.0..=1.0);
            let shrink: f64 = rng.gen();
            let angle = phase + step * (i as f64 + 0.5 * irr * jitter);
            let r = radius * (1.0 - 0.5 * irr * shrink);
            Point2::new(T::lit(cx + r * angle.cos()), T::lit(cy + r * angle.sin()))
        })
        .collect();
    PolygonScene::new(vertices, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FailureReason {
    Collision,
    Opening,
    NoContact,
    FrictionCone,
}

impl FailureReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Collision => "collision",
            Self::Opening => "opening",
            Self::NoContact => "no_contact",
            Self::FrictionCone => "friction_cone",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspOutcome {
    Success,
    Failure(FailureReason),
}

impl GraspOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Success)
    }
}

impl fmt::Display for GraspOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Success => f.write_str("success"),
            Self::Failure(r) => write!(f, "failure({r})"),
        }
    }
}

/// First boundary point met when sliding from `from` toward `to`.
#[derive(Debug, Clone, Copy)]
struct Contact<T> {
    object: usize,
    inward_normal: Point2<T>,
}

fn first_contact<T: Real>(objects: &[&PolygonScene<T>], from: Point2<T>, to: Point2<T>) -> Option<Contact<T>> {
    let vertex_tol = T::lit(1e-9);
    let mut best: Option<(T, Contact<T>)> = None;
    for (k, obj) in objects.iter().enumerate() {
        let v = obj.vertices();
        let n = v.len();
        for i in 0..n {
            let Some((t, u)) = segment_intersection(from, to, v[i], v[(i + 1) % n]) else {
                continue;
            };
            if best.as_ref().is_some_and(|(bt, _)| *bt <= t) {
                continue;
            }
            let outward = if u <= vertex_tol {
                obj.vertex_normal(i)
            } else if u >= T::one() - vertex_tol {
                obj.vertex_normal((i + 1) % n)
            } else {
                obj.outward_normal(i)
            };
            best = Some((t, Contact { object: k, inward_normal: -outward }));
        }
    }
    best.map(|(_, c)| c)
}

fn within_cone<T: Real>(closing: Point2<T>, inward: Point2<T>, half_angle: T) -> bool {
    let cos = closing.dot(inward).max(-T::one()).min(T::one());
    cos.acos() <= half_angle
}

/// Adjudicates a grasp against several objects at once.
///
/// Each fingertip's contact is the first boundary it meets while closing,
/// whichever object that belongs to; both contacts must be on one object.
pub fn execute_in_clutter<T: Real>(
    objects: &[&PolygonScene<T>],
    grasp: &DoubleDotGrasp<T>,
    gripper: &GripperModel<T>,
) -> GraspOutcome {
    use FailureReason::*;
    if objects.iter().any(|o| !o.strictly_outside(grasp.c1) || !o.strictly_outside(grasp.c2)) {
        return GraspOutcome::Failure(Collision);
    }
    let opening = grasp.opening();
    if !(opening >= gripper.min_opening && opening <= gripper.max_opening) {
        return GraspOutcome::Failure(Opening);
    }
    let mid = grasp.midpoint();
    let (Some(k1), Some(k2)) = (first_contact(objects, grasp.c1, mid), first_contact(objects, grasp.c2, mid)) else {
        return GraspOutcome::Failure(NoContact);
    };
    if k1.object != k2.object {
        return GraspOutcome::Failure(NoContact);
    }
    let half = gripper.cone_half_angle();
    let (Some(d1), Some(d2)) = ((mid - grasp.c1).normalized(), (mid - grasp.c2).normalized()) else {
        return GraspOutcome::Failure(NoContact);
    };
    if within_cone(d1, k1.inward_normal, half) && within_cone(d2, k2.inward_normal, half) {
        GraspOutcome::Success
    } else {
        GraspOutcome::Failure(FrictionCone)
    }
}

/// Adjudicates a grasp on a single object.
pub fn execute_grasp<T: Real>(
    scene: &PolygonScene<T>,
    grasp: &DoubleDotGrasp<T>,
    gripper: &GripperModel<T>,
) -> GraspOutcome {
    execute_in_clutter(&[scene], grasp, gripper)
}

/// Antipodal grasps from opposing edge pairs, best first.
///
/// For every edge pair whose outward normals oppose within twice the cone
/// half-angle, the grasp axis bisects the two inward normals and is sampled
/// at a quarter, half and three quarters of the edges' shared extent across
/// that axis. Fingertips sit [`CONTACT_CLEARANCE`] beyond the contacts.
/// Candidates that fail [`execute_grasp`] are dropped. Ranking prefers
/// midpoints near the centroid, then smaller normal deviation.
pub fn gt_grasps<T: Real>(scene: &PolygonScene<T>, gripper: &GripperModel<T>) -> Vec<DoubleDotGrasp<T>> {
    let v = scene.vertices();
    let n = v.len();
    let cone = gripper.cone_half_angle();
    let eps = T::lit(CONTACT_CLEARANCE);
    let centroid = scene.centroid();
    let mut found: Vec<(T, T, DoubleDotGrasp<T>)> = Vec::new();

    for i in 0..n {
        for j in (i + 1)..n {
            let (ni, nj) = (scene.outward_normal(i), scene.outward_normal(j));
            let Some(axis) = (nj - ni).normalized() else { continue };
            let opposition = (-ni).dot(nj).max(-T::one()).min(T::one()).acos();
            if opposition > cone + cone {
                continue;
            }
            let across = axis.perp();
            let (pi0, pi1) = (v[i], v[(i + 1) % n]);
            let (pj0, pj1) = (v[j], v[(j + 1) % n]);
            let span = |a: Point2<T>, b: Point2<T>| {
                let (sa, sb) = (across.dot(a), across.dot(b));
                (sa.min(sb), sa.max(sb))
            };
            let (ai, bi) = span(pi0, pi1);
            let (aj, bj) = span(pj0, pj1);
            let (lo, hi) = (ai.max(aj), bi.min(bj));
            if !(hi - lo > T::lit(1e-9)) {
                continue;
            }
            let on_edge = |a: Point2<T>, b: Point2<T>, s: T| {
                let denom = across.dot(b - a);
                (denom != T::zero()).then(|| a + (b - a) * ((s - across.dot(a)) / denom))
            };
            for f in [0.5, 0.25, 0.75] {
                let s = lo + (hi - lo) * T::lit(f);
                let (Some(p), Some(q)) = (on_edge(pi0, pi1, s), on_edge(pj0, pj1, s)) else {
                    continue;
                };
                if !((q - p).dot(axis) > T::zero()) {
                    continue;
                }
                let Ok(g) = DoubleDotGrasp::new(p - axis * eps, q + axis * eps) else {
                    continue;
                };
                if execute_grasp(scene, &g, gripper).is_success() {
                    found.push((g.midpoint().distance(centroid), opposition, g));
                }
            }
        }
    }
    found.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    found.into_iter().map(|(_, _, g)| g).collect()
}

/// Anything that proposes one grasp for a scene.
pub trait GraspSource<T>: Sync {
    fn propose(&self, scene: &PolygonScene<T>) -> Option<DoubleDotGrasp<T>>;
}

impl<T, F> GraspSource<T> for F
where
    F: Fn(&PolygonScene<T>) -> Option<DoubleDotGrasp<T>> + Sync,
{
    fn propose(&self, scene: &PolygonScene<T>) -> Option<DoubleDotGrasp<T>> {
        self(scene)
    }
}

/// Proposes the top-ranked [`gt_grasps`] result.
#[derive(Debug, Clone, Copy)]
pub struct OracleSource<T> {
    pub gripper: GripperModel<T>,
}

impl<T: Real> GraspSource<T> for OracleSource<T> {
    fn propose(&self, scene: &PolygonScene<T>) -> Option<DoubleDotGrasp<T>> {
        gt_grasps(scene, &self.gripper).into_iter().next()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Success,
    Failure(FailureReason),
    NoPrediction,
}

impl fmt::Display for TrialOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Success => f.write_str("success"),
            Self::Failure(r) => f.write_str(r.as_str()),
            Self::NoPrediction => f.write_str("no_prediction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub outcomes: Vec<(u64, TrialOutcome)>,
    pub n_success: usize,
    pub friction_coefficient: f64,
}

impl TrialReport {
    pub fn n_scenes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn success_rate(&self) -> f64 {
        self.n_success as f64 / self.outcomes.len() as f64
    }
}

/// Runs the top proposal of `source` on one generated scene per seed.
/// Scenes run in parallel; outcomes are reported in seed order.
pub fn run_trials<T: Real, S: GraspSource<T> + ?Sized>(
    seeds: Range<u64>,
    params: &SceneParams,
    source: &S,
    gripper: &GripperModel<T>,
) -> Result<TrialReport, SimError> {
    if seeds.is_empty() {
        return Err(SimError::NoScenes);
    }
    params.validate()?;
    gripper.validate()?;
    let outcomes: Vec<(u64, TrialOutcome)> = seeds
        .into_par_iter()
        .map(|seed| {
            let scene = generate_scene::<T>(seed, params)?;
            let outcome = match source.propose(&scene) {
                None => TrialOutcome::NoPrediction,
                Some(g) => match execute_grasp(&scene, &g, gripper) {
                    GraspOutcome::Success => TrialOutcome::Success,
                    GraspOutcome::Failure(r) => TrialOutcome::Failure(r),
                },
            };
            Ok((seed, outcome))
        })
        .collect::<Result<_, SimError>>()?;
    let n_success = outcomes.iter().filter(|(_, o)| *o == TrialOutcome::Success).count();
    Ok(TrialReport { outcomes, n_success, friction_coefficient: gripper.friction_coefficient.as_f64() })
}
