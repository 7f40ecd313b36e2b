//! Points, angles, rigid motions and the two grasp representations.
//!
//! Coordinates are image pixels: origin top-left, `x` to the right, `y`
//! downward. Angles are radians measured from `+x` toward `+y`. A grasp is
//! symmetric under a half turn, so axis angles live in `[0, π)`.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("zero opening: fingertips coincide")]
    ZeroOpening,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("fingertip coincides with the center point")]
    CoincidentCenter,
    #[error("invalid {name}: {value} (must be finite and > 0)")]
    InvalidDimension { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at `angle` radians.
    #[inline]
    pub fn from_angle(angle: T) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    #[inline]
    pub fn midpoint(self, other: Self) -> Self {
        Self::new((self.x + other.x) * T::lit(0.5), (self.y + other.y) * T::lit(0.5))
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    /// Perpendicular obtained by a quarter turn from `+x` toward `+y`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    /// Direction angle in `(−π, π]`.
    #[inline]
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> AddAssign for Point2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x = self.x + o.x;
        self.y = self.y + o.y;
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Div<T> for Point2<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

/// Planar rotation by `theta` radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2<T> {
    pub theta: T,
    cos: T,
    sin: T,
}

impl<T: Real> Rotation2<T> {
    pub fn new(theta: T) -> Self {
        Self { theta, cos: theta.cos(), sin: theta.sin() }
    }

    #[inline]
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.cos * p.x - self.sin * p.y, self.sin * p.x + self.cos * p.y)
    }

    /// Applies the transpose, i.e. the inverse rotation.
    #[inline]
    pub fn apply_inverse(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.cos * p.x + self.sin * p.y, -self.sin * p.x + self.cos * p.y)
    }

    pub fn inverse(&self) -> Self {
        Self::new(-self.theta)
    }
}

/// `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: Rotation2<T>,
    pub translation: Point2<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn new(theta: T, translation: Point2<T>) -> Self {
        Self { rotation: Rotation2::new(theta), translation }
    }

    pub fn translation(t: Point2<T>) -> Self {
        Self::new(T::zero(), t)
    }

    #[inline]
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        self.rotation.apply(p) + self.translation
    }

    /// Rotation about `pivot` rather than the origin.
    pub fn rotation_about(pivot: Point2<T>, theta: T) -> Self {
        let rotation = Rotation2::new(theta);
        Self { rotation, translation: pivot - rotation.apply(pivot) }
    }
}

/// Reduces an angle into `[0, π)`.
pub fn reduce_mod_pi<T: Real>(angle: T) -> T {
    let pi = T::PI();
    let mut r = angle % pi;
    if r < T::zero() {
        r = r + pi;
    }
    if r >= pi {
        r = r - pi;
    }
    r
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_to_pi<T: Real>(angle: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut r = angle % two_pi;
    if r <= -pi {
        r = r + two_pi;
    } else if r > pi {
        r = r - two_pi;
    }
    r
}

/// Absolute difference of two directions, in `[0, π]`.
pub fn angular_distance<T: Real>(a: T, b: T) -> T {
    wrap_to_pi(a - b).abs()
}

/// Difference of two undirected axes (mod π), in `[0, π/2]`.
pub fn axis_angle_difference<T: Real>(a: T, b: T) -> T {
    let d = reduce_mod_pi(a - b);
    d.min(T::PI() - d)
}

/// A grasp as the pair of fingertip centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDotGrasp<T> {
    pub c1: Point2<T>,
    pub c2: Point2<T>,
}

impl<T: Real> DoubleDotGrasp<T> {
    pub fn new(c1: Point2<T>, c2: Point2<T>) -> Result<Self, GeometryError> {
        if !c1.is_finite() || !c2.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if c1 == c2 {
            return Err(GeometryError::ZeroOpening);
        }
        Ok(Self { c1, c2 })
    }

    #[inline]
    pub fn opening(&self) -> T {
        self.c1.distance(self.c2)
    }

    #[inline]
    pub fn midpoint(&self) -> Point2<T> {
        self.c1.midpoint(self.c2)
    }

    pub fn swapped(&self) -> Self {
        Self { c1: self.c2, c2: self.c1 }
    }

    pub fn transformed(&self, tf: &RigidTransform<T>) -> Self {
        Self { c1: tf.apply(self.c1), c2: tf.apply(self.c2) }
    }

    pub fn cast<U: Real>(&self) -> DoubleDotGrasp<U> {
        DoubleDotGrasp { c1: self.c1.cast(), c2: self.c2.cast() }
    }
}

/// Five-parameter grasp rectangle.
///
/// `w` is the gripper opening (along the grasp axis), `h` the jaw/plate
/// size (across it), and `theta` the axis angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect<T> {
    pub center: Point2<T>,
    pub w: T,
    pub h: T,
    pub theta: T,
}

impl<T: Real> OrientedRect<T> {
    /// Validates dimensions and reduces `theta` into `[0, π)`.
    pub fn new(center: Point2<T>, w: T, h: T, theta: T) -> Result<Self, GeometryError> {
        if !center.is_finite() || !theta.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        for (name, v) in [("w", w), ("h", h)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(GeometryError::InvalidDimension { name, value: v.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok(Self { center, w, h, theta: reduce_mod_pi(theta) })
    }

    /// Corners in positive (shoelace) orientation.
    pub fn corners(&self) -> [Point2<T>; 4] {
        let u = Point2::from_angle(self.theta) * (self.w * T::lit(0.5));
        let v = Point2::from_angle(self.theta).perp() * (self.h * T::lit(0.5));
        let c = self.center;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn cast<U: Real>(&self) -> OrientedRect<U> {
        OrientedRect {
            center: self.center.cast(),
            w: U::lit(self.w.as_f64()),
            h: U::lit(self.h.as_f64()),
            theta: U::lit(self.theta.as_f64()),
        }
    }
}

/// Fingertips at `center ± (w/2)(cos θ, sin θ)`.
pub fn rect_to_grasp<T: Real>(r: &OrientedRect<T>) -> DoubleDotGrasp<T> {
    let half = Point2::from_angle(r.theta) * (r.w * T::lit(0.5));
    DoubleDotGrasp { c1: r.center + half, c2: r.center - half }
}

/// Rectangle with the grasp's midpoint, opening and axis, and jaw size `h`.
pub fn grasp_to_rect<T: Real>(g: &DoubleDotGrasp<T>, h: T) -> Result<OrientedRect<T>, GeometryError> {
    let theta = grasp_axis_angle(g)?;
    OrientedRect::new(g.midpoint(), g.opening(), h, theta)
}

/// Angle of the line through both fingertips, in `[0, π)`.
pub fn grasp_axis_angle<T: Real>(g: &DoubleDotGrasp<T>) -> Result<T, GeometryError> {
    let d = g.c2 - g.c1;
    if d.x == T::zero() && d.y == T::zero() {
        return Err(GeometryError::ZeroOpening);
    }
    Ok(reduce_mod_pi(d.angle()))
}

/// Direction from fingertip `c` toward `center`, in `(−π, π]`.
///
/// Full-circle arctangent, so the two fingertips of one grasp always get
/// opposite orientations.
pub fn fingertip_orientation<T: Real>(c: Point2<T>, center: Point2<T>) -> Result<T, GeometryError> {
    if c == center {
        return Err(GeometryError::CoincidentCenter);
    }
    Ok((center.y - c.y).atan2(center.x - c.x))
}
