//! Planar polygon primitives: shoelace area, convex clipping, containment
//! and segment intersection.

use crate::geometry::Point2;
use crate::scalar::Real;

/// Signed shoelace area; positive for the orientation produced by
/// [`crate::geometry::OrientedRect::corners`].
pub fn signed_area<T: Real>(poly: &[Point2<T>]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut twice = T::zero();
    for i in 0..n {
        twice = twice + poly[i].cross(poly[(i + 1) % n]);
    }
    twice * T::lit(0.5)
}

pub fn area<T: Real>(poly: &[Point2<T>]) -> T {
    signed_area(poly).abs()
}

/// Keeps the part of `poly` on the left of the directed line `a → b`
/// (where `(b − a) × (p − a) ≥ 0`).
pub fn clip_half_plane<T: Real>(poly: &[Point2<T>], a: Point2<T>, b: Point2<T>) -> Vec<Point2<T>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    if n == 0 {
        return out;
    }
    let side = |p: Point2<T>| (b - a).cross(p - a);
    for i in 0..n {
        let s = poly[i];
        let e = poly[(i + 1) % n];
        let (ds, de) = (side(s), side(e));
        let (s_in, e_in) = (ds >= T::zero(), de >= T::zero());
        if s_in != e_in {
            let t = ds / (ds - de);
            out.push(s + (e - s) * t);
        }
        if e_in {
            out.push(e);
        }
    }
    out
}

/// Sutherland–Hodgman: `subject` clipped to the convex, positively
/// oriented `clip` polygon.
pub fn clip_convex<T: Real>(subject: &[Point2<T>], clip: &[Point2<T>]) -> Vec<Point2<T>> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.len() < 3 {
            return Vec::new();
        }
        out = clip_half_plane(&out, clip[i], clip[(i + 1) % m]);
    }
    if out.len() < 3 {
        Vec::new()
    } else {
        out
    }
}

/// Even–odd containment. Points exactly on the boundary may go either way;
/// combine with [`distance_to_boundary`] when that matters.
pub fn contains<T: Real>(poly: &[Point2<T>], p: Point2<T>) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

pub fn distance_to_boundary<T: Real>(poly: &[Point2<T>], p: Point2<T>) -> T {
    let n = poly.len();
    (0..n).map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n])).fold(T::infinity(), T::min)
}

/// Intersection of segments `p0 → p1` and `q0 → q1` as parameters
/// `(t, u)` along each, both in `[0, 1]`. Parallel segments return `None`.
pub fn segment_intersection<T: Real>(p0: Point2<T>, p1: Point2<T>, q0: Point2<T>, q1: Point2<T>) -> Option<(T, T)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = r.cross(s);
    if denom == T::zero() {
        return None;
    }
    let qp = q0 - p0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let unit = |v: T| v >= T::zero() && v <= T::one();
    (unit(t) && unit(u)).then_some((t, u))
}

fn orient<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    (b - a).cross(c - a)
}

fn on_segment<T: Real>(a: Point2<T>, b: Point2<T>, p: Point2<T>) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test including collinear overlap.
pub fn segments_intersect<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    let z = T::zero();
    if ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z)) {
        return true;
    }
    (d1 == z && on_segment(c, d, a))
        || (d2 == z && on_segment(c, d, b))
        || (d3 == z && on_segment(a, b, c))
        || (d4 == z && on_segment(a, b, d))
}

/// Brute-force simplicity check: non-adjacent edges never touch and
/// adjacent edges share only their common vertex.
pub fn is_simple<T: Real>(poly: &[Point2<T>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Folding back onto the shared edge.
                let shared = if j == i + 1 { b } else { a };
                let (u, v) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(u, shared, v) == T::zero() && (u - shared).dot(v - shared) > T::zero() {
                    return false;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
