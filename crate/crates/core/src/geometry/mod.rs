//! Exact planar geometry over rationals.

mod hull;
mod pwl;

pub use hull::convex_hull_indices;
pub use pwl::{Facet, PwlFunction, Subdiff};

use crate::rational::{to_f64, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point2 {
    #[serde(with = "crate::rational::serde_q")]
    pub x: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub y: Q,
}

impl fmt::Debug for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Point2 {
    pub fn new(x: Q, y: Q) -> Self {
        Point2 { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Point2::new(crate::rational::qi(x), crate::rational::qi(y))
    }

    pub fn zero() -> Self {
        Point2::new(Q::zero(), Q::zero())
    }

    pub fn add(&self, o: &Point2) -> Point2 {
        Point2::new(&self.x + &o.x, &self.y + &o.y)
    }

    pub fn sub(&self, o: &Point2) -> Point2 {
        Point2::new(&self.x - &o.x, &self.y - &o.y)
    }

    pub fn scale(&self, t: &Q) -> Point2 {
        Point2::new(&self.x * t, &self.y * t)
    }

    pub fn neg(&self) -> Point2 {
        Point2::new(-&self.x, -&self.y)
    }

    pub fn dot(&self, o: &Point2) -> Q {
        &self.x * &o.x + &self.y * &o.y
    }

    pub fn cross(&self, o: &Point2) -> Q {
        &self.x * &o.y - &self.y * &o.x
    }

    pub fn norm_sq(&self) -> Q {
        self.dot(self)
    }

    pub fn dist_sq(&self, o: &Point2) -> Q {
        self.sub(o).norm_sq()
    }

    /// Point at parameter `t` on the segment from `self` to `o`.
    pub fn lerp(&self, o: &Point2, t: &Q) -> Point2 {
        self.add(&o.sub(self).scale(t))
    }

    pub fn midpoint(&self, o: &Point2) -> Point2 {
        self.lerp(o, &crate::rational::q(1, 2))
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [to_f64(&self.x), to_f64(&self.y)]
    }
}

/// Twice the signed area of the triangle `o, a, b`.
pub fn orient(o: &Point2, a: &Point2, b: &Point2) -> Q {
    a.sub(o).cross(&b.sub(o))
}

pub fn seg_point_dist_sq(p: &Point2, a: &Point2, b: &Point2) -> Q {
    let d = b.sub(a);
    let len = d.norm_sq();
    if len.is_zero() {
        return p.dist_sq(a);
    }
    let t = p.sub(a).dot(&d) / &len;
    if t <= Q::zero() {
        p.dist_sq(a)
    } else if t >= Q::one() {
        p.dist_sq(b)
    } else {
        p.dist_sq(&a.lerp(b, &t))
    }
}

fn on_segment(p: &Point2, a: &Point2, b: &Point2) -> bool {
    orient(a, b, p).is_zero()
        && p.x >= a.x.clone().min(b.x.clone())
        && p.x <= a.x.clone().max(b.x.clone())
        && p.y >= a.y.clone().min(b.y.clone())
        && p.y <= a.y.clone().max(b.y.clone())
}

pub fn segments_intersect(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let o1 = orient(a, b, c).signum();
    let o2 = orient(a, b, d).signum();
    let o3 = orient(c, d, a).signum();
    let o4 = orient(c, d, b).signum();
    if o1 != o2 && o3 != o4 && !o1.is_zero() && !o2.is_zero() && !o3.is_zero() && !o4.is_zero() {
        return true;
    }
    on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
        || (o1 * o2 < Q::zero() && o3 * o4 < Q::zero())
}

pub fn seg_seg_dist_sq(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> Q {
    if segments_intersect(a, b, c, d) {
        return Q::zero();
    }
    [
        seg_point_dist_sq(a, c, d),
        seg_point_dist_sq(b, c, d),
        seg_point_dist_sq(c, a, b),
        seg_point_dist_sq(d, a, b),
    ]
    .into_iter()
    .min()
    .unwrap()
}

/// Convex polygon with vertices in counterclockwise order and no collinear
/// triples. Zero, one or two vertices encode the empty set, a point and a
/// segment.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Polygon2 {
    pub vertices: Vec<Point2>,
}

impl Polygon2 {
    pub fn point(p: Point2) -> Self {
        Polygon2 { vertices: vec![p] }
    }

    pub fn hull(points: &[Point2]) -> Self {
        let idx = convex_hull_indices(points);
        Polygon2 { vertices: idx.into_iter().map(|i| points[i].clone()).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Point2, &Point2)> {
        let n = self.vertices.len();
        let m = if n == 2 { 1 } else if n < 2 { 0 } else { n };
        (0..m).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    pub fn contains(&self, p: &Point2) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => &self.vertices[0] == p,
            2 => on_segment(p, &self.vertices[0], &self.vertices[1]),
            n => (0..n).all(|i| !orient(&self.vertices[i], &self.vertices[(i + 1) % n], p).is_negative()),
        }
    }

    /// True when `p` lies in the interior of the polygon (never for degenerate shapes).
    pub fn contains_strict(&self, p: &Point2) -> bool {
        let n = self.vertices.len();
        n >= 3 && (0..n).all(|i| orient(&self.vertices[i], &self.vertices[(i + 1) % n], p).is_positive())
    }

    pub fn on_boundary(&self, p: &Point2) -> bool {
        self.contains(p) && !self.contains_strict(p)
    }

    pub fn area(&self) -> Q {
        let n = self.vertices.len();
        if n < 3 {
            return Q::zero();
        }
        let mut s = Q::zero();
        for i in 0..n {
            s += self.vertices[i].cross(&self.vertices[(i + 1) % n]);
        }
        s / crate::rational::qi(2)
    }

    pub fn diameter_sq(&self) -> Q {
        diameter_sq(&self.vertices)
    }

    /// Keeps the part `{z : normal·z <= c}`.
    pub fn clip(&self, normal: &Point2, c: &Q) -> Polygon2 {
        let n = self.vertices.len();
        if n == 0 {
            return self.clone();
        }
        let val: Vec<Q> = self.vertices.iter().map(|v| normal.dot(v) - c).collect();
        if val.iter().all(|v| !v.is_positive()) {
            return self.clone();
        }
        let mut out = Vec::new();
        let m = if n == 1 { 1 } else { n };
        for i in 0..m {
            let j = (i + 1) % n;
            let (a, b) = (&self.vertices[i], &self.vertices[j]);
            let (va, vb) = (&val[i], &val[j]);
            if !va.is_positive() {
                out.push(a.clone());
            }
            if (va.is_negative() && vb.is_positive()) || (va.is_positive() && vb.is_negative()) {
                let t = va / (va - vb);
                out.push(a.lerp(b, &t));
            }
        }
        Polygon2::hull(&out)
    }

    pub fn dist_sq_point(&self, p: &Point2) -> Q {
        if self.contains(p) {
            return Q::zero();
        }
        match self.vertices.len() {
            0 => panic!("distance to empty polygon"),
            1 => p.dist_sq(&self.vertices[0]),
            _ => self.edges().map(|(a, b)| seg_point_dist_sq(p, a, b)).min().unwrap(),
        }
    }

    pub fn intersects(&self, o: &Polygon2) -> bool {
        if self.is_empty() || o.is_empty() {
            return false;
        }
        if self.vertices.iter().any(|v| o.contains(v)) || o.vertices.iter().any(|v| self.contains(v)) {
            return true;
        }
        self.edges().any(|(a, b)| o.edges().any(|(c, d)| segments_intersect(a, b, c, d)))
    }

    /// Float estimate of [`dist_sq`](Self::dist_sq).
    pub fn dist_sq_f64(&self, o: &Polygon2) -> f64 {
        let a: Vec<[f64; 2]> = self.vertices.iter().map(Point2::to_f64).collect();
        let b: Vec<[f64; 2]> = o.vertices.iter().map(Point2::to_f64).collect();
        if a.is_empty() || b.is_empty() {
            return f64::INFINITY;
        }
        if a.iter().any(|p| contains_f64(&b, *p)) || b.iter().any(|p| contains_f64(&a, *p)) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (p, poly) in a.iter().map(|p| (p, &b)).chain(b.iter().map(|p| (p, &a))) {
            let n = poly.len();
            for i in 0..n {
                best = best.min(seg_dist_sq_f64(*p, poly[i], poly[(i + 1) % n]));
            }
        }
        // crossing edges with no vertex inside
        let (na, nb) = (a.len(), b.len());
        for i in 0..na {
            for j in 0..nb {
                if seg_cross_f64(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                    return 0.0;
                }
            }
        }
        best
    }

    pub fn dist_sq(&self, o: &Polygon2) -> Q {
        if self.intersects(o) {
            return Q::zero();
        }
        let mut best: Option<Q> = None;
        for v in &self.vertices {
            let d = o.dist_sq_point(v);
            if best.as_ref().is_none_or(|b| &d < b) {
                best = Some(d);
            }
        }
        for v in &o.vertices {
            let d = self.dist_sq_point(v);
            if best.as_ref().is_none_or(|b| &d < b) {
                best = Some(d);
            }
        }
        best.expect("distance between empty polygons")
    }

    pub fn dist_sq_segment(&self, a: &Point2, b: &Point2) -> Q {
        self.dist_sq(&Polygon2::hull(&[a.clone(), b.clone()]))
    }

    pub fn to_f64(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|p| p.to_f64()).collect()
    }
}

pub fn diameter_sq(pts: &[Point2]) -> Q {
    let mut best = Q::zero();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[i].dist_sq(&pts[j]);
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Rational rotation `(cos, sin)` with `cos² + sin² = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rotation {
    #[serde(with = "crate::rational::serde_q")]
    pub cos: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub sin: Q,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { cos: Q::one(), sin: Q::zero() }
    }

    /// From `t = tan(θ/2)`.
    pub fn from_half_tan(t: &Q) -> Self {
        let t2 = t * t;
        let den = Q::one() + &t2;
        Rotation { cos: (Q::one() - &t2) / &den, sin: (t * crate::rational::qi(2)) / den }
    }

    /// Rational rotation close to angle `theta`, with half-angle tangent
    /// denominator at most `max_den`. Exact for multiples of π/2.
    pub fn near(theta: f64, max_den: i64) -> Self {
        let two_pi = std::f64::consts::TAU;
        let mut th = theta.rem_euclid(two_pi);
        let quarter = std::f64::consts::FRAC_PI_2;
        let k = (th / quarter).round();
        let quarter_turns = if (th - k * quarter).abs() < 1e-12 { Some(k as i64 % 4) } else { None };
        if let Some(k) = quarter_turns {
            let (c, s) = [(1, 0), (0, 1), (-1, 0), (0, -1)][k as usize];
            return Rotation { cos: crate::rational::qi(c), sin: crate::rational::qi(s) };
        }
        // keep |θ/2| small so the tangent stays moderate
        let mut base = Rotation::identity();
        while th > quarter / 2.0 {
            th -= quarter;
            base = base.compose(&Rotation { cos: Q::zero(), sin: Q::one() });
        }
        let t = best_rational((th / 2.0).tan(), max_den);
        base.compose(&Rotation::from_half_tan(&t))
    }

    pub fn compose(&self, o: &Rotation) -> Rotation {
        Rotation {
            cos: &self.cos * &o.cos - &self.sin * &o.sin,
            sin: &self.sin * &o.cos + &self.cos * &o.sin,
        }
    }

    pub fn inverse(&self) -> Rotation {
        Rotation { cos: self.cos.clone(), sin: -&self.sin }
    }

    pub fn apply(&self, p: &Point2) -> Point2 {
        Point2::new(&self.cos * &p.x - &self.sin * &p.y, &self.sin * &p.x + &self.cos * &p.y)
    }

    pub fn angle(&self) -> f64 {
        to_f64(&self.sin).atan2(to_f64(&self.cos))
    }
}

/// Best rational approximation with bounded denominator (continued fractions).
pub fn best_rational(x: f64, max_den: i64) -> Q {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        let ai = a as i64;
        let p2 = ai * p1 + p0;
        let q2 = ai * q1 + q0;
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac.abs() < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    crate::rational::q(p1, q1)
}

/// Possibly rotated closed rectangle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point2,
    #[serde(with = "crate::rational::serde_q")]
    pub half_w: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub half_h: Q,
    pub rotation: Rotation,
}

impl Rect {
    pub fn axis(x0: Q, x1: Q, y0: Q, y1: Q) -> Self {
        let two = crate::rational::qi(2);
        Rect {
            center: Point2::new((&x0 + &x1) / &two, (&y0 + &y1) / &two),
            half_w: (x1 - x0) / &two,
            half_h: (y1 - y0) / two,
            rotation: Rotation::identity(),
        }
    }

    pub fn unit_square() -> Self {
        Rect::axis(Q::zero(), Q::one(), Q::zero(), Q::one())
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.rotation.sin.is_zero() && self.rotation.cos.is_positive()
    }

    pub fn width(&self) -> Q {
        &self.half_w * crate::rational::qi(2)
    }

    pub fn height(&self) -> Q {
        &self.half_h * crate::rational::qi(2)
    }

    pub fn area(&self) -> Q {
        self.width() * self.height()
    }

    /// Coordinates of `p` in the rectangle frame (origin at the centre).
    pub fn local(&self, p: &Point2) -> Point2 {
        self.rotation.inverse().apply(&p.sub(&self.center))
    }

    pub fn contains(&self, p: &Point2) -> bool {
        let l = self.local(p);
        l.x.abs() <= self.half_w && l.y.abs() <= self.half_h
    }

    pub fn corners(&self) -> Vec<Point2> {
        let (w, h) = (&self.half_w, &self.half_h);
        [(-w.clone(), -h.clone()), (w.clone(), -h.clone()), (w.clone(), h.clone()), (-w.clone(), h.clone())]
            .into_iter()
            .map(|(a, b)| self.center.add(&self.rotation.apply(&Point2::new(a, b))))
            .collect()
    }

    pub fn polygon(&self) -> Polygon2 {
        Polygon2::hull(&self.corners())
    }

    /// Bounds `(xmin, xmax, ymin, ymax)` of an axis-aligned rectangle.
    pub fn bounds(&self) -> (Q, Q, Q, Q) {
        (
            &self.center.x - &self.half_w,
            &self.center.x + &self.half_w,
            &self.center.y - &self.half_h,
            &self.center.y + &self.half_h,
        )
    }
}

/// Query regions for subdifferential images and diameters.
#[derive(Clone, Debug)]
pub enum Region {
    Domain,
    Rect(Rect),
    Polygon(Polygon2),
    /// Closed `delta`-neighbourhood of the segment `[a, b]`.
    Neighborhood { a: Point2, b: Point2, delta: Q },
    Points(Vec<Point2>),
}

impl Region {
    pub fn meets_point(&self, p: &Point2) -> bool {
        match self {
            Region::Domain => true,
            Region::Rect(r) => r.contains(p),
            Region::Polygon(g) => g.contains(p),
            Region::Neighborhood { a, b, delta } => seg_point_dist_sq(p, a, b) <= delta * delta,
            Region::Points(ps) => ps.iter().any(|q| q == p),
        }
    }

    pub fn meets_polygon(&self, poly: &Polygon2) -> bool {
        match self {
            Region::Domain => true,
            Region::Rect(r) => r.polygon().intersects(poly),
            Region::Polygon(g) => g.intersects(poly),
            Region::Neighborhood { a, b, delta } => poly.dist_sq_segment(a, b) <= delta * delta,
            Region::Points(ps) => ps.iter().any(|p| poly.contains(p)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn p(x: i64, y: i64) -> Point2 {
        Point2::from_ints(x, y)
    }

    #[test]
    fn hull_and_contains() {
        let poly = Polygon2::hull(&[p(0, 0), p(2, 0), p(1, 0), p(2, 2), p(0, 2), p(1, 1)]);
        assert_eq!(poly.len(), 4);
        assert_eq!(poly.area(), qi(4));
        assert!(poly.contains(&p(1, 0)));
        assert!(poly.on_boundary(&p(1, 0)));
        assert!(!poly.contains(&p(3, 0)));
        assert_eq!(poly.diameter_sq(), qi(8));
    }

    #[test]
    fn clipping() {
        let sq = Polygon2::hull(&[p(0, 0), p(2, 0), p(2, 2), p(0, 2)]);
        let c = sq.clip(&p(1, 0), &qi(1));
        assert_eq!(c.area(), qi(2));
        let seg = Polygon2::hull(&[p(0, 0), p(2, 0)]);
        let c = seg.clip(&p(1, 0), &qi(1));
        assert_eq!(c.vertices, vec![p(0, 0), p(1, 0)]);
        assert!(sq.clip(&p(1, 0), &qi(-1)).is_empty());
    }

    #[test]
    fn distances() {
        let a = Polygon2::hull(&[p(0, 0), p(1, 0), p(0, 1)]);
        let b = Polygon2::point(p(2, 2));
        assert_eq!(a.dist_sq(&b), q(9, 2));
        assert_eq!(a.dist_sq(&Polygon2::point(p(0, 0))), qi(0));
    }

    #[test]
    fn rotations_are_exact() {
        for k in 0..16 {
            let r = Rotation::near(k as f64 * std::f64::consts::PI / 8.0, 64);
            assert_eq!(&r.cos * &r.cos + &r.sin * &r.sin, qi(1));
            let err = (r.angle() - k as f64 * std::f64::consts::PI / 8.0).rem_euclid(std::f64::consts::TAU);
            assert!(err.min(std::f64::consts::TAU - err) < 1e-2);
        }
        assert_eq!(Rotation::near(std::f64::consts::FRAC_PI_2, 8).cos, qi(0));
    }

    #[test]
    fn rect_contains() {
        let r = Rect { center: p(0, 0), half_w: qi(2), half_h: qi(1), rotation: Rotation::near(std::f64::consts::FRAC_PI_2, 8) };
        assert!(r.contains(&p(0, 2)));
        assert!(!r.contains(&p(2, 0)));
    }
}

fn contains_f64(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    match n {
        0 => false,
        1 => poly[0] == p,
        2 => seg_dist_sq_f64(p, poly[0], poly[1]) == 0.0,
        _ => (0..n).all(|i| cross_f64(poly[i], poly[(i + 1) % n], p) >= 0.0),
    }
}

fn cross_f64(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn seg_cross_f64(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (cross_f64(a, b, c), cross_f64(a, b, d));
    let (d3, d4) = (cross_f64(c, d, a), cross_f64(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn seg_dist_sq_f64(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0] * d[0] + d[1] * d[1];
    let t = if len == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len).clamp(0.0, 1.0) };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    q[0] * q[0] + q[1] * q[1]
}
