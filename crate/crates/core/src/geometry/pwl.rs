//! Piecewise-linear convex functions given as lower hulls of lifted samples.

use super::hull::lower_hull_facets;
use super::{diameter_sq, orient, Point2, Polygon2, Region, Rotation};
use crate::error::GeomError;
use crate::rational::{qi, to_f64, Q};
use num_traits::{Signed, Zero};
use std::collections::{BTreeSet, HashMap};

/// One affine piece: the convex polygon of coplanar lifted samples.
#[derive(Clone, Debug)]
pub struct Facet {
    /// Boundary samples in counterclockwise order, including points interior to edges.
    pub ring: Vec<usize>,
    /// Every sample lying on this piece.
    pub members: Vec<usize>,
    pub grad: Point2,
    pub offset: Q,
    pub polygon: Polygon2,
}

impl Facet {
    pub fn eval(&self, p: &Point2) -> Q {
        self.grad.dot(p) + &self.offset
    }
}

/// Subdifferential of a piecewise-linear function at one point.
///
/// `polygon` is the exact set when `boundary` is false. At domain-boundary
/// points the true set is unbounded; `polygon` is then its intersection with
/// the hull of all facet gradients, while [`Subdiff::contains`] still tests
/// the unbounded set.
#[derive(Clone, Debug)]
pub struct Subdiff {
    pub polygon: Polygon2,
    pub boundary: bool,
    constraints: Vec<(Point2, Q)>,
}

impl Subdiff {
    pub fn contains(&self, z: &Point2) -> bool {
        self.constraints.iter().all(|(d, c)| &z.dot(d) <= c)
    }

    /// Float prefilter: `false` only when `z` is clearly outside.
    pub fn maybe_contains(&self, z: [f64; 2]) -> bool {
        self.constraints.iter().all(|(d, c)| {
            let (dx, dy, cc) = (to_f64(&d.x), to_f64(&d.y), to_f64(c));
            let lhs = z[0] * dx + z[1] * dy;
            lhs <= cc + 1e-9 * (1.0 + lhs.abs() + cc.abs())
        })
    }

    pub fn constraints(&self) -> &[(Point2, Q)] {
        &self.constraints
    }
}

#[derive(Clone, Debug)]
pub struct PwlFunction {
    points: Vec<Point2>,
    values: Vec<Q>,
    facets: Vec<Facet>,
    incident: Vec<Vec<usize>>,
    on_boundary: Vec<bool>,
    /// Distinct facet edges `(u, w, facets)` with `u < w`.
    edges: Vec<(usize, usize, Vec<usize>)>,
    extreme: Vec<usize>,
    domain: Polygon2,
    grad_hull: Polygon2,
    fbox: Vec<[f64; 4]>,
    fplanes: Vec<[f64; 3]>,
    fpolys: Vec<Vec<[f64; 2]>>,
}

/// Float clip range of `x + t·d` in a convex polygon.
fn clip_range_f64(v: &[[f64; 2]], x: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let n = v.len();
    if n < 3 {
        return None;
    }
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let alpha = e[0] * (x[1] - p[1]) - e[1] * (x[0] - p[0]);
        let beta = e[0] * d[1] - e[1] * d[0];
        if beta == 0.0 {
            if alpha < 0.0 {
                return None;
            }
        } else if beta > 0.0 {
            lo = lo.max(-alpha / beta);
        } else {
            hi = hi.min(-alpha / beta);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Float prefilter for [`clip_segment`]: `false` only when clearly disjoint.
fn clip_f64(v: &[[f64; 2]], x: [f64; 2], d: [f64; 2]) -> bool {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let n = v.len();
    if n < 3 {
        return true;
    }
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let alpha = e[0] * (x[1] - p[1]) - e[1] * (x[0] - p[0]);
        let beta = e[0] * d[1] - e[1] * d[0];
        let scale = 1e-9 * (1.0 + alpha.abs() + beta.abs() + e[0].abs() + e[1].abs());
        if beta.abs() <= scale {
            if alpha < -scale {
                return false;
            }
        } else {
            let t = -alpha / beta;
            if beta > 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
        if lo > hi + 1e-7 {
            return false;
        }
    }
    true
}

/// Parameter range `[t0, t1] ⊂ [0, 1]` of `x + t·d` inside a convex polygon.
fn clip_segment(poly: &Polygon2, x: &Point2, d: &Point2) -> Option<(Q, Q)> {
    let (mut lo, mut hi) = (Q::zero(), qi(1));
    let v = &poly.vertices;
    let n = v.len();
    if n < 3 {
        // degenerate polygon: test the endpoints of the piece directly
        return None;
    }
    for i in 0..n {
        let (p, q) = (&v[i], &v[(i + 1) % n]);
        let e = q.sub(p);
        // inside when cross(e, x + t d − p) ≥ 0
        let alpha = e.cross(&x.sub(p));
        let beta = e.cross(d);
        if beta.is_zero() {
            if alpha.is_negative() {
                return None;
            }
        } else {
            let t = -&alpha / &beta;
            if beta.is_positive() {
                if t > lo {
                    lo = t;
                }
            } else if t < hi {
                hi = t;
            }
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

fn bbox(poly: &Polygon2) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in &poly.vertices {
        let [x, y] = p.to_f64();
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    }
    b
}

fn in_box(b: &[f64; 4], p: [f64; 2]) -> bool {
    let tol = 1e-9 * (1.0 + b[1].abs().max(b[0].abs()) + b[3].abs().max(b[2].abs()));
    p[0] >= b[0] - tol && p[0] <= b[1] + tol && p[1] >= b[2] - tol && p[1] <= b[3] + tol
}

impl PwlFunction {
    /// Largest convex function below the samples (the lower hull of the lifted points).
    pub fn build(samples: Vec<(Point2, Q)>) -> Result<Self, GeomError> {
        let mut index: HashMap<Point2, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut values: Vec<Q> = Vec::new();
        for (p, v) in samples {
            match index.get(&p) {
                Some(&i) => {
                    if values[i] != v {
                        return Err(GeomError::DuplicatePoint(p.to_string()));
                    }
                }
                None => {
                    index.insert(p.clone(), points.len());
                    points.push(p);
                    values.push(v);
                }
            }
        }
        if points.len() < 3 {
            return Err(GeomError::AllCollinear);
        }
        let raw = lower_hull_facets(&points, &values)?;
        let mut facets = Vec::with_capacity(raw.len());
        for (ring, members) in raw {
            let polygon = Polygon2::hull(&ring.iter().map(|&i| points[i].clone()).collect::<Vec<_>>());
            let (grad, offset) = fit_plane(&points, &values, &ring);
            facets.push(Facet { ring, members, grad, offset, polygon });
        }
        Ok(Self::assemble(points, values, facets))
    }

    fn assemble(points: Vec<Point2>, values: Vec<Q>, facets: Vec<Facet>) -> Self {
        let n = points.len();
        let mut incident = vec![Vec::new(); n];
        for (k, f) in facets.iter().enumerate() {
            for &m in &f.members {
                incident[m].push(k);
            }
        }
        let domain = Polygon2::hull(&points);
        let on_boundary = points.iter().map(|p| domain.on_boundary(p)).collect();
        let mut emap: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, f) in facets.iter().enumerate() {
            let r = &f.ring;
            for i in 0..r.len() {
                let (u, w) = (r[i], r[(i + 1) % r.len()]);
                emap.entry((u.min(w), u.max(w))).or_default().push(k);
            }
        }
        let mut edges: Vec<(usize, usize, Vec<usize>)> = emap.into_iter().map(|((u, w), fs)| (u, w, fs)).collect();
        edges.sort();
        let ext: BTreeSet<usize> = facets
            .iter()
            .flat_map(|f| f.ring.iter().copied().filter(|&i| f.polygon.vertices.contains(&points[i])))
            .collect();
        let grad_hull = Polygon2::hull(&facets.iter().map(|f| f.grad.clone()).collect::<Vec<_>>());
        let fbox = facets.iter().map(|f| bbox(&f.polygon)).collect();
        let fpolys = facets.iter().map(|f| f.polygon.vertices.iter().map(|v| v.to_f64()).collect()).collect();
        let fplanes = facets.iter().map(|f| [to_f64(&f.grad.x), to_f64(&f.grad.y), to_f64(&f.offset)]).collect();
        PwlFunction {
            points,
            values,
            facets,
            incident,
            on_boundary,
            edges,
            extreme: ext.into_iter().collect(),
            domain,
            grad_hull,
            fbox,
            fplanes,
            fpolys,
        }
    }

    /// `u ↦ f(Rᵀu + c) − α − β·u`, sharing the facet structure.
    pub fn rigid_affine(&self, rot: &Rotation, center: &Point2, alpha: &Q, beta: &Point2) -> PwlFunction {
        let map = |p: &Point2| rot.apply(&p.sub(center));
        let points: Vec<Point2> = self.points.iter().map(map).collect();
        let values = self.values.iter().zip(&points).map(|(v, u)| v - alpha - beta.dot(u)).collect();
        let facets = self
            .facets
            .iter()
            .map(|f| Facet {
                ring: f.ring.clone(),
                members: f.members.clone(),
                grad: rot.apply(&f.grad).sub(beta),
                offset: &f.offset + f.grad.dot(center) - alpha,
                polygon: Polygon2::hull(&f.polygon.vertices.iter().map(map).collect::<Vec<_>>()),
            })
            .collect();
        Self::assemble(points, values, facets)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    pub fn samples(&self) -> Vec<(Point2, Q)> {
        self.points.iter().cloned().zip(self.values.iter().cloned()).collect()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn domain(&self) -> &Polygon2 {
        &self.domain
    }

    /// Convex hull of all facet gradients.
    pub fn gradient_hull(&self) -> &Polygon2 {
        &self.grad_hull
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn incident_facets(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn is_on_hull(&self, i: usize) -> bool {
        !self.incident[i].is_empty()
    }

    pub fn is_boundary_sample(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    /// Samples lying on the lower hull.
    pub fn hull_samples(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_on_hull(i)).collect()
    }

    /// Corners of the lower hull (extreme points of the lifted set).
    pub fn extreme_samples(&self) -> &[usize] {
        &self.extreme
    }

    pub fn edges(&self) -> &[(usize, usize, Vec<usize>)] {
        &self.edges
    }

    pub fn find_sample(&self, p: &Point2) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    /// Facets whose closed polygon contains `p`.
    pub fn locate(&self, p: &Point2) -> Vec<usize> {
        let pf = p.to_f64();
        (0..self.facets.len())
            .filter(|&k| in_box(&self.fbox[k], pf) && self.facets[k].polygon.contains(p))
            .collect()
    }

    pub fn eval(&self, p: &Point2) -> Result<Q, GeomError> {
        if !self.domain.contains(p) {
            return Err(GeomError::OutOfDomain(p.to_string()));
        }
        Ok(self.eval_unchecked(p))
    }

    /// Maximum of all facet planes; equals the function on its domain.
    pub fn eval_unchecked(&self, p: &Point2) -> Q {
        let pf = p.to_f64();
        let vals: Vec<f64> = self.fplanes.iter().map(|g| g[0] * pf[0] + g[1] * pf[1] + g[2]).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + top.abs() + pf[0].abs() + pf[1].abs());
        let near = vals.iter().enumerate().filter(|(_, v)| **v >= top - tol).map(|(k, _)| self.facets[k].eval(p)).max();
        match near {
            Some(v) if top.is_finite() => v,
            _ => self.facets.iter().map(|f| f.eval(p)).max().expect("function without facets"),
        }
    }

    pub fn eval_f64(&self, p: [f64; 2]) -> f64 {
        self.fplanes.iter().map(|g| g[0] * p[0] + g[1] * p[1] + g[2]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn subdiff_from(&self, x: &Point2, fx: &Q, facets: &[usize], boundary: bool) -> Subdiff {
        let mut seen = BTreeSet::new();
        let mut constraints = Vec::new();
        for &k in facets {
            let f = &self.facets[k];
            for q in &f.polygon.vertices {
                if q == x || !seen.insert(q.clone()) {
                    continue;
                }
                constraints.push((q.sub(x), f.eval(q) - fx));
            }
        }
        let polygon = if boundary {
            constraints.iter().fold(self.grad_hull.clone(), |poly, (d, c)| poly.clip(d, c))
        } else {
            Polygon2::hull(&facets.iter().map(|&k| self.facets[k].grad.clone()).collect::<Vec<_>>())
        };
        Subdiff { polygon, boundary, constraints }
    }

    /// Subdifferential at sample `i`, which must lie on the hull.
    pub fn subdiff_sample(&self, i: usize) -> Subdiff {
        assert!(self.is_on_hull(i), "sample {i} is above the lower hull");
        self.subdiff_from(&self.points[i], &self.values[i], &self.incident[i], self.on_boundary[i])
    }

    pub fn subdifferential(&self, x: &Point2) -> Result<Subdiff, GeomError> {
        if !self.domain.contains(x) {
            return Err(GeomError::OutOfDomain(x.to_string()));
        }
        let fs = self.locate(x);
        let fx = self.facets[fs[0]].eval(x);
        Ok(self.subdiff_from(x, &fx, &fs, self.domain.on_boundary(x)))
    }

    /// Exact membership `z ∈ ∂f(x)`.
    pub fn is_subgradient(&self, x: &Point2, z: &Point2) -> Result<bool, GeomError> {
        Ok(self.subdifferential(x)?.contains(z))
    }

    /// Cells whose union is the image of the region under the subdifferential
    /// (bounded parts only at domain-boundary points).
    pub fn subdifferential_image(&self, region: &Region) -> Result<Vec<Polygon2>, GeomError> {
        if let Region::Points(ps) = region {
            return ps.iter().map(|p| self.subdifferential(p).map(|s| s.polygon)).collect();
        }
        let mut out: Vec<Polygon2> = Vec::new();
        for f in &self.facets {
            if region.meets_polygon(&f.polygon) {
                out.push(Polygon2::point(f.grad.clone()));
            }
        }
        for (u, w, fs) in &self.edges {
            let seg = Polygon2::hull(&[self.points[*u].clone(), self.points[*w].clone()]);
            if !region.meets_polygon(&seg) {
                continue;
            }
            if fs.len() >= 2 {
                out.push(Polygon2::hull(&fs.iter().map(|&k| self.facets[k].grad.clone()).collect::<Vec<_>>()));
            } else {
                let mid = self.points[*u].midpoint(&self.points[*w]);
                out.push(self.subdifferential(&mid)?.polygon);
            }
        }
        for i in 0..self.len() {
            if self.is_on_hull(i) && region.meets_point(&self.points[i]) {
                out.push(self.subdiff_sample(i).polygon);
            }
        }
        if out.is_empty() {
            return Err(GeomError::OutOfDomain("region misses the domain".into()));
        }
        Ok(out)
    }

    /// Squared diameter of the subdifferential image of the region.
    pub fn diam_subdiff_sq(&self, region: &Region) -> Result<Q, GeomError> {
        let cells = self.subdifferential_image(region)?;
        let mut pts: Vec<Point2> = cells.into_iter().flat_map(|c| c.vertices).collect();
        pts.sort();
        pts.dedup();
        let hull = Polygon2::hull(&pts);
        Ok(diameter_sq(&hull.vertices))
    }

    pub fn diam_subdiff(&self, region: &Region) -> Result<f64, GeomError> {
        Ok(to_f64(&self.diam_subdiff_sq(region)?).sqrt())
    }

    /// `sup_x (x·z − f(x))` over the domain.
    pub fn conjugate(&self, z: &Point2) -> Q {
        self.extreme
            .iter()
            .map(|&i| self.points[i].dot(z) - &self.values[i])
            .max()
            .expect("function without vertices")
    }

    /// Exact test of `x ∈ ∂f*(z)`, i.e. `x` attains the supremum defining `f*(z)`.
    pub fn in_conjugate_subdiff(&self, z: &Point2, x: &Point2) -> bool {
        match self.eval(x) {
            Ok(fx) => x.dot(z) - fx == self.conjugate(z),
            Err(_) => false,
        }
    }

    /// Box on which the Legendre transform is sampled: the bounding box of the
    /// gradients, padded on every side by `max(1, width, height)`.
    pub fn conjugate_box(&self) -> Polygon2 {
        let g = &self.grad_hull.vertices;
        let (mut x0, mut x1, mut y0, mut y1) = (g[0].x.clone(), g[0].x.clone(), g[0].y.clone(), g[0].y.clone());
        for p in g {
            x0 = x0.min(p.x.clone());
            x1 = x1.max(p.x.clone());
            y0 = y0.min(p.y.clone());
            y1 = y1.max(p.y.clone());
        }
        let pad = qi(1).max(&x1 - &x0).max(&y1 - &y0);
        let (x0, x1, y0, y1) = (x0 - &pad, x1 + &pad, y0 - &pad, y1 + &pad);
        Polygon2::hull(&[
            Point2::new(x0.clone(), y0.clone()),
            Point2::new(x1.clone(), y0.clone()),
            Point2::new(x1, y1.clone()),
            Point2::new(x0, y1),
        ])
    }

    /// Legendre transform, exact on [`PwlFunction::conjugate_box`]. It is
    /// sampled at every facet gradient, at the corners of the boundary cells
    /// cut by the box, and at the box corners.
    pub fn legendre(&self) -> Result<PwlFunction, GeomError> {
        let bx = self.conjugate_box();
        let mut zs: BTreeSet<Point2> = self.facets.iter().map(|f| f.grad.clone()).collect();
        zs.extend(bx.vertices.iter().cloned());
        for i in 0..self.len() {
            if !self.is_on_hull(i) || !self.on_boundary[i] {
                continue;
            }
            let s = self.subdiff_from(&self.points[i], &self.values[i], &self.incident[i], false);
            let cell = s.constraints.iter().fold(bx.clone(), |poly, (d, c)| poly.clip(d, c));
            zs.extend(cell.vertices);
        }
        let samples = zs.into_iter().map(|z| {
            let v = self.conjugate(&z);
            (z, v)
        });
        PwlFunction::build(samples.collect())
    }

    /// Maximum of `chord − f` along `[x, y]`, computed exactly.
    pub fn flat_deficiency(&self, x: &Point2, y: &Point2) -> Result<Q, GeomError> {
        Ok(self.flat_deficiency_argmax(x, y)?.0)
    }

    /// Flat deficiency together with a parameter `t` where it is attained.
    pub fn flat_deficiency_argmax(&self, x: &Point2, y: &Point2) -> Result<(Q, Q), GeomError> {
        let fx = self.eval(x)?;
        let fy = self.eval(y)?;
        if !self.domain.contains(y) {
            return Err(GeomError::OutOfDomain(y.to_string()));
        }
        if x == y {
            return Ok((Q::zero(), Q::zero()));
        }
        // f is linear on each facet piece of the segment, so chord − f peaks
        // where the segment enters or leaves a facet
        let d = y.sub(x);
        let mut best = (Q::zero(), Q::zero());
        for (k, t0, t1) in self.segment_pieces(x, y) {
            let f = &self.facets[k];
            let (a, b) = (f.eval(x), f.grad.dot(&d));
            for t in [t0, t1] {
                let gap = &fx + (&fy - &fx) * &t - (&a + &b * &t);
                if gap > best.0 {
                    best = (gap, t);
                }
            }
        }
        Ok(best)
    }

    /// Float estimate of [`flat_deficiency`](Self::flat_deficiency).
    pub fn flat_deficiency_f64(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let (fx, fy) = (self.eval_f64(x), self.eval_f64(y));
        let d = [y[0] - x[0], y[1] - x[1]];
        let sb = [x[0].min(y[0]), x[0].max(y[0]), x[1].min(y[1]), x[1].max(y[1])];
        let mut best = 0.0f64;
        for (k, g) in self.fplanes.iter().enumerate() {
            let b = &self.fbox[k];
            if b[0] > sb[1] || sb[0] > b[1] || b[2] > sb[3] || sb[2] > b[3] {
                continue;
            }
            if let Some((t0, t1)) = clip_range_f64(&self.fpolys[k], x, d) {
                for t in [t0, t1] {
                    let p = [x[0] + t * d[0], x[1] + t * d[1]];
                    best = best.max(fx + (fy - fx) * t - (g[0] * p[0] + g[1] * p[1] + g[2]));
                }
            }
        }
        best
    }

    /// Facets meeting `[x, y]` with the parameter interval of the overlap.
    pub fn segment_pieces(&self, x: &Point2, y: &Point2) -> Vec<(usize, Q, Q)> {
        let (xf, yf) = (x.to_f64(), y.to_f64());
        let sb = [xf[0].min(yf[0]), xf[0].max(yf[0]), xf[1].min(yf[1]), xf[1].max(yf[1])];
        let d = y.sub(x);
        let mut out = Vec::new();
        for (k, f) in self.facets.iter().enumerate() {
            let b = &self.fbox[k];
            let tol = 1e-9 * (1.0 + b[1].abs().max(b[0].abs()) + b[3].abs().max(b[2].abs()));
            if !(b[0] <= sb[1] + tol && sb[0] <= b[1] + tol && b[2] <= sb[3] + tol && sb[2] <= b[3] + tol) {
                continue;
            }
            if !clip_f64(&self.fpolys[k], xf, [yf[0] - xf[0], yf[1] - xf[1]]) {
                continue;
            }
            if let Some((t0, t1)) = clip_segment(&f.polygon, x, &d) {
                out.push((k, t0, t1));
            }
        }
        out
    }

    /// Facets whose polygon meets the segment `[x, y]`.
    pub fn segment_facets(&self, x: &Point2, y: &Point2) -> Vec<usize> {
        self.segment_pieces(x, y).into_iter().map(|(k, _, _)| k).collect()
    }

    /// Lower-hull and subgradient certificates, checked exhaustively.
    pub fn certify(&self) -> Result<(), String> {
        for (k, f) in self.facets.iter().enumerate() {
            for (p, v) in self.points.iter().zip(&self.values) {
                if v < &f.eval(p) {
                    return Err(format!("sample {p} lies below facet {k}"));
                }
            }
            for &m in &f.members {
                if f.eval(&self.points[m]) != self.values[m] {
                    return Err(format!("member {m} is off facet {k}"));
                }
            }
        }
        for (u, w, fs) in &self.edges {
            if fs.len() == 2 && self.facets[fs[0]].grad == self.facets[fs[1]].grad {
                return Err(format!("adjacent facets across ({u},{w}) share a gradient"));
            }
        }
        Ok(())
    }
}

fn fit_plane(points: &[Point2], values: &[Q], ring: &[usize]) -> (Point2, Q) {
    let a = ring[0];
    let b = ring[1];
    let c = ring
        .iter()
        .copied()
        .find(|&c| !orient(&points[a], &points[b], &points[c]).is_zero())
        .expect("degenerate facet");
    let (pa, pb, pc) = (&points[a], &points[b], &points[c]);
    let det = orient(pa, pb, pc);
    let (db, dc) = (&values[b] - &values[a], &values[c] - &values[a]);
    let gx = (&db * (&pc.y - &pa.y) - &dc * (&pb.y - &pa.y)) / &det;
    let gy = (&dc * (&pb.x - &pa.x) - &db * (&pc.x - &pa.x)) / &det;
    let grad = Point2::new(gx, gy);
    let offset = &values[a] - grad.dot(pa);
    (grad, offset)
}
