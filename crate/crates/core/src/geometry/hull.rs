//! Planar hulls and lower convex hulls of lifted points.

use super::{orient, Point2};
use crate::error::GeomError;
use crate::rational::{lcm_denoms, scale_to_int, Q};
use num_bigint::BigInt;
use crate::int::Int;
use num_traits::{Signed, ToPrimitive};
use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

/// Indices of the strict convex hull in counterclockwise order, starting at
/// the lexicographically smallest point. Duplicates are ignored.
pub fn convex_hull_indices(points: &[Point2]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].cmp(&points[b]));
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() <= 2 {
        return idx;
    }
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2
            && !orient(&points[lower[lower.len() - 2]], &points[lower[lower.len() - 1]], &points[i]).is_positive()
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && !orient(&points[upper[upper.len() - 2]], &points[upper[upper.len() - 1]], &points[i]).is_positive()
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}


struct Lift<T> {
    x: Vec<T>,
    y: Vec<T>,
    v: Vec<T>,
}

impl<T: Int> Lift<T> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn orient(&self, a: usize, b: usize, c: usize) -> T {
        let (bx, by) = (self.x[b].clone() - self.x[a].clone(), self.y[b].clone() - self.y[a].clone());
        let (cx, cy) = (self.x[c].clone() - self.x[a].clone(), self.y[c].clone() - self.y[a].clone());
        bx * cy - by * cx
    }

    fn det3(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        let r = |p: usize| {
            (
                self.x[p].clone() - self.x[a].clone(),
                self.y[p].clone() - self.y[a].clone(),
                self.v[p].clone() - self.v[a].clone(),
            )
        };
        let (b1, b2, b3) = r(b);
        let (c1, c2, c3) = r(c);
        let (d1, d2, d3) = r(d);
        b1 * (c2.clone() * d3.clone() - c3.clone() * d2.clone()) - b2 * (c1.clone() * d3 - c3 * d1.clone())
            + b3 * (c1 * d2 - c2 * d1)
    }

    /// Position of `d` relative to the plane through `a, b, c` (which must not
    /// be collinear in the plane): `Greater` means above.
    fn above(&self, a: usize, b: usize, c: usize, d: usize) -> Ordering {
        let s = self.det3(a, b, c, d);
        let o = self.orient(a, b, c);
        let sign = if o.is_positive() { s } else { -s };
        sign.cmp(&T::zero())
    }

    fn dot_dir(&self, a: usize, b: usize, p: usize) -> T {
        (self.x[p].clone() - self.x[a].clone()) * (self.x[b].clone() - self.x[a].clone())
            + (self.y[p].clone() - self.y[a].clone()) * (self.y[b].clone() - self.y[a].clone())
    }

    /// Counterclockwise ring of the planar hull of `members`, keeping points
    /// that lie on hull edges.
    fn ring(&self, members: &[usize]) -> Vec<usize> {
        let mut idx = members.to_vec();
        idx.sort_by(|&a, &b| (self.x[a].clone(), self.y[a].clone()).cmp(&(self.x[b].clone(), self.y[b].clone())));
        let mut strict: Vec<usize> = Vec::new();
        for pass in 0..2 {
            let start = strict.len();
            let it: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
            for &i in it {
                while strict.len() >= start + 2
                    && !self.orient(strict[strict.len() - 2], strict[strict.len() - 1], i).is_positive()
                {
                    strict.pop();
                }
                strict.push(i);
            }
            strict.pop();
        }
        let n = strict.len();
        let mut ring = Vec::with_capacity(members.len());
        for k in 0..n {
            let (u, w) = (strict[k], strict[(k + 1) % n]);
            ring.push(u);
            let len = self.dot_dir(u, w, w);
            let mut on: Vec<(T, usize)> = members
                .iter()
                .copied()
                .filter(|&p| p != u && p != w && self.orient(u, w, p).is_zero())
                .map(|p| (self.dot_dir(u, w, p), p))
                .filter(|(t, _)| t.is_positive() && *t < len)
                .collect();
            on.sort();
            ring.extend(on.into_iter().map(|(_, p)| p));
        }
        ring
    }

    fn find_facet(&self, a: usize, b: usize) -> Option<(Vec<usize>, Vec<usize>)> {
        let mut best: Option<usize> = None;
        for p in 0..self.len() {
            if !self.orient(a, b, p).is_positive() {
                continue;
            }
            match best {
                None => best = Some(p),
                Some(c) => {
                    if self.above(a, b, c, p) == Ordering::Less {
                        best = Some(p);
                    }
                }
            }
        }
        let c = best?;
        let members: Vec<usize> = (0..self.len()).filter(|&p| self.det3(a, b, c, p).is_zero()).collect();
        let ring = self.ring(&members);
        Some((ring, members))
    }

    fn lower_hull(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.len();
        let key = |p: usize| (self.x[p].clone(), self.y[p].clone());
        let p0 = (0..n).min_by_key(|&p| key(p)).unwrap();
        let mut c = if p0 == 0 { 1 } else { 0 };
        for p in 0..n {
            if p != p0 && self.orient(p0, c, p).is_negative() {
                c = p;
            }
        }
        // among points on the same hull ray, take the steepest descent, then the nearest
        let mut p1 = c;
        for p in 0..n {
            if p == p0 || p == p1 || !self.orient(p0, c, p).is_zero() {
                continue;
            }
            let (tp, t1) = (self.dot_dir(p0, c, p), self.dot_dir(p0, c, p1));
            let sp = (self.v[p].clone() - self.v[p0].clone()) * t1.clone();
            let s1 = (self.v[p1].clone() - self.v[p0].clone()) * tp.clone();
            if sp < s1 || (sp == s1 && tp < t1) {
                p1 = p;
            }
        }
        let mut facets: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        if let Some(f) = self.find_facet(p0, p1) {
            seen.insert(f.1.clone(), 0);
            facets.push(f);
            queue.push_back(0);
        }
        while let Some(k) = queue.pop_front() {
            let ring = facets[k].0.clone();
            for i in 0..ring.len() {
                let (u, w) = (ring[i], ring[(i + 1) % ring.len()]);
                if let Some(f) = self.find_facet(w, u) {
                    if !seen.contains_key(&f.1) {
                        seen.insert(f.1.clone(), facets.len());
                        queue.push_back(facets.len());
                        facets.push(f);
                    }
                }
            }
        }
        facets
    }
}

fn bits(v: &[BigInt]) -> u64 {
    v.iter().map(|a| a.bits()).max().unwrap_or(0)
}

fn lift<T: Int>(x: Vec<BigInt>, y: Vec<BigInt>, v: Vec<BigInt>, conv: impl Fn(BigInt) -> T) -> Lift<T> {
    Lift {
        x: x.into_iter().map(&conv).collect(),
        y: y.into_iter().map(&conv).collect(),
        v: v.into_iter().map(&conv).collect(),
    }
}

/// Facets `(ring, members)` of the lower convex hull of the lifted points
/// `(x_i, y_i, v_i)`; points must be pairwise distinct in the plane and not all
/// collinear. Each facet is the convex polygon of all coplanar lifted points.
pub(crate) fn lower_hull_facets(pts: &[Point2], vals: &[Q]) -> Result<Vec<(Vec<usize>, Vec<usize>)>, GeomError> {
    if convex_hull_indices(pts).len() < 3 {
        return Err(GeomError::AllCollinear);
    }
    let lxy = lcm_denoms(pts.iter().flat_map(|p| [&p.x, &p.y]));
    let lv = lcm_denoms(vals.iter());
    // translate to the first point to keep magnitudes small
    let x: Vec<BigInt> = pts.iter().map(|p| scale_to_int(&(&p.x - &pts[0].x), &lxy)).collect();
    let y: Vec<BigInt> = pts.iter().map(|p| scale_to_int(&(&p.y - &pts[0].y), &lxy)).collect();
    let v: Vec<BigInt> = vals.iter().map(|a| scale_to_int(&(a - &vals[0]), &lv)).collect();
    let bxy = bits(&x).max(bits(&y)) + 1;
    let bv = bits(&v) + 1;
    if 2 * bxy + bv + 4 <= 126 {
        let l = lift(x, y, v, |b: BigInt| b.to_i128().expect("checked magnitude"));
        Ok(l.lower_hull())
    } else {
        Ok(lift(x, y, v, |b| b).lower_hull())
    }
}
