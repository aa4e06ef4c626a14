//! Discrete measures, lattices and the rectangle-density regularity checker.

use crate::error::MeasureError;
use crate::geometry::{Point2, Rect, Rotation};
use crate::rational::{lcm_denoms, qi, scale_to_int, to_f64, Q, QS};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Finite measure `Σ m_i δ_{x_i}` with positive rational masses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedPointCloud {
    atoms: Vec<(Point2, Q)>,
}

#[derive(Serialize, Deserialize)]
struct CloudJson {
    atoms: Vec<[QS; 3]>,
}

impl Serialize for WeightedPointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CloudJson {
            atoms: self
                .atoms
                .iter()
                .map(|(p, m)| [QS(p.x.clone()), QS(p.y.clone()), QS(m.clone())])
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedPointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = CloudJson::deserialize(d)?;
        let atoms = raw.atoms.into_iter().map(|[x, y, m]| (Point2::new(x.0, y.0), m.0)).collect();
        WeightedPointCloud::new(atoms).map_err(serde::de::Error::custom)
    }
}

impl WeightedPointCloud {
    pub fn new(atoms: Vec<(Point2, Q)>) -> Result<Self, MeasureError> {
        if let Some((p, _)) = atoms.iter().find(|(_, m)| !m.is_positive()) {
            return Err(MeasureError::Invalid(format!("non-positive mass at {p}")));
        }
        let mut pts: Vec<&Point2> = atoms.iter().map(|(p, _)| p).collect();
        pts.sort();
        if let Some(w) = pts.windows(2).find(|w| w[0] == w[1]) {
            return Err(MeasureError::Invalid(format!("repeated atom {}", w[0])));
        }
        Ok(WeightedPointCloud { atoms })
    }

    pub fn empty() -> Self {
        WeightedPointCloud { atoms: Vec::new() }
    }

    /// Merges repeated points by adding their masses; drops zero masses.
    pub fn from_merged(atoms: Vec<(Point2, Q)>) -> Result<Self, MeasureError> {
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(Point2, Q)> = Vec::new();
        for (p, m) in sorted {
            match out.last_mut() {
                Some((q, acc)) if *q == p => *acc += m,
                _ => out.push((p, m)),
            }
        }
        out.retain(|(_, m)| !m.is_zero());
        WeightedPointCloud::new(out)
    }

    pub fn atoms(&self) -> &[(Point2, Q)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point2 {
        &self.atoms[i].0
    }

    pub fn mass(&self, i: usize) -> &Q {
        &self.atoms[i].1
    }

    pub fn points(&self) -> Vec<Point2> {
        self.atoms.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn total_mass(&self) -> Q {
        self.atoms.iter().fold(Q::zero(), |a, (_, m)| a + m)
    }

    pub fn scale_masses(&self, t: &Q) -> Result<Self, MeasureError> {
        WeightedPointCloud::new(self.atoms.iter().map(|(p, m)| (p.clone(), m * t)).collect())
    }

    /// Pushes atoms forward by an injective map.
    pub fn map_points(&self, f: impl Fn(&Point2) -> Point2) -> Result<Self, MeasureError> {
        WeightedPointCloud::new(self.atoms.iter().map(|(p, m)| (f(p), m.clone())).collect())
    }

    pub fn bbox(&self) -> Option<(Q, Q, Q, Q)> {
        let first = &self.atoms.first()?.0;
        let mut b = (first.x.clone(), first.x.clone(), first.y.clone(), first.y.clone());
        for (p, _) in &self.atoms {
            if p.x < b.0 {
                b.0 = p.x.clone();
            }
            if p.x > b.1 {
                b.1 = p.x.clone();
            }
            if p.y < b.2 {
                b.2 = p.y.clone();
            }
            if p.y > b.3 {
                b.3 = p.y.clone();
            }
        }
        Some(b)
    }
}

/// Mass of the closed rectangle.
pub fn rect_mass(m: &WeightedPointCloud, r: &Rect) -> Q {
    m.atoms.iter().filter(|(p, _)| r.contains(p)).fold(Q::zero(), |a, (_, w)| a + w)
}

/// Grid with step `h` centred in `bbox`; a side shorter than `h` gets one
/// row or column through its centre.
pub fn make_lattice(bbox: &Rect, h: &Q, mass_per_point: &Q) -> Result<WeightedPointCloud, MeasureError> {
    if !h.is_positive() {
        return Err(MeasureError::InvalidScale);
    }
    if !bbox.half_w.is_positive() || !bbox.half_h.is_positive() {
        return Err(MeasureError::Invalid("degenerate bounding box".into()));
    }
    let steps = |side: Q| -> (i64, Q) {
        let n = (&side / h).floor().to_integer().to_i64().unwrap_or(i64::MAX);
        let offset = (side - h * qi(n)) / qi(2);
        (n, offset)
    };
    let (nx, ox) = steps(bbox.width());
    let (ny, oy) = steps(bbox.height());
    let mut atoms = Vec::with_capacity(((nx + 1) * (ny + 1)) as usize);
    for j in 0..=ny {
        for i in 0..=nx {
            let local = Point2::new(-&bbox.half_w + &ox + h * qi(i), -&bbox.half_h + &oy + h * qi(j));
            atoms.push((bbox.center.add(&bbox.rotation.apply(&local)), mass_per_point.clone()));
        }
    }
    WeightedPointCloud::new(atoms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `μ(R) ≥ |R|/λ`
    Lower,
    /// `ν(R) ≤ λ|R|`
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityCertificate {
    pub side: Side,
    #[serde(with = "crate::rational::serde_q")]
    pub h: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub lambda: Q,
    pub domain: Rect,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Rect>,
    /// False when the axis-aligned sweep fell back to bounded windows.
    pub exhaustive_axis: bool,
    pub angle_grid: usize,
    pub rectangles_checked: u64,
}

/// Axis-aligned sweeps above this many candidate pairs use bounded windows.
pub const AXIS_BUDGET: u64 = 40_000_000;

/// Checks the density condition over the critical rectangles with both sides
/// at least `h` inside `domain`. Axis-aligned rectangles are covered exactly
/// (up to the window fallback for the lower side); the other orientations
/// `kπ/angle_grid` are sampled.
pub fn check_regularity(
    m: &WeightedPointCloud,
    domain: &Rect,
    h: &Q,
    lambda: &Q,
    side: Side,
    angle_grid: usize,
) -> Result<RegularityCertificate, MeasureError> {
    if !h.is_positive() {
        return Err(MeasureError::InvalidScale);
    }
    if !lambda.is_positive() {
        return Err(MeasureError::Invalid("density constant must be positive".into()));
    }
    let angle_grid = angle_grid.max(1);
    let mut cert = RegularityCertificate {
        side,
        h: h.clone(),
        lambda: lambda.clone(),
        domain: domain.clone(),
        holds: true,
        witness: None,
        exhaustive_axis: true,
        angle_grid,
        rectangles_checked: 0,
    };
    if domain.width() < *h || domain.height() < *h {
        return Ok(cert);
    }
    for k in 0..angle_grid {
        let rot = if k == 0 {
            Rotation::identity()
        } else {
            Rotation::near(std::f64::consts::PI * k as f64 / angle_grid as f64, 64)
        };
        let found = if k == 0 {
            let (found, exhaustive, count) = axis_sweep(m, domain, h, lambda, side);
            cert.exhaustive_axis = exhaustive;
            cert.rectangles_checked += count;
            found
        } else {
            let (found, count) = rotated_sample(m, domain, h, lambda, side, &rot);
            cert.rectangles_checked += count;
            found
        };
        if let Some(w) = found {
            cert.holds = false;
            cert.witness = Some(w);
            break;
        }
    }
    Ok(cert)
}

fn violates(m: &WeightedPointCloud, r: &Rect, lambda: &Q, side: Side) -> bool {
    let mass = rect_mass(m, r);
    match side {
        Side::Lower => mass * lambda < r.area(),
        Side::Upper => mass > lambda * r.area(),
    }
}

/// One axis of a candidate rectangle: atom index range `[lo, hi)` in the
/// sorted coordinate list, extent `[l, r]` and whether the extent is a
/// supremum (open ends) rather than attained.
#[derive(Clone, Debug)]
struct AxisCand {
    lo: usize,
    hi: usize,
    l: usize,
    r: usize,
    open: bool,
}

struct Axis {
    /// Distinct atom coordinates inside the domain, as integers.
    coords: Vec<i128>,
    /// Candidate boundaries: coordinates plus domain ends.
    bounds: Vec<i128>,
}

impl Axis {
    fn width(&self, c: &AxisCand) -> i128 {
        self.bounds[c.r] - self.bounds[c.l]
    }

    fn lower_cands(&self, h: i128, max_w: Option<i128>) -> Vec<AxisCand> {
        let b = &self.bounds;
        let mut out = Vec::new();
        for l in 0..b.len() {
            for r in l + 1..b.len() {
                let w = b[r] - b[l];
                if w < h {
                    continue;
                }
                if max_w.is_some_and(|mw| w > mw) {
                    break;
                }
                let (lo, hi, open) = if w == h {
                    (self.coords.partition_point(|&x| x < b[l]), self.coords.partition_point(|&x| x <= b[r]), false)
                } else {
                    (self.coords.partition_point(|&x| x <= b[l]), self.coords.partition_point(|&x| x < b[r]), true)
                };
                out.push(AxisCand { lo, hi, l, r, open });
            }
        }
        out
    }

    /// Tight spans of width in `[h, 2h]` plus width-`h` windows anchored at
    /// each coordinate; every rectangle with sides ≥ h splits into pieces
    /// dominated by these.
    fn upper_cands(&mut self, h: i128) -> Vec<AxisCand> {
        let (dlo, dhi) = (self.bounds[0], *self.bounds.last().unwrap());
        let mut extra = Vec::new();
        for &x in &self.coords {
            let (a, b) = if x + h <= dhi { (x, x + h) } else { (dhi - h, dhi) };
            extra.push(a.max(dlo));
            extra.push(b);
        }
        self.bounds.extend(extra);
        self.bounds.sort_unstable();
        self.bounds.dedup();
        let b = &self.bounds;
        let idx = |v: i128| b.binary_search(&v).unwrap();
        let mut out = Vec::new();
        let c = &self.coords;
        for a in 0..c.len() {
            for e in a..c.len() {
                let w = c[e] - c[a];
                if w > 2 * h {
                    break;
                }
                if w >= h {
                    out.push(AxisCand { lo: a, hi: e + 1, l: idx(c[a]), r: idx(c[e]), open: false });
                }
            }
        }
        for &x in c {
            let (l, r) = if x + h <= dhi { (x, x + h) } else { (dhi - h, dhi) };
            let lo = c.partition_point(|&v| v < l);
            let hi = c.partition_point(|&v| v <= r);
            out.push(AxisCand { lo, hi, l: idx(l), r: idx(r), open: false });
        }
        out
    }
}

fn to_i128(x: &BigInt) -> Option<i128> {
    x.to_i128().filter(|v| v.unsigned_abs() < (1u128 << 60))
}

/// Returns (first violation, exhaustive flag, candidates examined).
fn axis_sweep(m: &WeightedPointCloud, domain: &Rect, h: &Q, lambda: &Q, side: Side) -> (Option<Rect>, bool, u64) {
    let local: Vec<(Point2, Q)> = m
        .atoms
        .iter()
        .filter(|(p, _)| domain.contains(p))
        .map(|(p, w)| (domain.local(p), w.clone()))
        .collect();
    let (hw, hh) = (domain.half_w.clone(), domain.half_h.clone());
    let mut qs: Vec<&Q> = vec![h, &hw, &hh];
    for (p, _) in &local {
        qs.push(&p.x);
        qs.push(&p.y);
    }
    let dc = lcm_denoms(qs);
    let dm = lcm_denoms(local.iter().map(|(_, w)| w));
    let conv = |x: &Q| to_i128(&scale_to_int(x, &dc));
    let (Some(hi), Some(wx), Some(wy)) = (conv(h), conv(&hw), conv(&hh)) else {
        return (brute_axis(m, domain, h, lambda, side), true, 0);
    };
    let mut pts = Vec::with_capacity(local.len());
    for (p, w) in &local {
        match (conv(&p.x), conv(&p.y), to_i128(&scale_to_int(w, &dm))) {
            (Some(x), Some(y), Some(w)) => pts.push((x, y, w)),
            _ => return (brute_axis(m, domain, h, lambda, side), true, 0),
        }
    }
    let mk_axis = |sel: fn(&(i128, i128, i128)) -> i128, half: i128| {
        let mut coords: Vec<i128> = pts.iter().map(sel).collect();
        coords.sort_unstable();
        coords.dedup();
        let mut bounds = coords.clone();
        bounds.push(-half);
        bounds.push(half);
        bounds.sort_unstable();
        bounds.dedup();
        Axis { coords, bounds }
    };
    let mut ax = mk_axis(|p| p.0, wx);
    let mut ay = mk_axis(|p| p.1, wy);
    // 2D prefix sums of integer masses over the coordinate grid
    let (nx, ny) = (ax.coords.len(), ay.coords.len());
    let mut pre = vec![0i128; (nx + 1) * (ny + 1)];
    for (x, y, w) in &pts {
        let i = ax.coords.binary_search(x).unwrap();
        let j = ay.coords.binary_search(y).unwrap();
        pre[(i + 1) * (ny + 1) + j + 1] += w;
    }
    for i in 1..=nx {
        for j in 1..=ny {
            let v = pre[i * (ny + 1) + j] + pre[(i - 1) * (ny + 1) + j] + pre[i * (ny + 1) + j - 1]
                - pre[(i - 1) * (ny + 1) + j - 1];
            pre[i * (ny + 1) + j] = v;
        }
    }
    let mass = |cx: &AxisCand, cy: &AxisCand| -> i128 {
        if cx.lo >= cx.hi || cy.lo >= cy.hi {
            return 0;
        }
        let g = |i: usize, j: usize| pre[i * (ny + 1) + j];
        g(cx.hi, cy.hi) - g(cx.lo, cy.hi) - g(cx.hi, cy.lo) + g(cx.lo, cy.lo)
    };
    // violation tests in integers: mass/dm vs area/dc² scaled by λ = ln/ld
    let (ln, ld) = (lambda.numer().clone(), lambda.denom().clone());
    let dc2 = &dc * &dc;
    let (a_fac, b_fac) = match side {
        Side::Lower => (&dc2 * &ln, &ld * &dm),
        Side::Upper => (&dc2 * &ld, &ln * &dm),
    };
    let small = (a_fac.to_i128(), b_fac.to_i128());
    let bad = |mu: i128, area: i128| -> bool {
        let lhs = small.0.and_then(|a| a.checked_mul(mu));
        let rhs = small.1.and_then(|b| b.checked_mul(area));
        match (lhs, rhs, side) {
            (Some(l), Some(r), Side::Lower) => l < r,
            (Some(l), Some(r), Side::Upper) => l > r,
            _ => {
                let l = &a_fac * BigInt::from(mu);
                let r = &b_fac * BigInt::from(area);
                if side == Side::Lower { l < r } else { l > r }
            }
        }
    };
    let (cx, cy, exhaustive) = match side {
        Side::Upper => (ax.upper_cands(hi), ay.upper_cands(hi), true),
        Side::Lower => {
            let full = (ax.lower_cands(hi, None), ay.lower_cands(hi, None));
            if (full.0.len() as u64) * (full.1.len() as u64) <= AXIS_BUDGET {
                (full.0, full.1, true)
            } else {
                (ax.lower_cands(hi, Some(4 * hi)), ay.lower_cands(hi, Some(4 * hi)), false)
            }
        }
    };
    let count = (cx.len() * cy.len()) as u64;
    let hit = cx.par_iter().find_map_first(|a| {
        let w = ax.width(a);
        cy.iter().find_map(|b| bad(mass(a, b), w * ay.width(b)).then(|| (a.clone(), b.clone())))
    });
    let witness = hit.map(|(a, b)| {
        let back = |v: i128| Q::new(BigInt::from(v), dc.clone());
        let ext = |ax: &Axis, c: &AxisCand| (back(ax.bounds[c.l]), back(ax.bounds[c.r]), c.open);
        let (xl, xr, xo) = ext(&ax, &a);
        let (yl, yr, yo) = ext(&ay, &b);
        realize_witness(m, domain, h, lambda, side, (xl, xr, xo), (yl, yr, yo))
    });
    (witness, exhaustive, count)
}

/// Turns a (possibly supremum) candidate into an attained violating rectangle
/// by shrinking open extents toward width `h`.
fn realize_witness(
    m: &WeightedPointCloud,
    domain: &Rect,
    h: &Q,
    lambda: &Q,
    side: Side,
    x: (Q, Q, bool),
    y: (Q, Q, bool),
) -> Rect {
    let build = |k: u32| {
        let shrink = |(l, r, open): &(Q, Q, bool)| {
            if !open {
                return (l.clone(), r.clone());
            }
            let s = (r - l - h) / qi(2) / Q::from_integer(BigInt::one() << k);
            (l + &s, r - &s)
        };
        let (x0, x1) = shrink(&x);
        let (y0, y1) = shrink(&y);
        let loc = Rect::axis(x0, x1, y0, y1);
        Rect {
            center: domain.center.add(&domain.rotation.apply(&loc.center)),
            half_w: loc.half_w,
            half_h: loc.half_h,
            rotation: domain.rotation.clone(),
        }
    };
    for k in 0..256 {
        let r = build(k);
        if violates(m, &r, lambda, side) {
            return r;
        }
    }
    build(256)
}

/// Exact rational fallback for coordinates too large for machine integers.
fn brute_axis(m: &WeightedPointCloud, domain: &Rect, h: &Q, lambda: &Q, side: Side) -> Option<Rect> {
    let local: Vec<Point2> = m.atoms.iter().filter(|(p, _)| domain.contains(p)).map(|(p, _)| domain.local(p)).collect();
    let mut xs: Vec<Q> = local.iter().map(|p| p.x.clone()).collect();
    let mut ys: Vec<Q> = local.iter().map(|p| p.y.clone()).collect();
    for (v, half) in [(&mut xs, &domain.half_w), (&mut ys, &domain.half_h)] {
        v.push(-half.clone());
        v.push(half.clone());
        v.sort();
        v.dedup();
    }
    let spans = |v: &[Q]| {
        let mut out = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let w = &v[j] - &v[i];
                if w >= *h {
                    out.push((v[i].clone(), v[j].clone(), w != *h && side == Side::Lower));
                }
                if side == Side::Upper && w < *h {
                    let hi = &v[i] + h;
                    if hi <= *v.last().unwrap() {
                        out.push((v[i].clone(), hi, false));
                    }
                }
            }
        }
        out
    };
    for x in spans(&xs) {
        for y in spans(&ys) {
            let sup = Rect::axis(x.0.clone(), x.1.clone(), y.0.clone(), y.1.clone());
            let r = realize_witness(m, domain, h, lambda, side, x.clone(), y.clone());
            let cand_area = sup.area();
            let inside = |p: &Point2| {
                let ok = |v: &Q, (l, r, open): &(Q, Q, bool)| if *open { l < v && v < r } else { l <= v && v <= r };
                ok(&p.x, &x) && ok(&p.y, &y)
            };
            let mu = m
                .atoms
                .iter()
                .filter(|(p, _)| domain.contains(p) && inside(&domain.local(p)))
                .fold(Q::zero(), |a, (_, w)| a + w);
            let bad = match side {
                Side::Lower => mu * lambda < cand_area,
                Side::Upper => mu > lambda * cand_area,
            };
            if bad {
                return Some(r);
            }
        }
    }
    None
}

/// Rotated frames: rectangles of sides `h` and `2h` anchored at atom
/// coordinates and at half-step offsets from them.
fn rotated_sample(
    m: &WeightedPointCloud,
    domain: &Rect,
    h: &Q,
    lambda: &Q,
    side: Side,
    rot: &Rotation,
) -> (Option<Rect>, u64) {
    let inv = rot.inverse();
    let mut local: Vec<([f64; 2], usize)> =
        m.atoms.iter().enumerate().map(|(i, (p, _))| (inv.apply(p).to_f64(), i)).collect();
    local.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
    let xs: Vec<f64> = local.iter().map(|(p, _)| p[0]).collect();
    let hf = to_f64(h);
    let margin = 1e-9 * (1.0 + hf);
    let half = h / qi(2);
    let two_h = h * qi(2);
    let dims = [(h.clone(), h.clone()), (h.clone(), two_h.clone()), (two_h.clone(), h.clone()), (two_h.clone(), two_h)];
    let mut cands = Vec::new();
    for (p, _) in &m.atoms {
        let a = inv.apply(p);
        for off in [Q::zero(), half.clone()] {
            for (w, ht) in &dims {
                let x0 = &a.x + &off;
                let y0 = &a.y + &off;
                cands.push((x0.clone(), &x0 + w, y0.clone(), &y0 + ht));
            }
        }
    }
    let count = cands.len() as u64;
    let hit = cands.par_iter().find_map_first(|(x0, x1, y0, y1)| {
        let loc = Rect::axis(x0.clone(), x1.clone(), y0.clone(), y1.clone());
        let r = Rect { center: rot.apply(&loc.center), half_w: loc.half_w, half_h: loc.half_h, rotation: rot.clone() };
        if !r.corners().iter().all(|c| domain.contains(c)) {
            return None;
        }
        // float prefilter on the mass, exact count only near the threshold
        let (fx0, fx1, fy0, fy1) = (to_f64(x0), to_f64(x1), to_f64(y0), to_f64(y1));
        let s = xs.partition_point(|&x| x < fx0 - margin);
        let e = xs.partition_point(|&x| x <= fx1 + margin);
        let mut sure = 0.0;
        let mut maybe = 0.0;
        for (p, i) in &local[s..e] {
            if p[1] < fy0 - margin || p[1] > fy1 + margin {
                continue;
            }
            let w = to_f64(m.mass(*i));
            if p[0] > fx0 + margin && p[0] < fx1 - margin && p[1] > fy0 + margin && p[1] < fy1 - margin {
                sure += w;
            } else {
                maybe += w;
            }
        }
        let area = (fx1 - fx0) * (fy1 - fy0);
        let lf = to_f64(lambda);
        let clear = match side {
            Side::Lower => sure * lf > area * (1.0 + 1e-9),
            Side::Upper => (sure + maybe) < lf * area * (1.0 - 1e-9),
        };
        if clear {
            return None;
        }
        violates(m, &r, lambda, side).then_some(r)
    });
    (hit, count)
}
