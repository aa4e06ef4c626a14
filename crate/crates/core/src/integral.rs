//! The weighted displacement integral over the normalized segment frame and
//! the subgradient-spreading diagnostics behind its lower bound.

use crate::error::{BoundError, GeomError};
use crate::geometry::{Point2, Polygon2, PwlFunction, Rect, Region, Rotation};
use crate::measures::{RegularityCertificate, Side};
use crate::rational::{from_f64, qi, sqrt_exact, to_f64, Q};
use crate::report::{BoundParams, BoundReport};
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Normalized frame around a segment: endpoints `a = (−ℓ, 0)`, `b = (ℓ, 0)`,
/// the rectangle `R_δ = [−ℓ/2, ℓ/2] × [0, δ]`, the weight offset `γ`, and the
/// rigid motion `u = R(p − c)` that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Half-length of the segment.
    #[serde(with = "crate::rational::serde_q")]
    pub ell: Q,
    #[serde(with = "crate::rational::serde_q")]
    pub delta: Q,
    pub gamma: f64,
    /// Flat deficiency of the segment.
    #[serde(with = "crate::rational::serde_q", default = "Q::zero")]
    pub eps: Q,
    /// Gauss nodes per quadrature panel.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "Rotation::identity")]
    pub rotation: Rotation,
    #[serde(default = "Point2::zero")]
    pub center: Point2,
}

fn default_nodes() -> usize {
    8
}

impl FrameConfig {
    pub fn new(ell: Q, delta: Q, gamma: f64) -> Self {
        FrameConfig {
            ell,
            delta,
            gamma,
            eps: Q::zero(),
            nodes: default_nodes(),
            rotation: Rotation::identity(),
            center: Point2::zero(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn a(&self) -> Point2 {
        Point2::new(-&self.ell, Q::zero())
    }

    pub fn b(&self) -> Point2 {
        Point2::new(self.ell.clone(), Q::zero())
    }

    pub fn r_delta(&self) -> Rect {
        let half = &self.ell / qi(2);
        Rect::axis(-&half, half, Q::zero(), self.delta.clone())
    }

    /// `Ω_{x⊥} = [−ℓ/2, ℓ/2] × [x⊥/2, 2x⊥]`, cut at height `δ`.
    pub fn omega(&self, x_perp: &Q) -> Option<Rect> {
        let half = &self.ell / qi(2);
        let lo = x_perp / qi(2);
        let hi = (x_perp * qi(2)).min(self.delta.clone());
        (lo <= hi).then(|| Rect::axis(-&half, half, lo, hi))
    }

    /// `Λ_{x⊥} = [−ℓ/4, ℓ/4] × [x⊥, 3x⊥/2]`, cut at height `δ`.
    pub fn lambda(&self, x_perp: &Q) -> Option<Rect> {
        let quarter = &self.ell / qi(4);
        let hi = (x_perp * crate::rational::q(3, 2)).min(self.delta.clone());
        (x_perp < &hi).then(|| Rect::axis(-&quarter, quarter, x_perp.clone(), hi))
    }

    fn ell_f(&self) -> f64 {
        to_f64(&self.ell)
    }

    fn delta_f(&self) -> f64 {
        to_f64(&self.delta)
    }
}

/// Moves `[x, y]` to `[(−ℓ, 0), (ℓ, 0)]` with `R_δ` inside the domain (on
/// either side of the segment), and subtracts the affine function that
/// vanishes at both endpoints and puts `0` into the subdifferential along the
/// segment. The vertical tilt is the admissible one closest to zero, so
/// already-normalized input is returned unchanged.
pub fn normalize_frame(
    psi: &PwlFunction,
    x: &Point2,
    y: &Point2,
    delta: &Q,
) -> Result<(PwlFunction, FrameConfig), BoundError> {
    if x == y {
        return Err(GeomError::Invalid("segment endpoints coincide".into()).into());
    }
    if !delta.is_positive() {
        return Err(GeomError::Invalid("delta must be positive".into()).into());
    }
    let (fx, fy) = (psi.eval(x)?, psi.eval(y)?);
    let v = y.sub(x);
    let len = sqrt_exact(&v.norm_sq()).ok_or(GeomError::IrrationalFrame)?;
    let ell = &len / qi(2);
    let center = x.midpoint(y);
    let base = Rotation { cos: &v.x / &len, sin: -&v.y / &len };
    let flip = base.compose(&Rotation { cos: qi(-1), sin: Q::zero() });
    let mut cfg = FrameConfig::new(ell.clone(), delta.clone(), to_f64(delta) / 2.0);
    let rd = cfg.r_delta();
    for (rot, fa, fb) in [(base, &fx, &fy), (flip, &fy, &fx)] {
        let back = rot.inverse();
        if !rd.corners().iter().all(|c| psi.domain().contains(&back.apply(c).add(&center))) {
            continue;
        }
        let alpha = (fa + fb) / qi(2);
        let slope = (fb - fa) / (&ell * qi(2));
        let tilted = psi.rigid_affine(&rot, &center, &alpha, &Point2::new(slope, Q::zero()));
        let (eps, t) = tilted.flat_deficiency_argmax(&cfg.a(), &cfg.b())?;
        let m = cfg.a().lerp(&cfg.b(), &t);
        // exact slice {z₁ = 0} of the subdifferential, unbounded at domain-boundary points
        let sub = tilted.subdifferential(&m)?;
        let (mut lo, mut hi): (Option<Q>, Option<Q>) = (None, None);
        for (d, c) in sub.constraints() {
            if d.y.is_positive() {
                let v = c / &d.y;
                hi = Some(hi.map_or(v.clone(), |h| h.min(v)));
            } else if d.y.is_negative() {
                let v = c / &d.y;
                lo = Some(lo.map_or(v.clone(), |l| l.max(v)));
            } else if c.is_negative() {
                return Err(GeomError::Invalid("no horizontal subgradient on the segment".into()).into());
            }
        }
        let mut tilt = Q::zero();
        if let Some(l) = lo {
            tilt = tilt.max(l);
        }
        if let Some(h) = hi {
            tilt = tilt.min(h);
        }
        let out = if tilt.is_zero() {
            tilted
        } else {
            tilted.rigid_affine(&Rotation::identity(), &Point2::zero(), &Q::zero(), &Point2::new(Q::zero(), tilt))
        };
        cfg.eps = eps;
        cfg.rotation = rot;
        cfg.center = center;
        return Ok((out, cfg));
    }
    Err(GeomError::OutOfDomain(format!("no {delta}-rectangle beside [{x}, {y}]")).into())
}

#[derive(Clone, Debug)]
struct Piece {
    poly: Vec<[f64; 2]>,
    ymin: f64,
    ymax: f64,
    area: f64,
    g: f64,
}

impl Piece {
    fn width(&self, s: f64) -> f64 {
        if s < self.ymin || s > self.ymax {
            return 0.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = self.poly.len();
        for i in 0..n {
            let (p, q) = (self.poly[i], self.poly[(i + 1) % n]);
            if (p[1] - s) * (q[1] - s) > 0.0 {
                continue;
            }
            let xs = if p[1] == q[1] {
                [p[0], q[0]]
            } else {
                let x = p[0] + (s - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
                [x, x]
            };
            for x in xs {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (hi - lo).max(0.0)
    }

    fn below(&self, t: f64) -> f64 {
        if t <= self.ymin {
            0.0
        } else if t >= self.ymax {
            self.area
        } else {
            area(&clip(&self.poly, [0.0, 1.0], t))
        }
    }
}

fn clip(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let k = poly.len();
    for i in 0..k {
        let (p, q) = (poly[i], poly[(i + 1) % k]);
        let (vp, vq) = (n[0] * p[0] + n[1] * p[1] - c, n[0] * q[0] + n[1] * q[1] - c);
        if vp <= 0.0 {
            out.push(p);
        }
        if (vp < 0.0 && vq > 0.0) || (vp > 0.0 && vq < 0.0) {
            let t = vp / (vp - vq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let k = poly.len();
    let s: f64 = (0..k).map(|i| {
        let (p, q) = (poly[i], poly[(i + 1) % k]);
        p[0] * q[1] - p[1] * q[0]
    }).sum();
    0.5 * s.abs()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Facet pieces of `R_δ` with their vertical gradient component, sorted by it.
fn pieces(psi: &PwlFunction, cfg: &FrameConfig) -> Vec<Piece> {
    let (hw, d) = (cfg.ell_f() / 2.0, cfg.delta_f());
    let mut out: Vec<Piece> = psi
        .facets()
        .iter()
        .filter_map(|f| {
            let mut poly: Vec<[f64; 2]> = f.polygon.vertices.iter().map(Point2::to_f64).collect();
            for (n, c) in [([1.0, 0.0], hw), ([-1.0, 0.0], hw), ([0.0, 1.0], d), ([0.0, -1.0], 0.0)] {
                poly = clip(&poly, n, c);
            }
            let a = area(&poly);
            if poly.len() < 3 || a <= 0.0 {
                return None;
            }
            let ymin = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let ymax = poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            Some(Piece { poly, ymin, ymax, area: a, g: to_f64(&f.grad.y) })
        })
        .collect();
    out.sort_by(|p, q| p.g.total_cmp(&q.g));
    out
}

/// `∬_{R_δ×R_δ} |T⊥(y) − T⊥(x)| (x⊥+γ)⁻² 1{x⊥/2 ≤ y⊥ ≤ 2x⊥} dy dx`.
///
/// Both horizontal integrals are done exactly from facet widths and areas;
/// the remaining height integral is piecewise polynomial over `(s+γ)²` and is
/// integrated by Gauss panels split at every kink and graded toward `−γ`.
pub fn displacement_integral(psi: &PwlFunction, cfg: &FrameConfig) -> Result<f64, BoundError> {
    let gamma = cfg.gamma;
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(BoundError::NonPositiveGamma);
    }
    let d = cfg.delta_f();
    let ps = pieces(psi, cfg);
    if ps.is_empty() {
        return Ok(0.0);
    }
    let mut cuts = vec![0.0, d / 2.0, d];
    for p in &ps {
        for v in &p.poly {
            for c in [v[1], v[1] / 2.0, v[1] * 2.0] {
                if c > 0.0 && c < d {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * d);
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        let mut a = w[0];
        while a < w[1] {
            let b = (2.0 * a + gamma).min(w[1]);
            panels.push((a, b));
            a = b;
        }
    }
    let rule = gauss_legendre(cfg.nodes.max(1));
    let tot_a_at = |s: f64| -> f64 {
        let top = (2.0 * s).min(d);
        let a: Vec<f64> = ps.iter().map(|p| p.below(top) - p.below(s / 2.0)).collect();
        let (ta, tga) = ps.iter().zip(&a).fold((0.0, 0.0), |(x, y), (p, ai)| (x + ai, y + p.g * ai));
        let (mut ca, mut cga, mut f) = (0.0, 0.0, 0.0);
        for (p, ai) in ps.iter().zip(&a) {
            let w = p.width(s);
            if w > 0.0 {
                let below = p.g * ca - cga;
                let above = (tga - cga - p.g * ai) - p.g * (ta - ca - ai);
                f += w * (below + above);
            }
            ca += ai;
            cga += p.g * ai;
        }
        f / ((s + gamma) * (s + gamma))
    };
    let parts: Vec<f64> = panels
        .par_iter()
        .map(|&(a, b)| {
            let (m, r) = ((a + b) / 2.0, (b - a) / 2.0);
            rule.iter().map(|&(x, w)| w * r * tot_a_at(m + r * x)).sum()
        })
        .collect();
    Ok(parts.iter().sum())
}

/// `C K ℓ² (√log(1 + δ/γ) + 1)`, valid for `γ ≥ ε/K`.
pub fn upper_bound_rhs(cfg: &FrameConfig, k: f64, c: f64) -> Result<f64, BoundError> {
    if k <= 0.0 {
        return Err(BoundError::ZeroK);
    }
    if cfg.gamma.is_nan() || cfg.gamma <= 0.0 {
        return Err(BoundError::NonPositiveGamma);
    }
    if cfg.gamma < to_f64(&cfg.eps) / k {
        return Err(BoundError::PreconditionGamma);
    }
    let l = cfg.ell_f();
    Ok(c * k * l * l * ((1.0 + cfg.delta_f() / cfg.gamma).ln().sqrt() + 1.0))
}

/// `ℓ⁴/(Cλ₁λ₂K) · min(1, ℓ²/(λ₁λ₂K²)) · log(½ + δ/(2γ))` under the length
/// conditions and `γ ≤ δ`.
pub fn lower_bound_rhs(
    cfg: &FrameConfig,
    k: f64,
    lam1: f64,
    lam2: f64,
    h1: f64,
    h2: f64,
    c: f64,
) -> Result<f64, BoundError> {
    if k <= 0.0 {
        return Err(BoundError::ZeroK);
    }
    if cfg.gamma.is_nan() || cfg.gamma <= 0.0 {
        return Err(BoundError::NonPositiveGamma);
    }
    let (l, d, ll) = (cfg.ell_f(), cfg.delta_f(), lam1 * lam2);
    if l < 2.0 * h1 {
        return Err(BoundError::PreconditionEll(format!("ell {l} < 2h1 {}", 2.0 * h1)));
    }
    if l * l < c * k * ll * h2 {
        return Err(BoundError::PreconditionEll(format!("ell^2 {} < C K lam1 lam2 h2 {}", l * l, c * k * ll * h2)));
    }
    if cfg.gamma > d {
        return Err(BoundError::PreconditionEll(format!("gamma {} > delta {d}", cfg.gamma)));
    }
    let m = (l * l / (ll * k * k)).min(1.0);
    Ok(l.powi(4) / (c * ll * k) * m * (0.5 + d / (2.0 * cfg.gamma)).ln())
}

/// Checks `|z∥| ≤ (2/ℓ)(K|y⊥| + ε)` exactly for every interior sample `y` in
/// `R_δ` and every vertex `z` of `∂ψ̃(y)`. `lhs` is the largest excess
/// `|z∥| − bound`, compared against 0.
pub fn subdiff_slab_bound_check(psi: &PwlFunction, cfg: &FrameConfig, k: f64, eps: f64) -> BoundReport {
    let params = BoundParams {
        ell: cfg.ell_f(),
        delta: cfg.delta_f(),
        k,
        eps,
        ..BoundParams::default()
    };
    let (Some(kq), Some(eq)) = (from_f64(k), from_f64(eps)) else {
        let mut r = BoundReport::new("slab", 0.0, 0.0, params);
        r.note = Some("non-finite K or eps".into());
        return r;
    };
    let rd = cfg.r_delta();
    let mut worst: Option<(Q, usize)> = None;
    for i in 0..psi.len() {
        let y = &psi.points()[i];
        if !psi.is_on_hull(i) || psi.is_boundary_sample(i) || !rd.contains(y) {
            continue;
        }
        let bound = (&kq * y.y.abs() + &eq) * qi(2) / &cfg.ell;
        for z in &psi.subdiff_sample(i).polygon.vertices {
            let excess = z.x.abs() - &bound;
            if worst.as_ref().is_none_or(|(w, _)| &excess > w) {
                worst = Some((excess, i));
            }
        }
    }
    let mut r = BoundReport::new("slab", worst.as_ref().map_or(0.0, |(w, _)| to_f64(w)), 0.0, params);
    if let Some((w, i)) = worst {
        r.verdict = crate::report::Verdict::from_bool(!w.is_positive());
        if w.is_positive() {
            r.witness = Some(vec![i]);
        }
    }
    r
}

/// `diam ∂ψ̃(U_δ) ≥ √(δℓ/(λ₁λ₂))` with `U_δ` the `δ`-neighbourhood of `[a, b]`;
/// `h₁, λ₁` and `h₂, λ₂` are read from the source lower and target upper
/// certificates.
pub fn diam_lower_bound_check(
    psi: &PwlFunction,
    cfg: &FrameConfig,
    mu_cert: &RegularityCertificate,
    nu_cert: &RegularityCertificate,
) -> Result<BoundReport, BoundError> {
    let (h1, lam1) = (to_f64(&mu_cert.h), to_f64(&mu_cert.lambda));
    let (h2, lam2) = (to_f64(&nu_cert.h), to_f64(&nu_cert.lambda));
    let (l, d) = (cfg.ell_f(), cfg.delta_f());
    if h1 > d.min(l) {
        return Err(BoundError::PreconditionScale(format!("h1 {h1} > min(delta, ell) {}", d.min(l))));
    }
    if h2 * h2 >= d * l / (lam1 * lam2) {
        return Err(BoundError::PreconditionScale(format!("h2^2 {} >= delta ell/(lam1 lam2)", h2 * h2)));
    }
    let region = Region::Neighborhood { a: cfg.a(), b: cfg.b(), delta: cfg.delta.clone() };
    let diam = psi.diam_subdiff(&region)?;
    let params = BoundParams { ell: l, delta: d, h1, h2, lam1, lam2, ..BoundParams::default() };
    Ok(BoundReport::new("diam-lower", (d * l / (lam1 * lam2)).sqrt(), diam, params).with_preconditions(vec![
        ("mu-lower-regular", mu_cert.holds && mu_cert.side == Side::Lower),
        ("nu-upper-regular", nu_cert.holds && nu_cert.side == Side::Upper),
    ]))
}

/// `η = ℓ²/(C λ₁ λ₂ K)`.
pub fn eta_value(ell: f64, lam1: f64, lam2: f64, k: f64, c: f64) -> f64 {
    ell * ell / (c * lam1 * lam2 * k)
}

/// Facets meeting the rectangle, each with a vertex of the overlap.
fn facets_meeting(psi: &PwlFunction, r: &Rect) -> Vec<(usize, Polygon2)> {
    let (x0, x1, y0, y1) = r.bounds();
    psi.facets()
        .iter()
        .enumerate()
        .filter_map(|(k, f)| {
            let p = f
                .polygon
                .clip(&Point2::from_ints(1, 0), &x1)
                .clip(&Point2::from_ints(-1, 0), &-&x0)
                .clip(&Point2::from_ints(0, 1), &y1)
                .clip(&Point2::from_ints(0, -1), &-&y0);
            (!p.is_empty()).then_some((k, p))
        })
        .collect()
}

/// A point of `Λ_{x⊥}` with a subgradient whose vertical part is at least
/// `3η` away from `ξ`: the lowest vertex of the overlap with the facet of
/// largest spread. `None` when no facet meeting `Λ_{x⊥}` qualifies.
pub fn spread_witness_search(psi: &PwlFunction, cfg: &FrameConfig, x_perp: &Q, xi: f64, eta: f64) -> Option<Point2> {
    let lam = cfg.lambda(x_perp)?;
    let mut best: Option<(f64, Point2)> = None;
    for (k, p) in facets_meeting(psi, &lam) {
        let spread = (to_f64(&psi.facets()[k].grad.y) - xi).abs();
        if spread >= 3.0 * eta && best.as_ref().is_none_or(|(s, _)| spread > *s) {
            let v = p.vertices.iter().min().cloned().expect("non-empty overlap");
            best = Some((spread, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Parameters of the cone-propagation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeQuery {
    #[serde(with = "crate::rational::serde_q")]
    pub x_perp: Q,
    pub xi: f64,
    pub eta: f64,
    pub k: f64,
    pub c: f64,
}

/// For `y′ ≠ y″` in `Ω_{x⊥}`, both with a subgradient in `|z⊥ − ξ| ≤ η`
/// and `|tan∠([y′, y″], e⊥)| ≤ ℓη/(CKx⊥)`: whether every point of the open
/// segment has `∂ψ̃ ⊂ {|z⊥ − ξ| ≤ 2η}`.
pub fn cone_propagation_check(
    psi: &PwlFunction,
    cfg: &FrameConfig,
    y1: &Point2,
    y2: &Point2,
    q: &ConeQuery,
) -> Result<bool, BoundError> {
    let bad = |m: &str| Err(BoundError::PreconditionAngle(m.to_string()));
    if y1 == y2 {
        return bad("endpoints coincide");
    }
    let Some(om) = cfg.omega(&q.x_perp) else {
        return bad("empty strip");
    };
    for y in [y1, y2] {
        if !om.contains(y) {
            return bad(&format!("{y} outside the strip"));
        }
        let sub = psi.subdifferential(y)?.polygon;
        let lo = sub.vertices.iter().map(|z| to_f64(&z.y)).fold(f64::INFINITY, f64::min);
        let hi = sub.vertices.iter().map(|z| to_f64(&z.y)).fold(f64::NEG_INFINITY, f64::max);
        if hi < q.xi - q.eta || lo > q.xi + q.eta {
            return bad(&format!("no subgradient within eta of xi at {y}"));
        }
    }
    let dv = y2.sub(y1);
    let (dp, dn) = (to_f64(&dv.x).abs(), to_f64(&dv.y).abs());
    let tan_max = cfg.ell_f() * q.eta / (q.c * q.k * to_f64(&q.x_perp));
    if dp > tan_max * dn {
        return bad(&format!("tangent {} exceeds {tan_max}", dp / dn));
    }
    let one = Q::from_integer(1.into());
    Ok(psi
        .segment_pieces(y1, y2)
        .into_iter()
        .filter(|(_, t0, t1)| t1.is_positive() && t0 < &one)
        .all(|(k, _, _)| (to_f64(&psi.facets()[k].grad.y) - q.xi).abs() <= 2.0 * q.eta))
}

/// Area of `{y ∈ Ω_{x⊥} : |z⊥ − ξ| > η for all z ∈ ∂ψ̃(y)}`, from the
/// facets whose gradient is more than `η` from `ξ`.
pub fn concentration_set_measure(psi: &PwlFunction, cfg: &FrameConfig, x_perp: &Q, xi: f64, eta: f64) -> f64 {
    let Some(om) = cfg.omega(x_perp) else {
        return 0.0;
    };
    facets_meeting(psi, &om)
        .into_iter()
        .filter(|(k, _)| (to_f64(&psi.facets()[*k].grad.y) - xi).abs() > eta)
        .map(|(_, p)| to_f64(&p.area()))
        .sum()
}

/// `(ℓx⊥/C) · min(1, ℓ²/(λ₁λ₂K²))`.
pub fn concentration_lower_bound(cfg: &FrameConfig, x_perp: f64, lam1: f64, lam2: f64, k: f64, c: f64) -> f64 {
    let l = cfg.ell_f();
    l * x_perp / c * (l * l / (lam1 * lam2 * k * k)).min(1.0)
}

/// Distinct vertical gradient components over `R_δ` and their midpoints.
pub fn xi_grid(psi: &PwlFunction, cfg: &FrameConfig) -> Vec<f64> {
    let mut g: Vec<f64> = facets_meeting(psi, &cfg.r_delta()).into_iter().map(|(k, _)| to_f64(&psi.facets()[k].grad.y)).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    let mids: Vec<f64> = g.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    g.extend(mids);
    g.sort_by(f64::total_cmp);
    g
}

/// One row of the concentration diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub x_perp: f64,
    pub xi: f64,
    pub eta: f64,
    pub witness: Option<Point2>,
    pub measure: f64,
    pub lower: f64,
}

/// Witness search and concentration measure over `x⊥ ∈ heights` and the `ξ` grid.
pub fn concentration_table(psi: &PwlFunction, cfg: &FrameConfig, p: &BoundParams, heights: &[Q]) -> Vec<ConcentrationRow> {
    let eta = eta_value(cfg.ell_f(), p.lam1, p.lam2, p.k, p.c);
    let xis = xi_grid(psi, cfg);
    let mut rows = Vec::new();
    for h in heights {
        let xp = to_f64(h);
        let lower = concentration_lower_bound(cfg, xp, p.lam1, p.lam2, p.k, p.c);
        for &xi in &xis {
            rows.push(ConcentrationRow {
                x_perp: xp,
                xi,
                eta,
                witness: spread_witness_search(psi, cfg, h, xi, eta),
                measure: concentration_set_measure(psi, cfg, h, xi, eta),
                lower,
            });
        }
    }
    rows
}

/// Both integral bounds on one frame: `lower ≤ I` with `C_low` and `I ≤ upper`
/// with `C_up`. `p` supplies `K`, `λ₁, λ₂`, `h₁, h₂`; `certified` records
/// whether both regularity certificates hold.
pub fn sandwich_check(
    psi: &PwlFunction,
    cfg: &FrameConfig,
    p: &BoundParams,
    c_low: f64,
    c_up: f64,
    certified: bool,
) -> Result<(BoundReport, BoundReport), BoundError> {
    let integral = displacement_integral(psi, cfg)?;
    let (l, d, g, eps) = (cfg.ell_f(), cfg.delta_f(), cfg.gamma, to_f64(&cfg.eps));
    let base = BoundParams { ell: l, delta: d, eps, ..p.clone() };
    let k = p.k;
    let ll = p.lam1 * p.lam2;
    let up_rhs = c_up * k * l * l * ((1.0 + d / g).ln().sqrt() + 1.0);
    let upper = BoundReport::new("upper", integral, up_rhs, BoundParams { c: c_up, ..base.clone() })
        .with_gamma(g)
        .with_preconditions(vec![("K>0", k > 0.0), ("gamma>=eps/K", g >= eps / k)]);
    let low_lhs = l.powi(4) / (c_low * ll * k) * (l * l / (ll * k * k)).min(1.0) * (0.5 + d / (2.0 * g)).ln();
    let gamma0 = (eps / k).max(2.0 * p.h1).max(l * p.h2 / (c_low * k));
    let lower = BoundReport::new("lower", low_lhs, integral, BoundParams { c: c_low, ..base })
        .with_gamma(g)
        .with_preconditions(vec![
            ("K>0", k > 0.0),
            ("ell>=2h1", l >= 2.0 * p.h1),
            ("ell^2>=C*K*lam1*lam2*h2", l * l >= c_low * k * ll * p.h2),
            ("gamma>=gamma0", g >= gamma0),
            ("gamma<=delta", g <= d),
            ("certified", certified),
        ]);
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn piece_width_and_area() {
        let p = Piece {
            poly: vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]],
            ymin: 0.0,
            ymax: 2.0,
            area: 2.0,
            g: 0.0,
        };
        assert!((p.width(0.5) - 1.5).abs() < 1e-15);
        assert!((p.below(1.0) - 1.5).abs() < 1e-15);
        assert_eq!(p.below(3.0), 2.0);
    }

    #[test]
    fn frame_regions() {
        let cfg = FrameConfig::new(qi(2), qi(1), 0.1);
        assert_eq!(cfg.r_delta(), Rect::axis(qi(-1), qi(1), qi(0), qi(1)));
        assert_eq!(cfg.omega(&q(1, 4)), Some(Rect::axis(qi(-1), qi(1), q(1, 8), q(1, 2))));
        assert_eq!(cfg.omega(&qi(1)), Some(Rect::axis(qi(-1), qi(1), q(1, 2), qi(1))));
        assert_eq!(cfg.lambda(&qi(1)), None);
    }
}
