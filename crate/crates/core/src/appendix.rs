//! Finite-difference checks for smooth potentials sampled on grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AppendixError;
use crate::report::{BoundParams, BoundReport};

/// Largest supported grid, in nodes.
pub const MAX_NODES: usize = 33 * 33 * 33 * 33;
pub const MAX_DIM: usize = 4;
/// Slack added to every right-hand side.
pub const SLACK: f64 = 1e-6;

/// Values of a function on a uniform grid `lo + spacing·i`, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub lo: Vec<f64>,
    pub counts: Vec<usize>,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lo: Vec<f64>, counts: Vec<usize>, spacing: f64, values: Vec<f64>) -> Result<Self, AppendixError> {
        let g = GridFunction { lo, counts, spacing, values };
        g.validate()?;
        Ok(g)
    }

    pub fn sample(lo: Vec<f64>, counts: Vec<usize>, spacing: f64, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self, AppendixError> {
        let mut g = GridFunction { lo, counts, spacing, values: Vec::new() };
        g.check_shape()?;
        g.values = (0..g.len()).into_par_iter().map(|i| f(&g.point(i))).collect();
        Ok(g)
    }

    /// Grid with `m` nodes per axis spanning `[−r, r]ⁿ`.
    pub fn centered(n: usize, m: usize, r: f64, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self, AppendixError> {
        if m < 2 {
            return Err(AppendixError::GridTooSmall(format!("{m} nodes per axis")));
        }
        Self::sample(vec![-r; n], vec![m; n], 2.0 * r / (m - 1) as f64, f)
    }

    fn check_shape(&self) -> Result<(), AppendixError> {
        let n = self.dim();
        if n == 0 || n > MAX_DIM || self.lo.len() != n {
            return Err(AppendixError::InvalidDims(n, 0));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(AppendixError::GridTooSmall(format!("spacing {}", self.spacing)));
        }
        let total = self.counts.iter().try_fold(1usize, |a, &c| a.checked_mul(c));
        match total {
            Some(t) if t <= MAX_NODES => Ok(()),
            _ => Err(AppendixError::GridTooSmall(format!("more than {MAX_NODES} nodes"))),
        }
    }

    fn validate(&self) -> Result<(), AppendixError> {
        self.check_shape()?;
        if self.values.len() != self.len() {
            return Err(AppendixError::GridTooSmall(format!("{} values for {} nodes", self.values.len(), self.len())));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.counts[k + 1];
        }
        s
    }

    pub fn index(&self, i: usize) -> Vec<usize> {
        let mut rest = i;
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            out[k] = rest % self.counts[k];
            rest /= self.counts[k];
        }
        out
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.index(i).iter().zip(&self.lo).map(|(&j, &l)| l + self.spacing * j as f64).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.counts).map(|(&l, &c)| l + self.spacing * (c - 1) as f64).collect()
    }

    fn interior(&self, i: usize) -> bool {
        self.index(i).iter().zip(&self.counts).all(|(&j, &c)| j > 0 && j + 1 < c)
    }

    fn has_interior(&self) -> bool {
        self.counts.iter().all(|&c| c >= 3)
    }

    /// Central-difference gradient at an interior node.
    pub fn gradient_at(&self, i: usize) -> Vec<f64> {
        let s = self.strides();
        let v = &self.values;
        s.iter().map(|&sk| (v[i + sk] - v[i - sk]) / (2.0 * self.spacing)).collect()
    }

    /// Central-difference Hessian at an interior node.
    pub fn hessian_at(&self, i: usize) -> Vec<Vec<f64>> {
        let s = self.strides();
        let v = &self.values;
        let h2 = self.spacing * self.spacing;
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for a in 0..n {
            m[a][a] = (v[i + s[a]] - 2.0 * v[i] + v[i - s[a]]) / h2;
            for b in a + 1..n {
                let d = v[i + s[a] + s[b]] - v[i + s[a] - s[b]] - v[i - s[a] + s[b]] + v[i - s[a] - s[b]];
                m[a][b] = d / (4.0 * h2);
                m[b][a] = m[a][b];
            }
        }
        m
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let n = self.dim();
        let s = self.strides();
        let mut base = 0;
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let t = (x[k] - self.lo[k]) / self.spacing;
            let top = (self.counts[k] - 1) as f64;
            if !(t >= -1e-9 && t <= top + 1e-9) {
                return None;
            }
            let t = t.clamp(0.0, top);
            let j = (t.floor() as usize).min(self.counts[k].saturating_sub(2));
            frac[k] = t - j as f64;
            base += j * s[k];
        }
        let mut acc = 0.0;
        for corner in 0..1usize << n {
            let mut w = 1.0;
            let mut off = 0;
            for k in 0..n {
                if corner >> k & 1 == 1 {
                    if self.counts[k] == 1 {
                        w = 0.0;
                        break;
                    }
                    w *= frac[k];
                    off += s[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[base + off];
            }
        }
        Some(acc)
    }

    fn interior_nodes(&self) -> impl ParallelIterator<Item = usize> + '_ {
        (0..self.len()).into_par_iter().filter(move |&i| self.interior(i))
    }
}

fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn hessian_det_min_where(f: &GridFunction, keep: impl Fn(&[f64]) -> bool + Sync) -> Result<f64, AppendixError> {
    f.validate()?;
    if !f.has_interior() {
        return Err(AppendixError::GridTooSmall("no interior nodes".into()));
    }
    Ok(f
        .interior_nodes()
        .filter(|&i| keep(&f.point(i)))
        .map(|i| det(f.hessian_at(i)))
        .reduce(|| f64::INFINITY, f64::min))
}

/// Minimum of the central-difference Hessian determinant over interior nodes.
pub fn hessian_det_min(f: &GridFunction) -> Result<f64, AppendixError> {
    hessian_det_min_where(f, |_| true)
}

fn grad_sup_where(f: &GridFunction, keep: impl Fn(&[f64]) -> bool + Sync) -> f64 {
    f.interior_nodes()
        .filter(|&i| keep(&f.point(i)))
        .map(|i| norm(&f.gradient_at(i)))
        .reduce(|| 0.0, f64::max)
}

/// Sup of the grid function along `x0 + t·dir`, `|t| ≤ ell`.
fn line_sup(f: &GridFunction, x0: &[f64], dir: &[f64], ell: f64) -> Option<f64> {
    let steps = ((8.0 * ell / f.spacing).ceil() as usize).max(2);
    let mut best = f64::NEG_INFINITY;
    for k in 0..=steps {
        let t = -ell + 2.0 * ell * k as f64 / steps as f64;
        let p: Vec<f64> = x0.iter().zip(dir).map(|(a, d)| a + t * d).collect();
        best = best.max(f.interpolate(&p)?);
    }
    Some(best)
}

fn violated(what: &str) -> AppendixError {
    AppendixError::PreconditionViolated(what.to_string())
}

/// Parameters of the two-dimensional estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeinzQuery {
    pub lambda: f64,
    pub x0: [f64; 2],
    /// Direction of the line through `x0`.
    pub dir: [f64; 2],
    pub ell: f64,
    pub delta: f64,
}

/// Checks `ℓ² ln(1+δ/γ) ≤ 8λ²‖∇f‖²` with `γ = sup_{B_ℓ(x₀)∩H} f / ‖∇f‖`.
///
/// The gradient sup runs over interior nodes of the closed ball `B_δ(x₀)`.
pub fn heinz_check_2d(f: &GridFunction, q: &HeinzQuery) -> Result<BoundReport, AppendixError> {
    f.validate()?;
    if f.dim() != 2 {
        return Err(AppendixError::InvalidDims(f.dim(), 1));
    }
    if !f.has_interior() {
        return Err(AppendixError::GridTooSmall("no interior nodes".into()));
    }
    let tol = SLACK;
    let x0 = q.x0;
    let (lo, hi) = (f.lo.clone(), f.hi());
    if (0..2).any(|k| x0[k] - q.delta < lo[k] - 1e-12 || x0[k] + q.delta > hi[k] + 1e-12) {
        return Err(violated("grid must cover B_delta(x0)"));
    }
    if !(q.ell > 0.0 && q.ell <= q.delta / 2.0) {
        return Err(violated("0 < ell <= delta/2"));
    }
    let dn = norm(&q.dir);
    if !(dn > 0.0) {
        return Err(violated("line direction is zero"));
    }
    let dir = [q.dir[0] / dn, q.dir[1] / dn];
    let fmin = f.values.iter().copied().fold(f64::INFINITY, f64::min);
    if fmin < -tol {
        return Err(violated("f >= 0"));
    }
    let f0 = f.interpolate(&x0).ok_or_else(|| violated("x0 inside grid"))?;
    if f0.abs() > tol {
        return Err(violated("f(x0) = 0"));
    }
    let in_ball = |p: &[f64]| dist(p, &x0) <= q.delta + 1e-12;
    let dmin = hessian_det_min_where(f, in_ball)?;
    if dmin < q.lambda.powi(-2) - tol {
        return Err(violated("det D^2 f >= lambda^-2"));
    }
    let g = grad_sup_where(f, in_ball);
    let sup = line_sup(f, &x0, &dir, q.ell).ok_or_else(|| violated("segment inside grid"))?;
    let gamma = sup / g;
    let lhs = q.ell * q.ell * (1.0 + q.delta / gamma).ln();
    let rhs = 8.0 * q.lambda * q.lambda * g * g;
    let params = BoundParams {
        ell: q.ell,
        delta: q.delta,
        lam1: q.lambda,
        lam2: q.lambda,
        k: g,
        linf: g,
        c: 8.0,
        ..BoundParams::default()
    };
    Ok(BoundReport::new("heinz-2d", lhs, rhs + SLACK, params).with_gamma(gamma).with_preconditions(vec![
        ("f-nonnegative", true),
        ("f-vanishes-at-x0", true),
        ("ell-le-half-delta", true),
        ("det-lower", true),
    ]))
}

fn check_dims(n: usize, d: usize) -> Result<(), AppendixError> {
    if d == 0 || d >= n {
        return Err(AppendixError::InvalidDims(n, d));
    }
    Ok(())
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson on `[a, b]` with relative tolerance `rel`.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel * whole.abs().max(f64::MIN_POSITIVE);
    simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `∫₀^s r^{n−d−1}/(r+c)^d dr` on dyadic panels.
fn radial_integral(s: f64, n: usize, d: usize, c: f64) -> f64 {
    let p = (n - d - 1) as i32;
    let g = move |r: f64| r.powi(p) / (r + c).powi(d as i32);
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = c.min(s);
    while a < s {
        total += adaptive(&g, a, b, 1e-11);
        a = b;
        b = (2.0 * b).min(s);
    }
    total
}

/// `φ(s) = s^{2d−n} ∫₀^s r^{n−d−1}/(r+1)^d dr`.
pub fn varphi_profile(s: f64, n: usize, d: usize) -> Result<f64, AppendixError> {
    check_dims(n, d)?;
    if !(s >= 0.0) {
        return Err(AppendixError::PreconditionViolated(format!("s = {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(s.powi(2 * d as i32 - n as i32) * radial_integral(s, n, d, 1.0))
}

/// Lower bound on `sup f` over `B_ℓ ∩ H` for an affine `H` of dimension `d ≥ n/2`.
pub fn affine_flat_bound(n: usize, d: usize, ell: f64, delta: f64, lambda: f64, grad_inf: f64, c: f64) -> Result<f64, AppendixError> {
    check_dims(n, d)?;
    if 2 * d < n {
        return Err(AppendixError::DimensionBranch);
    }
    let cap = delta * grad_inf;
    if 2 * d == n {
        return Ok(cap * (-c * lambda * lambda * grad_inf.powi(n as i32) / ell.powi(n as i32)).exp());
    }
    let e = (2 * d - n) as f64;
    let inner = ell.powi(2 * d as i32) / (c * lambda * lambda * grad_inf.powi(2 * (n - d) as i32));
    Ok(cap.min(inner.powf(1.0 / e)))
}

/// Volume of the unit ball in `k` dimensions.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / k as f64 * unit_ball_volume(k - 2),
    }
}

/// Constant in the assembled Fischer inequality, `4^d·ω_{n−d}`.
pub fn fischer_constant(n: usize, d: usize) -> f64 {
    4f64.powi(d as i32) * unit_ball_volume(n - d)
}

/// `∫_{B^{n−d}_{δ/2}} (|x⊥|+γ)^{−d} dx⊥`.
pub fn fischer_integral(n: usize, d: usize, delta: f64, gamma: f64) -> Result<f64, AppendixError> {
    check_dims(n, d)?;
    let k = n - d;
    let sphere = k as f64 * unit_ball_volume(k);
    // Scale to γ = 1 so the dyadic panels start at the kink.
    let s = delta / (2.0 * gamma);
    Ok(sphere * gamma.powi(k as i32 - d as i32) * radial_integral(s, n, d, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FischerQuery {
    /// Leading coordinates span the affine plane through the grid centre.
    pub d: usize,
    pub lambda: f64,
    pub ell: f64,
    pub delta: f64,
    pub gamma: f64,
    pub k: f64,
}

/// Checks `ℓ^{2d} ∫_{B_{δ/2}} (|x⊥|+γ)^{−d} dx⊥ ≤ 4^d ω_{n−d} λ² Kⁿ` and the
/// nodewise gradient bound `|∇∥f| ≤ (2/ℓ) K (|x⊥|+γ)` on `B_{ℓ/2} × B_{δ/2}`.
pub fn fischer_pipeline_check(f: &GridFunction, q: &FischerQuery) -> Result<BoundReport, AppendixError> {
    f.validate()?;
    let n = f.dim();
    if !(3..=MAX_DIM).contains(&n) {
        return Err(AppendixError::InvalidDims(n, q.d));
    }
    check_dims(n, q.d)?;
    if !f.has_interior() {
        return Err(AppendixError::GridTooSmall("no interior nodes".into()));
    }
    let d = q.d;
    let hi = f.hi();
    let center: Vec<f64> = f.lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let split = |p: &[f64]| {
        let par: Vec<f64> = (0..d).map(|k| p[k] - center[k]).collect();
        let perp: Vec<f64> = (d..n).map(|k| p[k] - center[k]).collect();
        (norm(&par), norm(&perp))
    };
    let covered = (0..n).all(|k| {
        let r = if k < d { q.ell } else { q.delta / 2.0 };
        center[k] - r >= f.lo[k] - 1e-12 && center[k] + r <= hi[k] + 1e-12
    });
    let det_ok = hessian_det_min(f)? >= q.lambda.powi(-2) - SLACK;
    let grad_ok = grad_sup_where(f, |_| true) <= q.k + SLACK;
    let ell_ok = q.ell > 0.0 && q.ell <= q.delta / 2.0;

    let s = f.strides();
    let bad = f
        .interior_nodes()
        .filter_map(|i| {
            let p = f.point(i);
            let (a, b) = split(&p);
            if a > q.ell / 2.0 + 1e-12 || b > q.delta / 2.0 + 1e-12 {
                return None;
            }
            let g: Vec<f64> = s[..d].iter().map(|&sk| (f.values[i + sk] - f.values[i - sk]) / (2.0 * f.spacing)).collect();
            let excess = norm(&g) - 2.0 / q.ell * q.k * (b + q.gamma) - SLACK;
            (excess > 0.0).then_some(i)
        })
        .min();

    let lhs = q.ell.powi(2 * d as i32) * fischer_integral(n, d, q.delta, q.gamma)?;
    let c = fischer_constant(n, d);
    let rhs = c * q.lambda * q.lambda * q.k.powi(n as i32);
    let params = BoundParams {
        ell: q.ell,
        delta: q.delta,
        lam1: q.lambda,
        lam2: q.lambda,
        k: q.k,
        linf: q.k,
        c,
        ..BoundParams::default()
    };
    let mut r = BoundReport::new("fischer", lhs, rhs + SLACK, params).with_gamma(q.gamma);
    if let Some(i) = bad {
        r.verdict = crate::report::Verdict::Fails;
        r.witness = Some(vec![i]);
        r.note = Some("parallel gradient bound fails".into());
    }
    Ok(r.with_preconditions(vec![
        ("grid-covers-cylinder", covered),
        ("ell-le-half-delta", ell_ok),
        ("det-lower", det_ok),
        ("grad-sup-le-k", grad_ok),
    ]))
}
