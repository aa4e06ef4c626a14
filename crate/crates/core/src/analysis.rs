//! Flat parts of piecewise-linear potentials and the quantitative
//! strict-convexity estimates.

use crate::error::{BoundError, GeomError};
use crate::geometry::{Point2, PwlFunction, Rect};
use crate::rational::{to_f64, Q};
use crate::report::{BoundParams, BoundReport, Verdict};
use num_traits::Zero;
use rayon::prelude::*;

/// `max_t chord(t) − ψ((1−t)x + ty)`, exact.
pub fn flat_deficiency(psi: &PwlFunction, x: &Point2, y: &Point2) -> Result<Q, GeomError> {
    psi.flat_deficiency(x, y)
}

/// Longest flat segment found among pairs of hull samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatScan {
    /// Full length `|x − y|`.
    pub ell_max: f64,
    pub witness: Option<(Point2, Point2)>,
    pub pairs_checked: u64,
}

/// Largest `|x − y|` over hull-sample pairs in `region` with
/// `flat_deficiency ≤ tol`.
pub fn max_flat_diameter(psi: &PwlFunction, region: &Rect, tol: f64) -> FlatScan {
    max_flat_diameter_with(psi, region, tol, |_, _| true)
}

/// As [`max_flat_diameter`], restricted to pairs accepted by `admit`.
pub fn max_flat_diameter_with(
    psi: &PwlFunction,
    region: &Rect,
    tol: f64,
    admit: impl Fn(&Point2, &Point2) -> bool + Sync,
) -> FlatScan {
    let idx: Vec<usize> =
        psi.hull_samples().into_iter().filter(|&i| region.contains(&psi.points()[i])).collect();
    let pts: Vec<[f64; 2]> = idx.iter().map(|&i| psi.points()[i].to_f64()).collect();
    let vals: Vec<f64> = idx.iter().map(|&i| to_f64(&psi.values()[i])).collect();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            let d = ((pts[a][0] - pts[b][0]).powi(2) + (pts[a][1] - pts[b][1]).powi(2)).sqrt();
            pairs.push((a, b, d));
        }
    }
    pairs.sort_by(|p, q| q.2.total_cmp(&p.2).then(p.0.cmp(&q.0)).then(p.1.cmp(&q.1)));
    let n_pairs = pairs.len() as u64;
    let tol_q = crate::rational::from_f64(tol).unwrap_or_else(Q::zero);
    let vscale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
    // float midpoint screen, exact confirmation for survivors
    let flat = |&(a, b, _): &(usize, usize, f64)| -> bool {
        let (x, y) = (&psi.points()[idx[a]], &psi.points()[idx[b]]);
        for t in [0.5, 0.25, 0.75] {
            let p = [pts[a][0] * (1.0 - t) + pts[b][0] * t, pts[a][1] * (1.0 - t) + pts[b][1] * t];
            let gap = vals[a] * (1.0 - t) + vals[b] * t - psi.eval_f64(p);
            if gap > tol + 1e-9 * vscale {
                return false;
            }
        }
        admit(x, y) && psi.flat_deficiency(x, y).is_ok_and(|e| e <= tol_q)
    };
    let hit = pairs.par_iter().find_first(|p| flat(p));
    match hit {
        Some(&(a, b, d)) => FlatScan {
            ell_max: d,
            witness: Some((psi.points()[idx[a]].clone(), psi.points()[idx[b]].clone())),
            pairs_checked: n_pairs,
        },
        None => FlatScan { ell_max: 0.0, witness: None, pairs_checked: n_pairs },
    }
}

/// `γ = max{ε/K, 2h₁, ℓh₂/(CK)}`.
pub fn gamma_of(p: &BoundParams) -> Result<f64, BoundError> {
    if p.k <= 0.0 {
        return Err(BoundError::ZeroK);
    }
    Ok((p.eps / p.k).max(2.0 * p.h1).max(p.ell * p.h2 / (p.c * p.k)))
}

/// `ℓ ≥ 2h₁` and `ℓ² ≥ C K λ₁λ₂ h₂`.
pub fn ell_conditions(p: &BoundParams) -> Vec<(&'static str, bool)> {
    vec![
        ("ell>=2h1", p.ell >= 2.0 * p.h1),
        ("ell^2>=C*K*lam1*lam2*h2", p.ell * p.ell >= p.c * p.k * p.lam1 * p.lam2 * p.h2),
    ]
}

/// `ℓ⁸ log(1 + δ/γ) ≤ C λ₁⁴λ₂⁴K⁸`, applicable when γ ≤ δ/2 and the length
/// conditions hold.
pub fn main_bound_check(p: &BoundParams) -> BoundReport {
    let gamma = gamma_of(p).unwrap_or(f64::NAN);
    let lhs = p.ell.powi(8) * (1.0 + p.delta / gamma).ln();
    let rhs = p.c * (p.lam1 * p.lam2).powi(4) * p.k.powi(8);
    let mut pre = vec![("K>0", p.k > 0.0), ("gamma<=delta/2", gamma <= p.delta / 2.0)];
    pre.extend(ell_conditions(p));
    BoundReport::new("main", lhs, rhs, p.clone()).with_gamma(gamma).with_preconditions(pre)
}

/// `δ·min{1/(exp(C⁴λ₁⁴λ₂⁴K⁸/ℓ⁸) − 1), 1/2}`.
pub fn gamma_lower_bound(p: &BoundParams) -> f64 {
    let a = (p.c * p.lam1 * p.lam2).powi(4) * p.k.powi(8) / p.ell.powi(8);
    p.delta * (1.0 / a.exp_m1()).min(0.5)
}

/// The four terms of the flat-length bound for affine segments.
pub fn ellbound_terms(p: &BoundParams) -> [f64; 4] {
    let s = (p.c * p.lam1 * p.lam2).sqrt();
    let log_term = |arg: f64| {
        if arg.is_infinite() {
            0.0
        } else {
            let l = arg.ln();
            if l <= 0.0 { f64::INFINITY } else { p.k * s / l.powf(0.125) }
        }
    };
    [
        2.0 * p.h1,
        (p.c * p.lam1 * p.lam2 * p.k * p.h2).sqrt(),
        log_term(p.delta / (2.0 * p.h1)),
        log_term(p.delta / (s * p.h2)),
    ]
}

/// Measured flat length `p.ell` against the maximum of [`ellbound_terms`].
pub fn corollary_flat_bound(p: &BoundParams) -> BoundReport {
    let terms = ellbound_terms(p);
    let rhs = terms.iter().cloned().fold(0.0, f64::max);
    let s = (p.c * p.lam1 * p.lam2).sqrt();
    let pre = vec![
        ("eps=0", p.eps == 0.0),
        ("h1<=delta/4", p.h1 <= p.delta / 4.0),
        ("sqrt(C*lam1*lam2)*h2<=delta", s * p.h2 <= p.delta),
        ("ell*h2/K<=C*delta/2", p.ell * p.h2 / p.k <= p.c * p.delta / 2.0),
    ];
    let mut r = BoundReport::new("flat", p.ell, rhs, p.clone()).with_preconditions(pre);
    if let Ok(g) = gamma_of(p) {
        r.gamma = Some(g);
    }
    r
}

/// `|z − z′| ≥ 2ε/ℓ` with `ℓ = |x − x′|`, checked exactly.
pub fn duality_gap_bound_check(
    psi: &PwlFunction,
    x: &Point2,
    x2: &Point2,
    z: &Point2,
    z2: &Point2,
) -> Result<BoundReport, BoundError> {
    for (p, g) in [(x, z), (x2, z2)] {
        if !psi.is_subgradient(p, g)? {
            return Err(BoundError::InvalidSubgradient(format!("{g} at {p}")));
        }
    }
    let eps = psi.flat_deficiency(x, x2)?;
    let l2 = x.dist_sq(x2);
    let d2 = z.dist_sq(z2);
    let ok = eps.is_zero() || &d2 * &l2 >= &eps * &eps * Q::from_integer(4.into());
    let ell = to_f64(&l2).sqrt();
    let params = BoundParams { ell, eps: to_f64(&eps), ..BoundParams::default() };
    let lhs = if ell > 0.0 { 2.0 * to_f64(&eps) / ell } else { 0.0 };
    let mut r = BoundReport::new("duality", lhs, to_f64(&d2).sqrt(), params);
    r.verdict = Verdict::from_bool(ok);
    Ok(r)
}

/// Outcome of sweeping the duality-gap inequality over sample pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualitySweep {
    pub pairs: u64,
    pub violations: Vec<(usize, usize)>,
}

/// Checks `dist(∂ψ(x_a), ∂ψ(x_b)) ≥ 2ε/|x_a − x_b|` exactly for all pairs of
/// the given hull samples, which covers every subgradient pair. At
/// domain-boundary samples the bounded part of the subdifferential is used.
pub fn duality_sweep(psi: &PwlFunction, samples: &[usize]) -> DualitySweep {
    let subs: Vec<_> = samples.iter().map(|&i| psi.subdiff_sample(i).polygon).collect();
    let n = samples.len();
    let four = Q::from_integer(4.into());
    let bad: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let (subs, four) = (&subs, &four);
            (a + 1..n).filter_map(move |b| {
                let (x, y) = (&psi.points()[samples[a]], &psi.points()[samples[b]]);
                let (xf, yf) = (x.to_f64(), y.to_f64());
                let ef = psi.flat_deficiency_f64(xf, yf);
                let lf = subs[a].dist_sq_f64(&subs[b]) * ((xf[0] - yf[0]).powi(2) + (xf[1] - yf[1]).powi(2));
                let rf = 4.0 * ef * ef;
                if ef > 1e-9 && lf > rf * (1.0 + 1e-6) {
                    return None;
                }
                let eps = psi.flat_deficiency(x, y).expect("samples lie in the domain");
                if eps.is_zero() {
                    return None;
                }
                let ok = subs[a].dist_sq(&subs[b]) * x.dist_sq(y) >= &eps * &eps * four;
                (!ok).then_some((samples[a], samples[b]))
            })
        })
        .collect();
    DualitySweep { pairs: (n * n.saturating_sub(1) / 2) as u64, violations: bad }
}

/// Modulus of continuity for the gradient of the conjugate. With
/// `h₁ = h₂ = 0` this is `C√(λ₁λ₂)L∞ / log(1 + 1/(C√(λ₁λ₂)Δz))^{1/8}`,
/// capped at the domain diameter; otherwise the three-term maximum built from
/// the inverses of `σ(ℓ) = L∞/(C₀(exp(C⁴λ₁⁴λ₂⁴L∞⁸/ℓ⁸) − 1))` and `σ(ℓ)/ℓ`.
pub fn c1_modulus_eval(p: &BoundParams, dz: f64) -> Result<f64, BoundError> {
    if dz < 0.0 {
        return Err(BoundError::NegativeGap);
    }
    let s = p.c * (p.lam1 * p.lam2).sqrt();
    if p.h1 == 0.0 && p.h2 == 0.0 {
        if dz == 0.0 {
            return Ok(0.0);
        }
        let v = s * p.linf / (1.0 / (s * dz)).ln_1p().powf(0.125);
        return Ok(if v.is_nan() { p.diam } else { v.min(p.diam) });
    }
    let sigma = |ell: f64| sigma_fn(p, ell);
    let rho = inverse_increasing(|l| sigma(l) / l, dz / 2.0, p.diam);
    let r1 = inverse_increasing(sigma, p.k * p.h1, p.diam).max(2.0 * p.h1);
    let r2 = inverse_increasing(sigma, p.diam * p.h2, p.diam)
        .max((p.c * p.lam1 * p.lam2 * p.linf * p.h2).sqrt())
        .max(p.lam1 * p.lam2 * p.h2 / p.delta);
    Ok(rho.max(r1).max(r2))
}

/// `σ(ℓ)` with `C₀ = 1`.
pub fn sigma_fn(p: &BoundParams, ell: f64) -> f64 {
    if ell <= 0.0 {
        return 0.0;
    }
    let a = (p.c * p.lam1 * p.lam2).powi(4) * p.linf.powi(8) / ell.powi(8);
    p.linf / a.exp_m1()
}

/// Largest `ℓ ∈ [0, cap]` with `f(ℓ) ≤ v` for increasing `f`, by bisection.
pub fn inverse_increasing(f: impl Fn(f64) -> f64, v: f64, cap: f64) -> f64 {
    let cap = if cap.is_finite() { cap } else { 1e6 };
    if f(cap) <= v {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= v { lo = mid } else { hi = mid }
    }
    lo
}
