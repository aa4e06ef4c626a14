use otlab_core::appendix::*;
use otlab_core::error::AppendixError;
use otlab_core::report::Verdict;
use proptest::prelude::*;

fn quadratic(n: usize, m: usize, r: f64, lambda: f64) -> GridFunction {
    GridFunction::centered(n, m, r, move |x| x.iter().map(|v| v * v).sum::<f64>() / (2.0 * lambda)).unwrap()
}

#[test]
fn hessian_of_quadratics() {
    let g = quadratic(2, 17, 1.0, 1.0);
    assert!((hessian_det_min(&g).unwrap() - 1.0).abs() < 1e-9);
    let g = GridFunction::centered(2, 17, 1.0, |x| (x[0] * x[0] + x[1] * x[1]) / 4.0).unwrap();
    assert!((hessian_det_min(&g).unwrap() - 0.25).abs() < 1e-9);
    let g = quadratic(3, 9, 1.0, 2.0);
    assert!((hessian_det_min(&g).unwrap() - 0.125).abs() < 1e-9);
}

#[test]
fn quartic_determinant_vanishes_at_origin() {
    // Second differences of x⁴ are 12x² + 2h², so the minimum sits at the origin.
    for m in [9, 17, 33] {
        let g = GridFunction::centered(2, m, 1.0, |x| x[0].powi(4) + x[1].powi(4)).unwrap();
        let h = g.spacing;
        let got = hessian_det_min(&g).unwrap();
        assert!((got - 4.0 * h.powi(4)).abs() < 1e-9, "{m}: {got}");
    }
}

#[test]
fn quartic_determinant_converges_quadratically() {
    let exact = |x: f64, y: f64| {
        let (a, b, c) = (12.0 * x * x + 2.0 * y * y, 12.0 * y * y + 2.0 * x * x, 4.0 * x * y);
        a * b - c * c
    };
    let f = |p: &[f64]| p[0].powi(4) + p[1].powi(4) + p[0] * p[0] * p[1] * p[1];
    let at = [0.5, 0.75];
    let mut errs = Vec::new();
    for m in [9usize, 17, 33, 65] {
        let g = GridFunction::sample(vec![0.0, 0.0], vec![m, m], 1.0 / (m - 1) as f64, f).unwrap();
        let i = (0..g.len()).find(|&i| {
            let p = g.point(i);
            (p[0] - at[0]).abs() < 1e-12 && (p[1] - at[1]).abs() < 1e-12
        });
        let hm = g.hessian_at(i.unwrap());
        let d = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
        errs.push((d - exact(at[0], at[1])).abs());
    }
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate >= 1.9, "{errs:?}");
    }
}

fn heinz_query(lambda: f64, ell: f64) -> HeinzQuery {
    HeinzQuery { lambda, x0: [0.0, 0.0], dir: [1.0, 0.0], ell, delta: 1.0 }
}

#[test]
fn heinz_quadratic_matches_closed_form() {
    // On [−2,2]² with 129 nodes the point (1,0) is an interior node, so ‖∇f‖ = 1/λ
    // and γ = (ℓ²/2λ)/(1/λ) = ℓ²/2.
    for lambda in [0.5, 1.0, 2.0, 4.0] {
        let g = quadratic(2, 129, 2.0, lambda);
        for ell in [1.0 / 16.0, 0.125, 0.25, 0.5] {
            let r = heinz_check_2d(&g, &heinz_query(lambda, ell)).unwrap();
            let gamma = ell * ell / 2.0;
            assert!((r.gamma.unwrap() - gamma).abs() < 1e-12);
            assert!((r.lhs - ell * ell * (1.0 + 1.0 / gamma).ln()).abs() < 1e-10);
            assert!((r.rhs - 8.0 - SLACK).abs() < 1e-9);
            assert_eq!(r.verdict, Verdict::Holds);
        }
    }
}

#[test]
fn heinz_lhs_vanishes_with_ell() {
    let g = quadratic(2, 129, 2.0, 1.0);
    let l = |ell: f64| heinz_check_2d(&g, &heinz_query(1.0, ell)).unwrap().lhs;
    assert!(l(1.0 / 32.0) < l(0.125));
    assert!(l(1.0 / 32.0) < 0.01);
}

#[test]
fn heinz_rescaled_lambda() {
    // Both sides are λ-free for this family: γ = ℓ²/2 and 8λ²(1/λ)² = 8.
    let a = heinz_check_2d(&quadratic(2, 129, 2.0, 1.0), &heinz_query(1.0, 0.25)).unwrap();
    let b = heinz_check_2d(&quadratic(2, 129, 2.0, 2.0), &heinz_query(2.0, 0.25)).unwrap();
    assert!((a.lhs - b.lhs).abs() < 1e-12 && (a.rhs - b.rhs).abs() < 1e-9);
    assert_eq!(a.verdict, b.verdict);
}

#[test]
fn heinz_preconditions() {
    let g = quadratic(2, 33, 2.0, 1.0);
    let err = |q: HeinzQuery, g: &GridFunction| match heinz_check_2d(g, &q) {
        Err(AppendixError::PreconditionViolated(s)) => s,
        other => panic!("{other:?}"),
    };
    assert!(err(HeinzQuery { ell: 0.75, ..heinz_query(1.0, 0.5) }, &g).contains("ell"));
    assert!(err(HeinzQuery { x0: [0.5, 0.0], ..heinz_query(1.0, 0.25) }, &g).contains("f(x0)"));
    assert!(err(heinz_query(0.5, 0.25), &g).contains("det"));
    assert!(err(HeinzQuery { delta: 3.0, ell: 0.25, ..heinz_query(1.0, 0.25) }, &g).contains("cover"));
    let shifted = GridFunction::centered(2, 33, 2.0, |x| (x[0] * x[0] + x[1] * x[1]) / 2.0 - 0.1).unwrap();
    assert!(err(heinz_query(1.0, 0.25), &shifted).contains(">= 0"));
}

#[test]
fn varphi_closed_forms() {
    for s in [0.1, 1.0, 10.0, 100.0] {
        let a = varphi_profile(s, 3, 2).unwrap();
        assert!((a - s * s / (1.0 + s)).abs() < 1e-6, "{s}: {a}");
        let b = varphi_profile(s, 4, 2).unwrap();
        assert!((b - ((1.0 + s).ln() - s / (1.0 + s))).abs() < 1e-6, "{s}: {b}");
        // n=3, d=1: s⁻¹(s − ln(1+s)).
        let c = varphi_profile(s, 3, 1).unwrap();
        assert!((c - (s - (1.0 + s).ln()) / s).abs() < 1e-6);
    }
    assert_eq!(varphi_profile(0.0, 3, 2).unwrap(), 0.0);
    assert!((varphi_profile(1.0, 4, 2).unwrap() - 0.193_147_180_56).abs() < 1e-9);
    assert!(matches!(varphi_profile(1.0, 3, 3), Err(AppendixError::InvalidDims(3, 3))));
    assert!(matches!(varphi_profile(1.0, 3, 0), Err(AppendixError::InvalidDims(3, 0))));
}

fn diverges(n: usize, d: usize) -> bool {
    let p = |e: i32| varphi_profile(10f64.powi(e), n, d).unwrap();
    let (a, b, c) = (p(4), p(5), p(6));
    c - b > 0.5 * (b - a)
}

#[test]
fn varphi_divergence_iff_half_dimension() {
    for n in 2..=6 {
        for d in 1..n {
            assert_eq!(diverges(n, d), 2 * d >= n, "n={n} d={d}");
        }
    }
}

proptest! {
    #[test]
    fn varphi_nondecreasing(a in 0.0f64..1e4, b in 0.0f64..1e4, n in 3usize..=5, d in 1usize..5) {
        prop_assume!(d < n);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (varphi_profile(lo, n, d).unwrap(), varphi_profile(hi, n, d).unwrap());
        prop_assert!(x <= y * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn affine_bound_branches() {
    let (ell, delta, lam, g, c): (f64, f64, f64, f64, f64) = (0.3, 1.0, 1.5, 2.0, 0.7);
    let direct = delta * g * (-c * lam * lam * g.powi(4) / ell.powi(4)).exp();
    assert!((affine_flat_bound(4, 2, ell, delta, lam, g, c).unwrap() - direct).abs() < 1e-15);
    let big = affine_flat_bound(4, 2, 1e6, delta, lam, g, c).unwrap();
    assert!((big - delta * g).abs() < 1e-9);
    // n=3, d=2: exponent 1, the second branch is ℓ⁴/(Cλ²‖∇‖²).
    let second = ell.powi(4) / (c * lam * lam * g * g);
    assert!((affine_flat_bound(3, 2, ell, delta, lam, g, c).unwrap() - second.min(delta * g)).abs() < 1e-15);
    assert!(affine_flat_bound(3, 2, ell, delta, lam, g, 1e12).unwrap() < 1e-12);
    // n=4, d=3: exponent 2.
    let s = (ell.powi(6) / (c * lam * lam * g.powi(2))).sqrt();
    assert!((affine_flat_bound(4, 3, ell, delta, lam, g, c).unwrap() - s.min(delta * g)).abs() < 1e-15);
    assert!(matches!(affine_flat_bound(4, 1, ell, delta, lam, g, c), Err(AppendixError::DimensionBranch)));
    assert!(matches!(affine_flat_bound(3, 3, ell, delta, lam, g, c), Err(AppendixError::InvalidDims(3, 3))));
}

#[test]
fn fischer_integral_closed_forms() {
    let (delta, gamma) = (1.0, 0.02);
    let a = fischer_integral(3, 2, delta, gamma).unwrap();
    let oracle = 2.0 * (1.0 / gamma - 1.0 / (delta / 2.0 + gamma));
    assert!((a - oracle).abs() < 1e-8 * oracle);
    let b = fischer_integral(4, 2, delta, gamma).unwrap();
    let r = delta / 2.0 + gamma;
    let oracle = 2.0 * std::f64::consts::PI * ((r / gamma).ln() + gamma / r - 1.0);
    assert!((b - oracle).abs() < 1e-8 * oracle);
}

fn fischer_case(gamma: f64) -> FischerQuery {
    FischerQuery { d: 2, lambda: 1.0, ell: 0.25, delta: 1.0, gamma, k: 3f64.sqrt() }
}

#[test]
fn fischer_quadratic_holds() {
    let g = quadratic(3, 33, 1.0, 1.0);
    let k = 3f64.sqrt();
    let gamma = (0.25f64 * 0.25 / 2.0) / k;
    let r = fischer_pipeline_check(&g, &fischer_case(gamma)).unwrap();
    assert_eq!(r.verdict, Verdict::Holds, "{r:?}");
    let lhs = 0.25f64.powi(4) * 2.0 * (1.0 / gamma - 1.0 / (0.5 + gamma));
    assert!((r.lhs - lhs).abs() < 1e-8 * lhs);
    let rhs = 16.0 * 2.0 * k.powi(3);
    assert!((r.rhs - rhs - SLACK).abs() < 1e-9);
    assert!(r.lhs < 0.01 * r.rhs);
    assert!(r.preconditions.iter().all(|(_, ok)| *ok));
}

#[test]
fn fischer_lhs_vanishes_for_large_gamma() {
    let g = quadratic(3, 17, 1.0, 1.0);
    let a = fischer_pipeline_check(&g, &fischer_case(10.0)).unwrap().lhs;
    let b = fischer_pipeline_check(&g, &fischer_case(1e4)).unwrap().lhs;
    assert!(b < a && b < 1e-8);
}

#[test]
fn fischer_gradient_bound_nodewise() {
    // ∇∥f = x∥ on the quadratic; at x⊥ = 0 the bound needs ℓ/2 ≤ 2Kγ/ℓ.
    let g = quadratic(3, 33, 1.0, 1.0);
    let k = 3f64.sqrt();
    let edge = 0.25f64 * 0.25 / (4.0 * k);
    let ok = fischer_pipeline_check(&g, &fischer_case(edge * 1.01)).unwrap();
    assert!(ok.witness.is_none());
    let bad = fischer_pipeline_check(&g, &fischer_case(edge * 0.9)).unwrap();
    assert_eq!(bad.verdict, Verdict::Fails);
    let p = g.point(bad.witness.unwrap()[0]);
    assert!((p[0] * p[0] + p[1] * p[1]).sqrt() > 0.125 * 0.9 - 1e-12);
}

#[test]
fn fischer_dimension_and_preconditions() {
    let g2 = quadratic(2, 9, 1.0, 1.0);
    assert!(matches!(fischer_pipeline_check(&g2, &fischer_case(0.1)), Err(AppendixError::InvalidDims(2, 2))));
    let g = quadratic(3, 9, 1.0, 1.0);
    let r = fischer_pipeline_check(&g, &FischerQuery { k: 0.5, ..fischer_case(0.1) }).unwrap();
    assert_eq!(r.verdict, Verdict::NotApplicable);
    let r = fischer_pipeline_check(&g, &FischerQuery { lambda: 0.5, ..fischer_case(0.1) }).unwrap();
    assert_eq!(r.verdict, Verdict::NotApplicable);
}

#[test]
fn grid_cap() {
    assert!(matches!(GridFunction::centered(4, 34, 1.0, |_| 0.0), Err(AppendixError::GridTooSmall(_))));
    assert!(GridFunction::centered(4, 33, 1.0, |_| 0.0).is_ok());
}
