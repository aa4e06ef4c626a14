use num_traits::{Signed, Zero};
use otlab_core::analysis::*;
use otlab_core::error::BoundError;
use otlab_core::measures::{make_lattice, WeightedPointCloud};
use otlab_core::rational::{q, qi, to_f64, Q};
use otlab_core::report::{BoundParams, Verdict};
use otlab_core::transport::{extract_potential, solve_ot};
use otlab_core::{Point2, PwlFunction, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(x: i64, y: i64) -> Point2 {
    Point2::from_ints(x, y)
}

/// Samples of `f` on the grid `{i/m : |i| ≤ n·m}²`.
fn grid(n: i64, m: i64, f: impl Fn(&Q, &Q) -> Q) -> PwlFunction {
    let mut s = Vec::new();
    for i in -n * m..=n * m {
        for j in -n * m..=n * m {
            let (x, y) = (q(i, m), q(j, m));
            let v = f(&x, &y);
            s.push((Point2::new(x, y), v));
        }
    }
    PwlFunction::build(s).unwrap()
}

fn lattice_potential(d: i64) -> (PwlFunction, WeightedPointCloud) {
    let h = q(1, d);
    let mu = make_lattice(&Rect::unit_square(), &h, &q(1, (d + 1) * (d + 1))).unwrap();
    let nu = mu.map_points(|p| Point2::new(&p.x + &p.y / qi(2), p.y.clone())).unwrap();
    let (_, duals) = solve_ot(&mu, &nu).unwrap();
    (extract_potential(&mu, &duals, &nu).unwrap(), mu)
}

/// Longest hull-sample pair in `region` with zero deficiency, by checking all pairs.
fn brute_flat(psi: &PwlFunction, region: &Rect) -> Q {
    let idx: Vec<usize> = psi.hull_samples().into_iter().filter(|&i| region.contains(&psi.points()[i])).collect();
    let mut best = Q::zero();
    for (k, &a) in idx.iter().enumerate() {
        for &b in &idx[k + 1..] {
            let (x, y) = (&psi.points()[a], &psi.points()[b]);
            let d = x.dist_sq(y);
            if d > best && psi.flat_deficiency(x, y).unwrap().is_zero() {
                best = d;
            }
        }
    }
    best
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn flat_deficiency_examples() {
    let affine = grid(1, 2, |x, y| x * qi(2) - y);
    assert!(flat_deficiency(&affine, &pt(-1, -1), &pt(1, 1)).unwrap().is_zero());
    let cone = grid(1, 1, |x, y| x.clone().abs().max(y.clone().abs()));
    assert_eq!(flat_deficiency(&cone, &pt(-1, 0), &pt(1, 0)).unwrap(), qi(1));
    assert!(flat_deficiency(&cone, &pt(-1, 0), &pt(2, 0)).is_err());
    for m in [1, 2, 4, 8] {
        let quad = grid(1, m, |x, _| x * x / qi(2));
        let (x, y) = (pt(-1, 0), pt(1, 0));
        let eps = flat_deficiency(&quad, &x, &y).unwrap();
        assert_eq!(eps, q(1, 2));
        // dense chord-minus-function oracle along the segment
        let dense = (0..=1000)
            .map(|k| {
                let t = q(k, 1000);
                let p = Point2::new(qi(-1) + &t * qi(2), qi(0));
                to_f64(&(q(1, 2) - quad.eval(&p).unwrap()))
            })
            .fold(0.0, f64::max);
        assert!(close(dense, 0.5, 1e-12));
    }
}

#[test]
fn flat_diameter_examples() {
    // flat on each half of the strip, kinked along x₁ = 0
    let hinge = grid(2, 1, |x, _| x.clone().max(Q::zero()));
    let all = Rect::axis(qi(-2), qi(2), qi(-2), qi(2));
    let s = max_flat_diameter(&hinge, &all, 0.0);
    assert!(close(s.ell_max, 20f64.sqrt(), 1e-12));
    let (x, y) = s.witness.unwrap();
    assert!(x.x.clone().max(y.x.clone()) <= qi(0) || x.x.min(y.x) >= qi(0));
    let sub = Rect::axis(qi(-2), qi(0), qi(-1), qi(1));
    assert!(close(max_flat_diameter(&hinge, &sub, 0.0).ell_max, 8f64.sqrt(), 1e-12));

    // lifted points on a paraboloid in general position: flat only inside single triangles
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<Point2> = (0..12).map(|_| Point2::new(q(rng.gen_range(-40..=40), 17), q(rng.gen_range(-40..=40), 19))).collect();
    let f = PwlFunction::build(pts.iter().map(|p| (p.clone(), p.norm_sq())).collect()).unwrap();
    let region = Rect::axis(qi(-3), qi(3), qi(-3), qi(3));
    let chord = f
        .facets()
        .iter()
        .flat_map(|t| t.ring.iter().flat_map(|&a| t.ring.iter().map(move |&b| (a, b))))
        .map(|(a, b)| f.points()[a].dist_sq(&f.points()[b]))
        .max()
        .unwrap();
    let s = max_flat_diameter(&f, &region, 0.0);
    assert!(close(s.ell_max, to_f64(&chord).sqrt(), 1e-12));
    assert_eq!(brute_flat(&f, &region), chord);
}

#[test]
fn lattice_potential_flat_scan_matches_pair_oracle() {
    let (psi, _) = lattice_potential(8);
    for region in [Rect::unit_square(), Rect::axis(q(1, 4), q(3, 4), qi(0), q(1, 2))] {
        let s = max_flat_diameter(&psi, &region, 0.0);
        let want = brute_flat(&psi, &region);
        assert!(close(s.ell_max, to_f64(&want).sqrt(), 1e-12), "{} vs {}", s.ell_max, want);
        let (x, y) = s.witness.unwrap();
        assert_eq!(x.dist_sq(&y), want);
        assert!(psi.flat_deficiency(&x, &y).unwrap().is_zero());
    }
}

#[test]
fn gamma_examples() {
    let base = BoundParams { eps: 0.3, k: 2.0, ell: 1.0, c: 1.0, ..Default::default() };
    assert_eq!(gamma_of(&base).unwrap(), 0.15);
    assert_eq!(gamma_of(&BoundParams { eps: 0.0, h1: 0.05, ..base.clone() }).unwrap(), 0.1);
    let p = BoundParams { eps: 0.1, k: 1.0, h1: 0.02, ell: 1.0, h2: 0.05, c: 1.0, ..Default::default() };
    assert_eq!(gamma_of(&p).unwrap(), 0.1);
    assert!(matches!(gamma_of(&BoundParams { k: 0.0, ..p }), Err(BoundError::ZeroK)));
}

#[test]
fn main_bound_examples() {
    let p = BoundParams { ell: 1.0, delta: 1.0, eps: 0.5, k: 1.0, c: 1.0986, ..Default::default() };
    let r = main_bound_check(&p);
    assert_eq!(r.gamma, Some(0.5));
    assert!(close(r.lhs, 3f64.ln(), 1e-15));
    assert_eq!(r.rhs, 1.0986);
    assert_eq!(r.verdict, Verdict::Fails);
    assert_eq!(main_bound_check(&BoundParams { c: 1.0987, ..p.clone() }).verdict, Verdict::Holds);
    for c in [1.0, 10.0, 100.0] {
        let tiny = BoundParams { eps: 1e-300, c, ..p.clone() };
        assert_eq!(main_bound_check(&tiny).verdict, Verdict::Fails);
    }
    let wide = BoundParams { eps: 0.8, ..p.clone() };
    assert_eq!(main_bound_check(&wide).verdict, Verdict::NotApplicable);
    let short = BoundParams { h1: 0.6, eps: 0.0, ..p };
    assert_eq!(main_bound_check(&short).verdict, Verdict::NotApplicable);
}

#[test]
fn main_bound_is_monotone() {
    let base = BoundParams { delta: 1.0, k: 1.0, c: 1.0, ..Default::default() };
    for ell in [0.25, 0.5, 1.0, 2.0] {
        let mut last = f64::INFINITY;
        for e in [0.001, 0.01, 0.05, 0.1, 0.2, 0.4] {
            let lhs = main_bound_check(&BoundParams { ell, eps: e, ..base.clone() }).lhs;
            assert!(lhs < last);
            last = lhs;
        }
    }
    for e in [0.01, 0.1] {
        let mut last = 0.0;
        for ell in [0.1, 0.2, 0.5, 1.0, 3.0] {
            let lhs = main_bound_check(&BoundParams { ell, eps: e, ..base.clone() }).lhs;
            assert!(lhs > last);
            last = lhs;
        }
    }
}

#[test]
fn main_bound_end_to_end() {
    let (psi, mu) = lattice_potential(16);
    let s = max_flat_diameter(&psi, &Rect::unit_square(), 0.0);
    let (x, y) = s.witness.clone().unwrap();
    let k = psi.diam_subdiff(&otlab_core::Region::Domain).unwrap();
    let p = BoundParams {
        ell: s.ell_max / 2.0,
        delta: 0.5,
        h1: 1.0 / 8.0,
        h2: 1.0 / 8.0,
        lam1: 4.0,
        lam2: 4.0,
        k,
        eps: to_f64(&psi.flat_deficiency(&x, &y).unwrap()),
        c: 1.0,
        ..Default::default()
    };
    let r = main_bound_check(&p);
    let gamma = (p.eps / k).max(2.0 * p.h1).max(p.ell * p.h2 / k);
    assert_eq!(r.gamma, Some(gamma));
    assert!(close(r.lhs, p.ell.powi(8) * (1.0 + 0.5 / gamma).ln(), 1e-14));
    assert!(close(r.rhs, 4f64.powi(8) * k.powi(8), 1e-14));
    assert!(mu.len() == 289 && r.applicable() == r.preconditions.iter().all(|(_, ok)| *ok));
}

#[test]
fn gamma_lower_bound_examples() {
    let p = BoundParams { ell: 1e6, delta: 2.0, k: 1.0, c: 1.0, ..Default::default() };
    assert_eq!(gamma_lower_bound(&p), 1.0);
    // C⁴λ⁴K⁸/ℓ⁸ = ln 2 exactly at this ℓ
    let ell = 1.0 / 2f64.ln().powf(0.125);
    let p = BoundParams { ell, delta: 3.0, ..p };
    assert!(close(gamma_lower_bound(&p), 1.5, 1e-12));
}

#[test]
fn gamma_lower_bound_inverts_the_main_bound() {
    for (ell, k, lam, c) in [(1.0, 1.0, 1.0, 2.0), (0.7, 1.3, 1.1, 5.0), (2.0, 0.9, 1.5, 40.0)] {
        let base = BoundParams { ell, delta: 1.0, k, lam1: lam, lam2: lam, c, ..Default::default() };
        // solve ℓ⁸ log(1 + δ/γ) = C λ⁸ K⁸ for γ by bisection on the report itself
        let (mut lo, mut hi) = (1e-300f64, 1e6f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            let r = main_bound_check(&BoundParams { eps: mid * k, ..base.clone() });
            if r.lhs > r.rhs { lo = mid } else { hi = mid }
        }
        let lb = gamma_lower_bound(&BoundParams { c: c.powf(0.25), ..base.clone() });
        let want = (base.delta / 2.0).min(hi);
        assert!(close(lb, want, 1e-9), "{lb} vs {want}");
    }
}

#[test]
fn flat_bound_branches() {
    let p = BoundParams { ell: 0.05, delta: 1.0, h1: 0.1, h2: 0.0, k: 1.0, c: 1.0, ..Default::default() };
    let t = ellbound_terms(&p);
    assert_eq!(t[0], 0.2);
    assert_eq!(t[1], 0.0);
    assert_eq!(t[3], 0.0);
    assert!(t[2] > 0.2);
    let r = corollary_flat_bound(&p);
    assert_eq!(r.rhs, t[2]);
    assert_eq!(r.verdict, Verdict::Holds);
    // h₁ dominant once the log branch is small
    let small_k = BoundParams { k: 0.01, ..p.clone() };
    let t = ellbound_terms(&small_k);
    assert!(t[0] > t[2]);
    assert_eq!(corollary_flat_bound(&small_k).rhs, 0.2);
    // classical limit: both h-branches vanish and the log branches evaluate to 0
    let zero = BoundParams { h1: 0.0, h2: 0.0, ..p.clone() };
    assert_eq!(ellbound_terms(&zero), [0.0; 4]);
    let r = corollary_flat_bound(&BoundParams { ell: 0.0, ..zero.clone() });
    assert_eq!(r.verdict, Verdict::Holds);
    assert_eq!(corollary_flat_bound(&zero).verdict, Verdict::Fails);
    assert_eq!(corollary_flat_bound(&BoundParams { h1: 0.3, ..p.clone() }).verdict, Verdict::NotApplicable);
    assert_eq!(corollary_flat_bound(&BoundParams { eps: 0.1, ..p }).verdict, Verdict::NotApplicable);
}

#[test]
fn duality_gap_examples() {
    let quad = grid(1, 2, |x, _| x * x / qi(2));
    let (x, x2) = (pt(-1, 0), pt(1, 0));
    let r = duality_gap_bound_check(&quad, &x, &x2, &pt(-1, 0), &pt(1, 0)).unwrap();
    assert_eq!(r.verdict, Verdict::Holds);
    assert_eq!(r.lhs, 0.5);
    assert_eq!(r.rhs, 2.0);
    let affine = grid(1, 1, |x, y| x + y);
    let r = duality_gap_bound_check(&affine, &x, &x2, &pt(1, 1), &pt(1, 1)).unwrap();
    assert_eq!((r.lhs, r.verdict), (0.0, Verdict::Holds));
    assert!(matches!(
        duality_gap_bound_check(&quad, &x, &x2, &pt(3, 0), &pt(1, 0)),
        Err(BoundError::InvalidSubgradient(_))
    ));
}

#[test]
fn duality_sweep_on_random_potentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let s: Vec<(Point2, Q)> = (0..15)
            .map(|_| (Point2::new(q(rng.gen_range(-12..=12), 4), q(rng.gen_range(-12..=12), 4)), q(rng.gen_range(-20..=20), 3)))
            .collect();
        let mut s = s;
        s.sort_by(|a, b| a.0.cmp(&b.0));
        s.dedup_by(|a, b| a.0 == b.0);
        let Ok(f) = PwlFunction::build(s) else { continue };
        let hs = f.hull_samples();
        let sw = duality_sweep(&f, &hs);
        assert!(sw.violations.is_empty());
        assert_eq!(sw.pairs as usize, hs.len() * (hs.len() - 1) / 2);
        // spot-check through the pairwise report at polygon vertices
        for &a in hs.iter().take(4) {
            for &b in hs.iter().rev().take(4) {
                if a == b {
                    continue;
                }
                let za = f.subdiff_sample(a).polygon.vertices[0].clone();
                let zb = f.subdiff_sample(b).polygon.vertices[0].clone();
                let r = duality_gap_bound_check(&f, &f.points()[a], &f.points()[b], &za, &zb).unwrap();
                assert_eq!(r.verdict, Verdict::Holds);
            }
        }
    }
}

#[test]
fn c1_modulus_examples() {
    let p = BoundParams { lam1: 1.0, lam2: 1.0, linf: 1.0, c: 1.0, diam: 2f64.sqrt(), ..Default::default() };
    assert_eq!(c1_modulus_eval(&p, 0.0).unwrap(), 0.0);
    assert_eq!(c1_modulus_eval(&p, 1e300).unwrap(), p.diam);
    assert!(c1_modulus_eval(&p, 1e-12).unwrap() < 0.75);
    let v = c1_modulus_eval(&p, 0.5).unwrap();
    assert!(close(v, 1.0 / 3f64.ln().powf(0.125), 1e-12));
    assert!(matches!(c1_modulus_eval(&p, -1.0), Err(BoundError::NegativeGap)));
    for q in [p.clone(), BoundParams { h1: 0.01, h2: 0.02, k: 1.0, delta: 0.5, ..p }] {
        let mut last = 0.0;
        for k in 0..=60 {
            let dz = 10f64.powf(-6.0 + k as f64 * 0.1);
            let v = c1_modulus_eval(&q, dz).unwrap();
            assert!(v >= last, "{dz}");
            assert!(v <= q.diam);
            last = v;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_keeps_the_verdict(
        ell in 0.05f64..2.0, eps in 0.0f64..0.5, k in 0.1f64..3.0, h1 in 0.0f64..0.3, h2 in 0.0f64..0.3,
        lam1 in 0.5f64..4.0, lam2 in 0.5f64..4.0, c in 0.1f64..1e4, tau in 0.1f64..10.0,
    ) {
        let p = BoundParams { ell, delta: 1.0, eps, k, h1, h2, lam1, lam2, c, ..Default::default() };
        let s = BoundParams { eps: eps / tau, k: k / tau, h2: h2 / tau, lam2: lam2 * tau * tau, ..p.clone() };
        let (a, b) = (main_bound_check(&p), main_bound_check(&s));
        // skip parameter points within rounding of a verdict boundary
        let margin = |r: &otlab_core::report::BoundReport| (r.lhs - r.rhs).abs() > 1e-9 * r.rhs.abs().max(1.0);
        let edges = |p: &BoundParams| {
            let g = gamma_of(p).unwrap();
            (g - p.delta / 2.0).abs() > 1e-12 && (p.ell - 2.0 * p.h1).abs() > 1e-12
                && (p.ell * p.ell - p.c * p.k * p.lam1 * p.lam2 * p.h2).abs() > 1e-9 * p.ell * p.ell
        };
        if margin(&a) && edges(&p) {
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn deficiency_vanishes_exactly_on_flat_segments(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<(Point2, Q)> = (0..10)
            .map(|_| (pt(rng.gen_range(-4..=4), rng.gen_range(-4..=4)), qi(rng.gen_range(-3..=3))))
            .collect();
        s.sort_by(|a, b| a.0.cmp(&b.0));
        s.dedup_by(|a, b| a.0 == b.0);
        let Ok(f) = PwlFunction::build(s) else { return Ok(()) };
        let hs = f.hull_samples();
        for &a in &hs {
            for &b in &hs {
                let (x, y) = (&f.points()[a], &f.points()[b]);
                let e = f.flat_deficiency(x, y).unwrap();
                prop_assert!(e >= Q::zero());
                // flat iff every point of the segment is on the chord: check through one facet holding both
                // ends, or through exact evaluation at all facet-edge crossings sampled densely
                let on_chord = (0..=64).all(|k| {
                    let t = q(k, 64);
                    let p = Point2::new(&x.x + (&y.x - &x.x) * &t, &x.y + (&y.y - &x.y) * &t);
                    f.eval(&p).unwrap() == &f.values()[a] + (&f.values()[b] - &f.values()[a]) * &t
                });
                if e.is_zero() {
                    prop_assert!(on_chord);
                }
                let shared = f.facets().iter().any(|t| t.members.contains(&a) && t.members.contains(&b));
                if shared {
                    prop_assert!(e.is_zero());
                }
                if !on_chord {
                    prop_assert!(e > Q::zero());
                }
            }
        }
    }
}
