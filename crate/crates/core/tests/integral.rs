use otlab_core::error::BoundError;
use otlab_core::integral::*;
use otlab_core::rational::{q, qi, to_f64};
use otlab_core::{Point2, PwlFunction, Q};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(x: Q, y: Q) -> Point2 {
    Point2::new(x, y)
}

/// `½|u|² − ½ℓ²` on the lattice `spacing·ℤ²` over `[−ℓ, ℓ] × [0, δ]`.
fn quadratic_lattice(ell: &Q, delta: &Q, spacing: &Q) -> PwlFunction {
    let nx = (ell / spacing).to_integer();
    let ny = (delta / spacing).to_integer();
    let mut s = Vec::new();
    let half_l2 = ell * ell / qi(2);
    let (mut i, mut j) = (-nx.clone(), num_bigint::BigInt::from(0));
    while i <= nx {
        while j <= ny {
            let p = pt(spacing * Q::from_integer(i.clone()), spacing * Q::from_integer(j.clone()));
            let v = p.norm_sq() / qi(2) - &half_l2;
            s.push((p, v));
            j += 1;
        }
        j = 0.into();
        i += 1;
    }
    PwlFunction::build(s).unwrap()
}

/// Independent value for a potential whose vertical gradient is the step
/// function `G(t) = (⌊t/h⌋ + ½)h`: `w² ∫ ds (s+γ)⁻² ∫_{s/2}^{min(2s,δ)} |G(t) − G(s)| dt`
/// with `w` the width of the rectangle, by a fine midpoint rule in `s` and an
/// exact inner step integral.
fn strip_oracle(w: f64, delta: f64, h: f64, gamma: f64) -> f64 {
    let g = |t: f64| ((t / h).floor() + 0.5) * h;
    let inner = |s: f64| {
        let (lo, hi) = (s / 2.0, (2.0 * s).min(delta));
        let gs = g(s);
        let mut acc = 0.0;
        let mut t = lo;
        while t < hi {
            let next = (((t / h).floor() + 1.0) * h).min(hi);
            acc += (g((t + next) / 2.0) - gs).abs() * (next - t);
            t = next;
        }
        acc
    };
    let n = 400_000;
    let mut total = 0.0;
    for k in 0..n {
        let s = (k as f64 + 0.5) * delta / n as f64;
        total += inner(s) / ((s + gamma) * (s + gamma)) * delta / n as f64;
    }
    w * w * total
}

/// Midpoint grid over `R_δ × R_δ` with `n × n` cells per factor, gradients
/// taken from the active plane at each cell centre.
fn grid_oracle(psi: &PwlFunction, ell: f64, delta: f64, gamma: f64, n: usize) -> f64 {
    let planes: Vec<[f64; 3]> = psi
        .facets()
        .iter()
        .map(|f| [to_f64(&f.grad.x), to_f64(&f.grad.y), to_f64(&f.offset)])
        .collect();
    let (dx, dy) = (ell / n as f64, delta / n as f64);
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (-ell / 2.0 + (i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
            let top = planes
                .iter()
                .max_by(|a, b| (a[0] * x + a[1] * y + a[2]).total_cmp(&(b[0] * x + b[1] * y + b[2])))
                .unwrap();
            cells.push((y, top[1]));
        }
    }
    let da = dx * dy;
    let mut total = 0.0;
    for &(xs, gx) in &cells {
        let wgt = 1.0 / ((xs + gamma) * (xs + gamma));
        let inner: f64 = cells
            .iter()
            .filter(|(ys, _)| *ys >= xs / 2.0 && *ys <= 2.0 * xs)
            .map(|(_, gy)| (gy - gx).abs())
            .sum();
        total += wgt * inner;
    }
    total * da * da
}

fn random_potential(seed: u64) -> PwlFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::new();
    for c in [(-1, 0), (1, 0), (-1, 1), (1, 1)] {
        let p = pt(qi(c.0), qi(c.1));
        let v = p.norm_sq() / qi(2);
        s.push((p, v));
    }
    for _ in 0..30 {
        let p = pt(q(rng.gen_range(-32..=32), 32), q(rng.gen_range(0..=32), 32));
        let v = p.norm_sq() / qi(2) + q(rng.gen_range(0..=16), 256) + p.x.clone() * q(rng.gen_range(-4..=4), 8);
        s.push((p, v));
    }
    PwlFunction::build(s).unwrap()
}

#[test]
fn quadratic_lattice_matches_strip_oracle() {
    let (ell, delta, h) = (q(1, 2), q(1, 2), q(1, 16));
    let psi = quadratic_lattice(&ell, &delta, &h);
    let (out, cfg) = normalize_frame(&psi, &pt(-ell.clone(), qi(0)), &pt(ell.clone(), qi(0)), &delta).unwrap();
    assert_eq!(out.samples(), psi.samples());
    for gamma in [0.05, 0.01, 0.002] {
        let cfg = cfg.clone().with_gamma(gamma);
        let got = displacement_integral(&out, &cfg).unwrap();
        let want = strip_oracle(0.5, 0.5, 1.0 / 16.0, gamma);
        assert!((got - want).abs() <= 1e-3 * want, "gamma {gamma}: {got} vs {want}");
    }
}

#[test]
fn generic_potential_matches_grid_oracle() {
    let psi = random_potential(7);
    let cfg = FrameConfig::new(qi(1), q(1, 2), 0.05);
    let got = displacement_integral(&psi, &cfg).unwrap();
    assert!(got > 0.0);
    let coarse = grid_oracle(&psi, 1.0, 0.5, 0.05, 48);
    let fine = grid_oracle(&psi, 1.0, 0.5, 0.05, 96);
    assert!((fine - got).abs() <= 0.03 * got, "{got} vs grid {fine} (coarse {coarse})");
}

#[test]
fn affine_potential_gives_zero() {
    let s: Vec<_> = [(-2, 0), (2, 0), (-2, 2), (2, 2), (0, 1)]
        .iter()
        .map(|&(x, y)| {
            let p = pt(qi(x), qi(y));
            let v = &p.x * q(1, 3) - &p.y * q(2, 5) + qi(1);
            (p, v)
        })
        .collect();
    let psi = PwlFunction::build(s).unwrap();
    let cfg = FrameConfig::new(qi(1), qi(1), 0.1);
    assert_eq!(displacement_integral(&psi, &cfg).unwrap(), 0.0);
}

#[test]
fn integral_decreases_in_gamma_and_vanishes_at_large_gamma() {
    let psi = random_potential(3);
    let cfg = FrameConfig::new(qi(1), q(1, 2), 1.0);
    let mut last = f64::INFINITY;
    for g in [1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0, 1e6] {
        let v = displacement_integral(&psi, &cfg.clone().with_gamma(g)).unwrap();
        assert!(v <= last * (1.0 + 1e-12));
        last = v;
    }
    assert!(last < 1e-9);
    assert_eq!(displacement_integral(&psi, &cfg.clone().with_gamma(0.0)), Err(BoundError::NonPositiveGamma));
}

#[test]
fn integral_reflection_symmetric() {
    let psi = random_potential(11);
    let refl = PwlFunction::build(psi.samples().into_iter().map(|(p, v)| (pt(-p.x, p.y), v)).collect()).unwrap();
    let cfg = FrameConfig::new(qi(1), q(1, 2), 0.02);
    let (a, b) = (displacement_integral(&psi, &cfg).unwrap(), displacement_integral(&refl, &cfg).unwrap());
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
}

#[test]
fn normalize_general_segment() {
    let psi = random_potential(5);
    let (x, y) = (pt(q(-3, 8), q(1, 8)), pt(q(0, 1), q(5, 8)));
    let (out, cfg) = normalize_frame(&psi, &x, &y, &q(1, 8)).unwrap();
    assert_eq!(cfg.ell, q(5, 16));
    assert_eq!(out.eval(&cfg.a()).unwrap(), Q::from_integer(0.into()));
    assert_eq!(out.eval(&cfg.b()).unwrap(), Q::from_integer(0.into()));
    let (eps, t) = out.flat_deficiency_argmax(&cfg.a(), &cfg.b()).unwrap();
    assert_eq!(eps, cfg.eps);
    let m = cfg.a().lerp(&cfg.b(), &t);
    assert!(out.is_subgradient(&m, &Point2::zero()).unwrap());
    assert_eq!(eps, psi.flat_deficiency(&x, &y).unwrap());

    let shift = pt(q(1, 3), q(-2, 7));
    let moved = PwlFunction::build(psi.samples().into_iter().map(|(p, v)| (p.add(&shift), v)).collect()).unwrap();
    let (out2, cfg2) = normalize_frame(&moved, &x.add(&shift), &y.add(&shift), &q(1, 8)).unwrap();
    assert_eq!(cfg2.ell, cfg.ell);
    let mut a = out.samples();
    let mut b = out2.samples();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn normalize_rejects_bad_frames() {
    let psi = random_potential(5);
    let r = normalize_frame(&psi, &pt(qi(0), qi(0)), &pt(q(1, 8), q(1, 8)), &q(1, 8));
    assert!(matches!(r, Err(BoundError::Geometry(otlab_core::error::GeomError::IrrationalFrame))));
    let r = normalize_frame(&psi, &pt(qi(-1), qi(0)), &pt(qi(1), qi(0)), &qi(2));
    assert!(matches!(r, Err(BoundError::Geometry(otlab_core::error::GeomError::OutOfDomain(_)))));
}

#[test]
fn normalize_picks_the_side_inside_the_domain() {
    // the domain lies below the segment, so the frame flips it
    let s: Vec<_> = [(-1, 0), (1, 0), (-1, -1), (1, -1), (0, -1)]
        .iter()
        .map(|&(x, y)| {
            let p = pt(qi(x), qi(y));
            let v = p.norm_sq();
            (p, v)
        })
        .collect();
    let psi = PwlFunction::build(s).unwrap();
    let (out, cfg) = normalize_frame(&psi, &pt(qi(-1), qi(0)), &pt(qi(1), qi(0)), &q(1, 2)).unwrap();
    assert_eq!(cfg.rotation.cos, qi(-1));
    assert!(cfg.r_delta().corners().iter().all(|c| out.domain().contains(c)));
}

#[test]
fn bound_formulas() {
    let cfg = FrameConfig::new(qi(1), qi(1), 1.0);
    let up = upper_bound_rhs(&cfg, 1.0, 1.0).unwrap();
    assert!((up - (2f64.ln().sqrt() + 1.0)).abs() < 1e-15);
    let zero = FrameConfig::new(qi(0), qi(1), 1.0);
    assert_eq!(upper_bound_rhs(&zero, 1.0, 1.0).unwrap(), 0.0);
    let mut tight = FrameConfig::new(qi(1), qi(1), 0.1);
    tight.eps = q(1, 2);
    assert_eq!(upper_bound_rhs(&tight, 1.0, 1.0), Err(BoundError::PreconditionGamma));

    assert_eq!(lower_bound_rhs(&cfg, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
    let c2 = FrameConfig::new(q(3, 2), qi(2), 0.25);
    let v = lower_bound_rhs(&c2, 1.5, 1.0, 1.0, 0.0, 0.0, 2.0).unwrap();
    let want = 1.5f64.powi(4) / (2.0 * 1.5) * 1.0 * (0.5 + 2.0 / 0.5f64).ln();
    assert!((v - want).abs() < 1e-13);
    assert!(matches!(lower_bound_rhs(&c2, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0), Err(BoundError::PreconditionEll(_))));
    assert!(matches!(lower_bound_rhs(&cfg.clone().with_gamma(2.0), 1.0, 1.0, 1.0, 0.0, 0.0, 1.0), Err(BoundError::PreconditionEll(_))));

    assert_eq!(eta_value(1.0, 1.0, 1.0, 1.0, 1.0), 1.0);
    assert_eq!(eta_value(2.0, 1.0, 1.0, 1.0, 1.0), 4.0);
}

#[test]
fn slab_bound_on_quadratic() {
    let (ell, delta, h) = (q(1, 2), q(1, 2), q(1, 16));
    let psi = quadratic_lattice(&ell, &delta, &h);
    let (a, b) = (pt(-ell.clone(), qi(0)), pt(ell.clone(), qi(0)));
    let (out, cfg) = normalize_frame(&psi, &a, &b, &delta).unwrap();
    let eps = to_f64(&cfg.eps);
    assert_eq!(eps, 0.125);
    assert!(subdiff_slab_bound_check(&out, &cfg, 1.0, eps).holds());
    let r = subdiff_slab_bound_check(&out, &cfg, 0.01, 0.0);
    assert!(!r.holds());
    assert!(r.witness.is_some());
}

#[test]
fn spread_and_concentration() {
    let (ell, delta, h) = (q(1, 2), q(1, 2), q(1, 16));
    let psi = quadratic_lattice(&ell, &delta, &h);
    let cfg = FrameConfig::new(ell, delta, 0.01);
    let xp = q(1, 8);
    let w = spread_witness_search(&psi, &cfg, &xp, -10.0, 0.1).unwrap();
    assert!(cfg.lambda(&xp).unwrap().contains(&w));
    assert_eq!(spread_witness_search(&psi, &cfg, &xp, 0.15, 1.0), None);

    let om = cfg.omega(&xp).unwrap();
    let full = concentration_set_measure(&psi, &cfg, &xp, -10.0, 0.1);
    assert!((full - to_f64(&om.area())).abs() < 1e-15);
    assert_eq!(concentration_set_measure(&psi, &cfg, &xp, 0.0, f64::INFINITY), 0.0);
    // rows over [1/16, 3/16) have T⊥ ∈ {3/32, 5/32}, within 1/32 of 1/8; only the top row counts
    let m = concentration_set_measure(&psi, &cfg, &xp, 0.125, 1.0 / 32.0);
    assert!((m - 0.5 / 16.0).abs() < 1e-12, "{m}");
}

#[test]
fn cone_propagation() {
    let (ell, delta, h) = (q(1, 2), q(1, 2), q(1, 16));
    let psi = quadratic_lattice(&ell, &delta, &h);
    let cfg = FrameConfig::new(ell, delta, 0.01);
    let query = ConeQuery { x_perp: q(1, 8), xi: 5.0 / 32.0, eta: 0.05, k: 1.0, c: 1.0 };
    let (a, b) = (pt(q(1, 64), q(5, 32)), pt(q(1, 64), q(11, 64)));
    assert!(cone_propagation_check(&psi, &cfg, &a, &b, &query).unwrap());
    assert!(matches!(cone_propagation_check(&psi, &cfg, &a, &a, &query), Err(BoundError::PreconditionAngle(_))));
    let slanted = pt(q(1, 4), q(11, 64));
    assert!(matches!(cone_propagation_check(&psi, &cfg, &a, &slanted, &query), Err(BoundError::PreconditionAngle(_))));
    // a long vertical segment crosses rows whose gradient leaves the 2η band
    let narrow = ConeQuery { eta: 0.02, ..query.clone() };
    let (lo, hi) = (pt(q(1, 64), q(1, 16) + q(1, 64)), pt(q(1, 64), q(1, 4) - q(1, 64)));
    let lo_ok = ConeQuery { xi: 0.15, ..narrow.clone() };
    assert!(cone_propagation_check(&psi, &cfg, &lo, &hi, &lo_ok).is_err());
}
