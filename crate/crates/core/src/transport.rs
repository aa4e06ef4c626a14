//! Exact quadratic-cost transport, Kantorovich potentials and the one-sided
//! measure inequalities.

use crate::error::{GeomError, TransportError};
use crate::flow::{hall_flow, min_cost_transport, HallCheck};
use crate::geometry::{Point2, PwlFunction, Rect};
use crate::int::Int;
use crate::measures::WeightedPointCloud;
use crate::rational::{fmt_q, lcm_denoms, scale_to_int, to_f64, Q};
use crate::report::{BoundParams, BoundReport, Verdict};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

/// Sparse coupling with exact marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, Q)>,
    pub source: WeightedPointCloud,
    pub target: WeightedPointCloud,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<Q> {
        let mut r = vec![Q::zero(); self.source.len()];
        for (i, _, m) in &self.entries {
            r[*i] += m;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<Q> {
        let mut c = vec![Q::zero(); self.target.len()];
        for (_, j, m) in &self.entries {
            c[*j] += m;
        }
        c
    }

    pub fn marginals_exact(&self) -> bool {
        self.entries.iter().all(|(_, _, m)| m > &Q::zero())
            && self.row_sums().iter().enumerate().all(|(i, s)| s == self.source.mass(i))
            && self.col_sums().iter().enumerate().all(|(j, s)| s == self.target.mass(j))
    }

    /// `Σ |x − z|² π(x, z)`.
    pub fn cost(&self) -> Q {
        self.entries
            .iter()
            .fold(Q::zero(), |a, (i, j, m)| a + self.source.point(*i).dist_sq(self.target.point(*j)) * m)
    }
}

/// Dual values with `ψ(x_i) + φ(z_j) ≥ x_i·z_j`, tight on the optimal support.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials {
    pub psi: Vec<Q>,
    pub phi: Vec<Q>,
}

impl DualPotentials {
    pub fn feasible(&self, mu: &WeightedPointCloud, nu: &WeightedPointCloud) -> bool {
        (0..mu.len()).all(|i| (0..nu.len()).all(|j| &self.psi[i] + &self.phi[j] >= mu.point(i).dot(nu.point(j))))
    }

    /// Value of the quadratic-cost dual, `Σ a(|x|² − 2ψ) + Σ b(|z|² − 2φ)`.
    pub fn dual_value(&self, mu: &WeightedPointCloud, nu: &WeightedPointCloud) -> Q {
        let two = Q::from_integer(2.into());
        let a = (0..mu.len()).fold(Q::zero(), |s, i| s + (mu.point(i).norm_sq() - &two * &self.psi[i]) * mu.mass(i));
        let b = (0..nu.len()).fold(Q::zero(), |s, j| s + (nu.point(j).norm_sq() - &two * &self.phi[j]) * nu.mass(j));
        a + b
    }
}

fn bits(x: &BigInt) -> u64 {
    x.bits()
}

/// Exact optimal plan and duals for `|x − z|²`.
pub fn solve_ot(
    mu: &WeightedPointCloud,
    nu: &WeightedPointCloud,
) -> Result<(TransportPlan, DualPotentials), TransportError> {
    if mu.is_empty() || nu.is_empty() {
        return Err(TransportError::EmptyMeasure);
    }
    let (tm, tn) = (mu.total_mass(), nu.total_mass());
    if tm != tn {
        return Err(TransportError::MassMismatch(fmt_q(&tm), fmt_q(&tn)));
    }
    let dm = lcm_denoms(mu.atoms().iter().chain(nu.atoms()).map(|(_, m)| m));
    let dc = lcm_denoms(mu.atoms().iter().chain(nu.atoms()).flat_map(|(p, _)| [&p.x, &p.y]));
    let coords = |c: &WeightedPointCloud| -> Vec<(BigInt, BigInt)> {
        c.atoms().iter().map(|(p, _)| (scale_to_int(&p.x, &dc), scale_to_int(&p.y, &dc))).collect()
    };
    let (xs, zs) = (coords(mu), coords(nu));
    let cost: Vec<BigInt> = xs
        .iter()
        .flat_map(|(a, b)| {
            zs.iter().map(move |(c, d)| {
                let (u, v) = (a - c, b - d);
                &u * &u + &v * &v
            })
        })
        .collect();
    let supply: Vec<BigInt> = mu.atoms().iter().map(|(_, m)| scale_to_int(m, &dm)).collect();
    let demand: Vec<BigInt> = nu.atoms().iter().map(|(_, m)| scale_to_int(m, &dm)).collect();
    let cmax = cost.iter().map(bits).max().unwrap_or(0);
    let smax = bits(&scale_to_int(&tm, &dm));
    let nodes = 64 - ((mu.len() + nu.len()) as u64).leading_zeros() as u64;
    // potentials stay below (n+m)·cmax; products of flow and cost below smax+cmax
    let need = (cmax + nodes + 2).max(cmax + smax + nodes + 2);
    let (flow, u, v) = if need < 62 {
        run::<i64>(&supply, &demand, &cost, |x| x.to_i64().unwrap())
    } else if need < 126 {
        run::<i128>(&supply, &demand, &cost, |x| x.to_i128().unwrap())
    } else {
        run::<BigInt>(&supply, &demand, &cost, |x| x.clone())
    };
    let dm_q = Q::from_integer(dm);
    let dc2 = Q::from_integer(&dc * &dc);
    let entries: Vec<(usize, usize, Q)> =
        flow.into_iter().map(|(i, j, f)| (i, j, Q::from_integer(f) / &dm_q)).collect();
    // U_i + V_j ≤ |x − z|²  ⇒  ψ = (|x|² − U)/2, φ = (|z|² − V)/2
    let two = Q::from_integer(2.into());
    let mut psi: Vec<Q> =
        (0..mu.len()).map(|i| (mu.point(i).norm_sq() - Q::from_integer(u[i].clone()) / &dc2) / &two).collect();
    let mut phi: Vec<Q> =
        (0..nu.len()).map(|j| (nu.point(j).norm_sq() - Q::from_integer(v[j].clone()) / &dc2) / &two).collect();
    let i0 = (0..mu.len()).min_by(|&a, &b| mu.point(a).cmp(mu.point(b))).unwrap();
    let shift = psi[i0].clone();
    psi.iter_mut().for_each(|p| *p -= &shift);
    phi.iter_mut().for_each(|p| *p += &shift);
    let plan = TransportPlan { entries, source: mu.clone(), target: nu.clone() };
    Ok((plan, DualPotentials { psi, phi }))
}

type Flow = (Vec<(usize, usize, BigInt)>, Vec<BigInt>, Vec<BigInt>);

fn run<T: Int + Into<BigInt>>(supply: &[BigInt], demand: &[BigInt], cost: &[BigInt], conv: impl Fn(&BigInt) -> T) -> Flow {
    let s: Vec<T> = supply.iter().map(&conv).collect();
    let d: Vec<T> = demand.iter().map(&conv).collect();
    let c: Vec<T> = cost.iter().map(&conv).collect();
    let t = min_cost_transport(&s, &d, &c);
    (
        t.flow.into_iter().map(|(i, j, f)| (i, j, f.into())).collect(),
        t.u.into_iter().map(Into::into).collect(),
        t.v.into_iter().map(Into::into).collect(),
    )
}

/// Convex potential through the tightened dual values at the source atoms.
pub fn extract_potential(mu: &WeightedPointCloud, duals: &DualPotentials, nu: &WeightedPointCloud) -> Result<PwlFunction, GeomError> {
    let t = tighten(mu, nu, duals);
    PwlFunction::build((0..mu.len()).map(|i| (mu.point(i).clone(), t.psi[i].clone())).collect())
}

/// Double c-transform `ψ ← (ψ*)*` on the atoms.
pub fn tighten(mu: &WeightedPointCloud, nu: &WeightedPointCloud, d: &DualPotentials) -> DualPotentials {
    let xs = mu.points();
    let zs = nu.points();
    let phi = c_transform(&zs, &xs, &d.psi);
    let psi = c_transform(&xs, &zs, &phi);
    DualPotentials { psi, phi }
}

/// `g(a) = max_b (a·b − f(b))`, exact, with a float pass to shortlist maximizers.
fn c_transform(at: &[Point2], over: &[Point2], f: &[Q]) -> Vec<Q> {
    let of: Vec<[f64; 2]> = over.iter().map(Point2::to_f64).collect();
    let ff: Vec<f64> = f.iter().map(to_f64).collect();
    let omax = of.iter().map(|b| b[0].abs() + b[1].abs()).fold(0.0, f64::max);
    let fmax = ff.iter().map(|v| v.abs()).fold(0.0, f64::max);
    at.par_iter()
        .map(|a| {
            let af = a.to_f64();
            let vals: Vec<f64> = of.iter().zip(&ff).map(|(b, fb)| af[0] * b[0] + af[1] * b[1] - fb).collect();
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let scale = 1.0 + (af[0].abs() + af[1].abs()) * omax + fmax + best.abs();
            let exact = |k: usize| a.dot(&over[k]) - &f[k];
            if !best.is_finite() {
                return (0..over.len()).map(exact).max().unwrap();
            }
            (0..over.len()).filter(|&k| vals[k] >= best - 1e-9 * scale).map(exact).max().unwrap()
        })
        .collect()
}

/// Edges `i → j` with `z_j ∈ ∂ψ(x_i)`; atoms outside the domain have none.
pub fn support_edges(psi: &PwlFunction, xs: &[Point2], zs: &[Point2]) -> Vec<Vec<usize>> {
    let zf: Vec<[f64; 2]> = zs.iter().map(Point2::to_f64).collect();
    xs.par_iter()
        .map(|x| match psi.subdifferential(x) {
            Ok(s) => (0..zs.len()).filter(|&j| s.maybe_contains(zf[j]) && s.contains(&zs[j])).collect(),
            Err(_) => Vec::new(),
        })
        .collect()
}

/// `μ(A) ≤ ν(∂ψ(A))` for every set of atoms `A ⊂ Ω`. The witness lists
/// indices of `μ` atoms.
pub fn verify_onesided(psi: &PwlFunction, mu: &WeightedPointCloud, nu: &WeightedPointCloud, omega: &Rect) -> BoundReport {
    let idx: Vec<usize> = (0..mu.len()).filter(|&i| omega.contains(mu.point(i))).collect();
    let xs: Vec<Point2> = idx.iter().map(|&i| mu.point(i).clone()).collect();
    let adj = support_edges(psi, &xs, &nu.points());
    let a: Vec<Q> = idx.iter().map(|&i| mu.mass(i).clone()).collect();
    let b: Vec<Q> = (0..nu.len()).map(|j| nu.mass(j).clone()).collect();
    let HallCheck { ok, lhs, rhs, witness: w } = hall_flow(&a, &b, &adj);
    let mut r = BoundReport::new("onesided", to_f64(&lhs), to_f64(&rhs), BoundParams::default());
    r.verdict = Verdict::from_bool(ok);
    r.witness = w.map(|w| w.into_iter().map(|k| idx[k]).collect());
    r
}

/// `ν(B) ≤ μ(∂ψ*(B))` for every set of atoms `B ⊂ Λ`. The witness lists
/// indices of `ν` atoms.
pub fn verify_dual_side(psi: &PwlFunction, mu: &WeightedPointCloud, nu: &WeightedPointCloud, lambda: &Rect) -> BoundReport {
    let idx: Vec<usize> = (0..nu.len()).filter(|&j| lambda.contains(nu.point(j))).collect();
    let fx: Vec<Option<Q>> = mu.points().par_iter().map(|x| psi.eval(x).ok()).collect();
    let xf: Vec<[f64; 2]> = mu.points().iter().map(|x| x.to_f64()).collect();
    let ff: Vec<f64> = fx.iter().map(|v| v.as_ref().map_or(f64::NEG_INFINITY, to_f64)).collect();
    let adj: Vec<Vec<usize>> = idx
        .par_iter()
        .map(|&j| {
            let z = nu.point(j);
            let star = psi.conjugate(z);
            let (zf, sf) = (z.to_f64(), to_f64(&star));
            let slack = 1e-9 * (1.0 + sf.abs());
            (0..mu.len())
                .filter(|&i| {
                    if xf[i][0] * zf[0] + xf[i][1] * zf[1] - ff[i] < sf - slack {
                        return false;
                    }
                    let x = mu.point(i);
                    fx[i].as_ref().is_some_and(|v| x.dot(z) - v == star)
                })
                .collect()
        })
        .collect();
    let b: Vec<Q> = idx.iter().map(|&j| nu.mass(j).clone()).collect();
    let a: Vec<Q> = (0..mu.len()).map(|i| mu.mass(i).clone()).collect();
    let HallCheck { ok, lhs, rhs, witness: w } = hall_flow(&b, &a, &adj);
    let mut r = BoundReport::new("dual-side", to_f64(&lhs), to_f64(&rhs), BoundParams::default());
    r.verdict = Verdict::from_bool(ok);
    r.witness = w.map(|w| w.into_iter().map(|k| idx[k]).collect());
    r
}

/// Pairwise monotonicity `(z − z′)·(x − x′) ≥ 0` over the support.
pub fn cyclical_monotonicity_check(plan: &TransportPlan) -> bool {
    let pairs: Vec<(&Point2, &Point2)> =
        plan.entries.iter().map(|(i, j, _)| (plan.source.point(*i), plan.target.point(*j))).collect();
    pairs.par_iter().enumerate().all(|(k, (x, z))| {
        pairs[k + 1..].iter().all(|(x2, z2)| z.sub(z2).dot(&x.sub(x2)) >= Q::zero())
    })
}
