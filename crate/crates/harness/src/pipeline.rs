//! The end-to-end pipeline: measures, regularity, transport, potential, flat
//! scan and bound evaluation.

use crate::scenario::{rect_of, Constants, KMode, Scenario};
use crate::HarnessError;
use otlab_core::analysis::{corollary_flat_bound, duality_sweep, main_bound_check, max_flat_diameter, DualitySweep};
use otlab_core::integral::{displacement_integral, normalize_frame, sandwich_check, FrameConfig};
use otlab_core::measures::{check_regularity, RegularityCertificate, Side, WeightedPointCloud};
use otlab_core::rational::{to_f64, QS};
use otlab_core::report::{BoundParams, BoundReport, Verdict};
use otlab_core::transport::{cyclical_monotonicity_check, extract_potential, solve_ot, verify_dual_side, verify_onesided};
use otlab_core::{Point2, PwlFunction, Rect, Region};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Families of evaluated inequalities. Per-segment families are reported as
/// `name@index`.
pub const FAMILIES: [&str; 7] = ["onesided", "dual-side", "duality-sweep", "flat", "main", "lower", "upper"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtSummary {
    pub source_atoms: usize,
    pub target_atoms: usize,
    pub cost: QS,
    pub dual: QS,
    pub gap: QS,
    pub marginals_exact: bool,
    pub cyclically_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSummary {
    /// Full length of the longest flat segment.
    pub ell_max: f64,
    pub witness: Option<[[QS; 2]; 2]>,
    pub pairs_checked: u64,
    pub k: f64,
}

/// One row of the ε table. `ell` is the half-length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub a: [QS; 2],
    pub b: [QS; 2],
    pub ell: f64,
    pub eps: f64,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub certificates: Vec<RegularityCertificate>,
    pub certified: bool,
    pub ot: OtSummary,
    pub flat: FlatSummary,
    pub segments: Vec<SegmentRow>,
    /// Segments of the family not inside the potential's domain.
    pub segments_skipped: usize,
    pub bounds: Vec<BoundReport>,
    /// Wall-clock seconds per stage; not serialized so reports stay
    /// byte-identical across runs.
    #[serde(skip)]
    pub timing: Vec<(String, f64)>,
}

impl PartialEq for RunReport {
    fn eq(&self, o: &Self) -> bool {
        self.scenario == o.scenario
            && self.certificates == o.certificates
            && self.certified == o.certified
            && self.ot == o.ot
            && self.flat == o.flat
            && self.segments == o.segments
            && self.segments_skipped == o.segments_skipped
            && self.bounds == o.bounds
    }
}

impl RunReport {
    pub fn all_hold(&self) -> bool {
        self.bounds.iter().all(|b| b.verdict != Verdict::Fails)
    }

    pub fn bound(&self, inequality: &str) -> Option<&BoundReport> {
        self.bounds.iter().find(|b| b.inequality == inequality)
    }
}

/// Pipeline state after everything that does not depend on the constants.
pub struct Prepared {
    pub scenario: Scenario,
    pub mu: WeightedPointCloud,
    pub nu: WeightedPointCloud,
    pub certificates: Vec<RegularityCertificate>,
    pub ot: OtSummary,
    pub psi: PwlFunction,
    pub flat: FlatSummary,
    pub segments: Vec<SegmentRow>,
    pub segments_skipped: usize,
    frames: Vec<Option<(PwlFunction, FrameConfig)>>,
    onesided: BoundReport,
    dual_side: BoundReport,
    sweep: DualitySweep,
    pub timing: Vec<(String, f64)>,
}

fn pt(p: &Point2) -> [QS; 2] {
    [QS(p.x.clone()), QS(p.y.clone())]
}

fn stage<T>(
    s: &Scenario,
    name: &'static str,
    timing: &mut Vec<(String, f64)>,
    f: impl FnOnce() -> Result<T, String>,
) -> Result<T, HarnessError> {
    let t = Instant::now();
    let out = f().map_err(|message| HarnessError::Stage { scenario: s.id.clone(), stage: name, message });
    timing.push((name.to_string(), t.elapsed().as_secs_f64()));
    out
}

fn target_box(s: &Scenario, nu: &WeightedPointCloud) -> Result<Rect, String> {
    if let Some(b) = &s.target_domain {
        return Ok(rect_of(b));
    }
    let (x0, x1, y0, y1) = nu.bbox().ok_or("empty target")?;
    if x0 == x1 || y0 == y1 {
        return Err("target atoms span no box; give target_domain".into());
    }
    Ok(Rect::axis(x0, x1, y0, y1))
}

pub fn prepare(s: &Scenario) -> Result<Prepared, HarnessError> {
    let mut timing = Vec::new();
    stage(s, "scenario", &mut timing, || s.validate())?;
    let (mu, nu) = stage(s, "measures", &mut timing, || Ok((s.source_measure()?, s.target_measure()?)))?;
    let omega = s.omega();
    let certificates = stage(s, "regularity", &mut timing, || {
        let lam = target_box(s, &nu)?;
        let lo = check_regularity(&mu, &omega, &s.h1.0, &s.lam1.0, Side::Lower, s.angle_grid).map_err(|e| e.to_string())?;
        let up = check_regularity(&nu, &lam, &s.h2.0, &s.lam2.0, Side::Upper, s.angle_grid).map_err(|e| e.to_string())?;
        Ok(vec![lo, up])
    })?;
    let (plan, duals) = stage(s, "transport", &mut timing, || solve_ot(&mu, &nu).map_err(|e| e.to_string()))?;
    let ot = {
        let cost = plan.cost();
        let dual = duals.dual_value(&mu, &nu);
        OtSummary {
            source_atoms: mu.len(),
            target_atoms: nu.len(),
            gap: QS(&cost - &dual),
            cost: QS(cost),
            dual: QS(dual),
            marginals_exact: plan.marginals_exact(),
            cyclically_monotone: cyclical_monotonicity_check(&plan),
        }
    };
    let psi = stage(s, "potential", &mut timing, || extract_potential(&mu, &duals, &nu).map_err(|e| e.to_string()))?;
    let delta = s.delta.0.clone();
    let k_domain = psi.diam_subdiff(&Region::Domain).unwrap_or(0.0);
    let k_of = |a: &Point2, b: &Point2| -> f64 {
        match s.k_mode {
            KMode::Domain => k_domain,
            KMode::Sharp => psi
                .diam_subdiff(&Region::Neighborhood { a: a.clone(), b: b.clone(), delta: delta.clone() })
                .unwrap_or(k_domain),
        }
    };
    let (flat, segments, frames, segments_skipped) = stage(s, "flat-scan", &mut timing, || {
        let scan = max_flat_diameter(&psi, &omega, 0.0);
        let k = scan.witness.as_ref().map_or(k_domain, |(a, b)| k_of(a, b));
        let flat = FlatSummary {
            ell_max: scan.ell_max,
            witness: scan.witness.as_ref().map(|(a, b)| [pt(a), pt(b)]),
            pairs_checked: scan.pairs_checked,
            k,
        };
        let mut rows = Vec::new();
        let mut frames = Vec::new();
        let mut skipped = 0;
        for (a, b) in s.segment_family() {
            if !psi.domain().contains(&a) || !psi.domain().contains(&b) {
                skipped += 1;
                continue;
            }
            let eps = psi.flat_deficiency(&a, &b).map_err(|e| format!("segment {a}–{b}: {e}"))?;
            let ell = a.dist_sq(&b);
            let frame = normalize_frame(&psi, &a, &b, &delta);
            rows.push(SegmentRow {
                ell: to_f64(&ell).sqrt() / 2.0,
                eps: to_f64(&eps),
                k: k_of(&a, &b),
                frame_error: frame.as_ref().err().map(|e| e.to_string()),
                a: pt(&a),
                b: pt(&b),
            });
            frames.push(frame.ok());
        }
        Ok((flat, rows, frames, skipped))
    })?;
    let (onesided, dual_side, sweep) = stage(s, "bounds", &mut timing, || {
        let lam = target_box(s, &nu)?;
        let one = verify_onesided(&psi, &mu, &nu, &omega);
        let dual = verify_dual_side(&psi, &mu, &nu, &lam);
        Ok((one, dual, duality_sweep(&psi, &psi.hull_samples())))
    })?;
    Ok(Prepared {
        scenario: s.clone(),
        mu,
        nu,
        certificates,
        ot,
        psi,
        flat,
        segments,
        segments_skipped,
        frames,
        onesided,
        dual_side,
        sweep,
        timing,
    })
}

impl Prepared {
    pub fn certified(&self) -> bool {
        self.certificates.iter().all(|c| c.holds)
    }

    /// Scale and regularity entries shared by every report.
    pub fn base_params(&self) -> BoundParams {
        let s = &self.scenario;
        let omega = s.omega();
        BoundParams {
            delta: to_f64(&s.delta.0),
            h1: to_f64(&s.h1.0),
            h2: to_f64(&s.h2.0),
            lam1: to_f64(&s.lam1.0),
            lam2: to_f64(&s.lam2.0),
            diam: (to_f64(&omega.width()).powi(2) + to_f64(&omega.height()).powi(2)).sqrt(),
            ..BoundParams::default()
        }
    }

    /// `γ = max{ε/K, 2h₁, ℓh₂/(C_low K)}` for segment `i`.
    pub fn gamma(&self, i: usize, c_low: f64) -> f64 {
        let (row, p) = (&self.segments[i], self.base_params());
        (row.eps / row.k).max(2.0 * p.h1).max(row.ell * p.h2 / (c_low * row.k))
    }

    pub fn frame(&self, i: usize) -> Option<&(PwlFunction, FrameConfig)> {
        self.frames[i].as_ref()
    }

    /// Displacement integral of segment `i` at weight offset `gamma`.
    pub fn integral(&self, i: usize, gamma: f64) -> Option<f64> {
        let (f, cfg) = self.frame(i)?;
        displacement_integral(f, &cfg.clone().with_gamma(gamma)).ok()
    }

    fn certify(&self, mut r: BoundReport) -> BoundReport {
        let ok = self.certified();
        r.preconditions.push(("certified".into(), ok));
        if !ok {
            r.verdict = Verdict::NotApplicable;
        }
        r
    }

    /// Reports of one family with its constant set to `c`; the other slots
    /// come from the scenario.
    pub fn evaluate(&self, family: &str, c: f64) -> Result<Vec<BoundReport>, HarnessError> {
        self.evaluate_with(family, c, &self.scenario.constants)
    }

    /// As [`Prepared::evaluate`] with the other slots taken from `consts`.
    pub fn evaluate_with(&self, family: &str, c: f64, consts: &Constants) -> Result<Vec<BoundReport>, HarnessError> {
        let base = self.base_params();
        let tagged = |mut r: BoundReport, name: String| {
            r.inequality = name;
            r
        };
        Ok(match family {
            "onesided" => vec![exact_report(&self.onesided)],
            "dual-side" => vec![exact_report(&self.dual_side)],
            "duality-sweep" => {
                let mut r = BoundReport::new("duality-sweep", self.sweep.violations.len() as f64, 0.0, base)
                    .with_preconditions(vec![("pairs>0", self.sweep.pairs > 0)]);
                r.note = Some(format!("{} pairs", self.sweep.pairs));
                vec![r]
            }
            "flat" => {
                let p = BoundParams { ell: self.flat.ell_max / 2.0, eps: 0.0, k: self.flat.k, c, ..base };
                vec![self.certify(corollary_flat_bound(&p))]
            }
            "main" => self
                .segments
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let p = BoundParams { ell: row.ell, eps: row.eps, k: row.k, c, ..base.clone() };
                    tagged(self.certify(main_bound_check(&p)), format!("main@{i}"))
                })
                .collect(),
            "lower" | "upper" => {
                let (c_low, c_up) = if family == "lower" { (c, consts.c_up) } else { (consts.c_low, c) };
                let pick = |pair: (BoundReport, BoundReport)| if family == "lower" { pair.0 } else { pair.1 };
                (0..self.segments.len())
                    .into_par_iter()
                    .map(|i| {
                        let row = &self.segments[i];
                        let p = BoundParams { ell: row.ell, eps: row.eps, k: row.k, ..base.clone() };
                        let g = self.gamma(i, c_low);
                        let r = match self.frame(i) {
                            Some((f, cfg)) => sandwich_check(f, &cfg.clone().with_gamma(g), &p, c_low, c_up, self.certified())
                                .map(pick)
                                .map_err(|e| e.to_string()),
                            None => Err(row.frame_error.clone().unwrap_or_default()),
                        };
                        let r = r.unwrap_or_else(|e| {
                            let mut r = BoundReport::new(family, 0.0, 0.0, BoundParams { c, ..p })
                                .with_gamma(g)
                                .with_preconditions(vec![("frame", false)]);
                            r.note = Some(e);
                            r
                        });
                        tagged(r, format!("{family}@{i}"))
                    })
                    .collect()
            }
            other => return Err(HarnessError::UnknownInequality(other.to_string())),
        })
    }

    pub fn report(&self) -> RunReport {
        let c = &self.scenario.constants;
        let mut bounds = Vec::new();
        for fam in FAMILIES {
            let slot = match fam {
                "flat" => c.c_flat,
                "main" => c.c_main,
                "lower" => c.c_low,
                "upper" => c.c_up,
                _ => 1.0,
            };
            bounds.extend(self.evaluate(fam, slot).expect("known family"));
        }
        RunReport {
            scenario: self.scenario.id.clone(),
            certificates: self.certificates.clone(),
            certified: self.certified(),
            ot: self.ot.clone(),
            flat: self.flat.clone(),
            segments: self.segments.clone(),
            segments_skipped: self.segments_skipped,
            bounds,
            timing: self.timing.clone(),
        }
    }
}

fn exact_report(r: &BoundReport) -> BoundReport {
    let mut r = r.clone();
    if r.preconditions.is_empty() {
        r.preconditions.push(("optimal-potential".into(), true));
    }
    r
}

pub fn run_scenario(s: &Scenario) -> Result<RunReport, HarnessError> {
    prepare(s).map(|p| p.report())
}

/// Runs scenarios in the pool, returned in scenario-id order.
pub fn run_all(scenarios: &[Scenario]) -> Vec<Result<RunReport, HarnessError>> {
    let mut order: Vec<&Scenario> = scenarios.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.par_iter().map(|s| run_scenario(s)).collect()
}

/// Least-squares slope of `log I` against `log log(1 + δ/γ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub gammas: Vec<f64>,
    pub integrals: Vec<f64>,
    pub exponent: f64,
}

pub fn growth_exponent(delta: f64, gammas: &[f64], integrals: &[f64]) -> f64 {
    let xs: Vec<f64> = gammas.iter().map(|g| (1.0 + delta / g).ln().ln()).collect();
    let ys: Vec<f64> = integrals.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

impl Prepared {
    /// Integral of segment `i` at `points` log-spaced offsets from `top`
    /// down one decade.
    pub fn growth(&self, i: usize, top: f64, points: usize) -> Option<GrowthFit> {
        let gammas: Vec<f64> = (0..points).map(|k| top * 10f64.powf(-(k as f64) / (points - 1) as f64)).collect();
        let integrals: Option<Vec<f64>> = gammas.iter().map(|&g| self.integral(i, g)).collect();
        let integrals = integrals?;
        let exponent = growth_exponent(to_f64(&self.scenario.delta.0), &gammas, &integrals);
        Some(GrowthFit { gammas, integrals, exponent })
    }
}
