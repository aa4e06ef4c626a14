//! Smallest constant making an inequality hold on a calibration set.

use crate::pipeline::{prepare, Prepared};
use crate::scenario::Scenario;
use crate::HarnessError;
use otlab_core::report::{BoundReport, Verdict};
use rayon::prelude::*;

/// Coarse log grid `10^(k/4)`, `k ∈ [−40, 40]`, refined to `10^(k/32)`
/// around the applicable range before bisection.
const GRID: (i32, i32) = (-40, 40);
const REFINE: i32 = 8;
pub const REL_TOL: f64 = 1e-3;

/// Number of applicable reports, or `None` if any fails.
fn coverage(reports: &[BoundReport]) -> Option<usize> {
    if reports.iter().any(|r| r.verdict == Verdict::Fails) {
        return None;
    }
    Some(reports.iter().filter(|r| r.verdict != Verdict::NotApplicable).count())
}

fn applicable(reports: &[BoundReport]) -> bool {
    reports.iter().any(|r| r.verdict != Verdict::NotApplicable)
}

/// Smallest `C` at which the largest number of reports apply and none fails.
/// Preconditions may depend on `C`, so coverage is not monotone; the scan
/// maximises it before bisecting down to the edge of the best window.
pub fn calibrate(name: &str, eval: impl Fn(f64) -> Result<Vec<BoundReport>, HarnessError>) -> Result<f64, HarnessError> {
    let coarse = |k: i32| 10f64.powf(k as f64 / 4.0);
    let fine = |k: i32| 10f64.powf(k as f64 / (4 * REFINE) as f64);
    let mut hits = Vec::new();
    for k in GRID.0..=GRID.1 {
        if applicable(&eval(coarse(k))?) {
            hits.push(k);
        }
    }
    let (Some(&first), Some(&last)) = (hits.first(), hits.last()) else {
        return Err(HarnessError::NoApplicableScenario(name.to_string()));
    };
    let range = ((first - 1).max(GRID.0) * REFINE)..=((last + 1).min(GRID.1) * REFINE);
    let mut best: Option<(usize, i32)> = None;
    for k in range {
        if let Some(n) = coverage(&eval(fine(k))?) {
            if n > 0 && best.is_none_or(|(b, _)| n > b) {
                best = Some((n, k));
            }
        }
    }
    let Some((n, k)) = best else {
        return Err(HarnessError::NeverHolds(name.to_string(), coarse(last)));
    };
    let (mut lo, mut hi) = (fine(k - 1), fine(k));
    while hi / lo - 1.0 > REL_TOL {
        let mid = (lo * hi).sqrt();
        if coverage(&eval(mid)?).is_some_and(|m| m >= n) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Calibrates `family` over already prepared scenarios.
pub fn calibrate_prepared(prepared: &[&Prepared], family: &str) -> Result<f64, HarnessError> {
    calibrate(family, |c| {
        let parts: Result<Vec<Vec<BoundReport>>, HarnessError> = prepared.par_iter().map(|p| p.evaluate(family, c)).collect();
        Ok(parts?.into_iter().flatten().collect())
    })
}

pub fn calibrate_constant(scenarios: &[Scenario], family: &str) -> Result<f64, HarnessError> {
    let prepared: Result<Vec<Prepared>, HarnessError> = scenarios.par_iter().map(prepare).collect();
    let prepared = prepared?;
    calibrate_prepared(&prepared.iter().collect::<Vec<_>>(), family)
}
