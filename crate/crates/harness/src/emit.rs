//! CSV and JSON output of run reports.
//!
//! CSV columns, one row per bound report:
//! `scenario,inequality,lhs,rhs,verdict,l,delta,gamma,K,eps,h1,h2,lam1,lam2,C`.
//! `l` is the half-length; `gamma` is empty when not defined.

use crate::pipeline::RunReport;
use crate::HarnessError;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: [&str; 15] =
    ["scenario", "inequality", "lhs", "rhs", "verdict", "l", "delta", "gamma", "K", "eps", "h1", "h2", "lam1", "lam2", "C"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn write_csv<W: Write>(reports: &[RunReport], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        for b in &r.bounds {
            let p = &b.params;
            let f = |x: f64| x.to_string();
            w.write_record([
                r.scenario.clone(),
                b.inequality.clone(),
                f(b.lhs),
                f(b.rhs),
                b.verdict.as_str().to_string(),
                f(p.ell),
                f(p.delta),
                b.gamma.map(f).unwrap_or_default(),
                f(p.k),
                f(p.eps),
                f(p.h1),
                f(p.h2),
                f(p.lam1),
                f(p.lam2),
                f(p.c),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(reports: &[RunReport]) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn emit_reports(reports: &[RunReport], format: Format, path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    match format {
        Format::Csv => write_csv(reports, std::io::BufWriter::new(file)),
        Format::Json => {
            let mut w = std::io::BufWriter::new(file);
            w.write_all(to_json(reports)?.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(w.flush()?)
        }
    }
}

pub fn read_reports(path: &Path) -> Result<Vec<RunReport>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
