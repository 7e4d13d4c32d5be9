//! One-axis parameter sweeps over a scenario file.

use std::fs;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{set_field, Scenario};
use crate::pipeline::{run, Stage};

/// Metrics merged into the sweep table, in column order.
pub const METRICS: [&str; 6] = [
    "t_est",
    "certificate.upper",
    "certificate.lower",
    "profile.exponent",
    "refinement.min_contraction",
    "refinement.l1_error",
];

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Vec<Option<f64>>,
    pub passed: bool,
    pub error: Option<String>,
}

/// Runs one scenario per value (concurrently, each in its own directory)
/// and writes `sweep.csv`. Failures are recorded per row.
pub fn sweep(base: &str, axis: &str, values: &[f64], out: &Path, strict: bool) -> anyhow::Result<Vec<SweepRow>> {
    let doc: toml::Table = toml::from_str(base).context("config schema violation")?;
    fs::create_dir_all(out)?;
    let slug = axis.replace('.', "_");
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let attempt = || -> anyhow::Result<SweepRow> {
                let mut d = doc.clone();
                set_field(&mut d, axis, value)?;
                let sc = Scenario::parse(&toml::to_string(&d)?)?;
                let outcome = run(&sc, &out.join(format!("{slug}_{i:03}")), &Stage::ALL)?;
                Ok(SweepRow {
                    value,
                    metrics: METRICS.iter().map(|k| outcome.metrics.get(*k).copied()).collect(),
                    passed: outcome.passed(strict),
                    error: None,
                })
            };
            attempt().unwrap_or_else(|e| SweepRow {
                value,
                metrics: vec![None; METRICS.len()],
                passed: false,
                error: Some(format!("{e:#}")),
            })
        })
        .collect();

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    let mut header = vec![axis.to_string()];
    header.extend(METRICS.iter().map(|s| s.to_string()));
    header.extend(["passed".into(), "error".into()]);
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![format!("{}", r.value)];
        rec.extend(r.metrics.iter().map(|m| m.map(|x| format!("{x}")).unwrap_or_default()));
        rec.push(r.passed.to_string());
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}
