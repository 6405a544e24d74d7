//! CSV and JSON emission.
//!
//! CSV contract: '.' decimal separator, '\n' line endings, fixed column
//! order, shortest round-trip float formatting. Every file begins with the
//! manifest comment header.

use std::fs;
use std::path::Path;

use anyhow::Context;
use etrack_core::simharness::MetricsReport;
use etrack_core::sweep::SweepRow;

use crate::manifest::RunManifest;

pub fn write_sweep_csv(path: &Path, manifest: &RunManifest, rows: &[SweepRow]) -> anyhow::Result<()> {
    let mut out = manifest.csv_header();
    out.push_str("v,turn_rate_var_deg2,nu_optimal,nu_closed,rel_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.v, r.turn_rate_var_deg2, r.nu_optimal, r.nu_closed, r.rel_err
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_steps_csv(path: &Path, manifest: &RunManifest, report: &MetricsReport) -> anyhow::Result<()> {
    let mut out = manifest.csv_header();
    out.push_str("k,estimator,gw,anees_x,anees_ext,nu,logdet_V\n");
    for k in 0..report.n_steps {
        for est in &report.estimators {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                k + 1,
                est.name,
                est.gw[k],
                est.anees_x[k],
                est.anees_ext[k],
                est.mean_nu[k],
                est.mean_logdet_v[k]
            ));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_summary_json(
    path: &Path,
    manifest: &RunManifest,
    report: &MetricsReport,
) -> anyhow::Result<()> {
    let estimators: Vec<serde_json::Value> = report
        .estimators
        .iter()
        .map(|e| {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
            let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            serde_json::json!({
                "name": e.name,
                "mean_gw": mean(&e.gw),
                "max_gw": max(&e.gw),
                "mean_anees_x": mean(&e.anees_x),
                "mean_anees_ext": mean(&e.anees_ext),
                "included_runs": e.included_runs,
                "diverged_runs": e.diverged_runs,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "manifest": manifest,
        "scenario": report.scenario,
        "n_runs": report.n_runs,
        "n_steps": report.n_steps,
        "master_seed": report.master_seed,
        "estimators": estimators,
        "per_step": report,
    });
    fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))
}
