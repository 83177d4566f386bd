//! Human-readable summaries of output directories.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use dampedwave::diagnostics::{self, read_csv};

use crate::error::{CliError, Result};

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn num(v: &serde_json::Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.6e}"),
        None => "-".into(),
    }
}

/// Describes a run directory (`summary.json`, `series.csv`) or a sweep
/// directory (`family.json`).
pub fn describe(dir: &Path) -> Result<String> {
    let mut out = String::new();
    let family = dir.join("family.json");
    if family.exists() {
        let f = read_json(&family)?;
        let runs = f["runs"].as_array().cloned().unwrap_or_default();
        writeln!(
            out,
            "sweep: {} runs, all completed: {}",
            runs.len(),
            f["all_completed"]
        )
        .unwrap();
        writeln!(
            out,
            "{:<10} {:<8} {:>14} {:>14} {:>14} {:>14}",
            "id", "outcome", "E0", "inf E", "L2 A", "I0"
        )
        .unwrap();
        for r in &runs {
            writeln!(
                out,
                "{:<10} {:<8} {:>14} {:>14} {:>14} {:>14}",
                r["id"].as_str().unwrap_or("?"),
                r["kind"].as_str().unwrap_or("error"),
                num(&r["energy0"]),
                num(&r["inf_energy"]),
                num(&r["l2_a"]),
                num(&r["i0"]),
            )
            .unwrap();
        }
        let roll = &f["rollup"];
        writeln!(out, "energy floor: {}", num(&roll["energy_floor"])).unwrap();
        writeln!(out, "H1 envelope c: {}", num(&roll["h1_c"])).unwrap();
        writeln!(out, "all verdicts hold: {}", roll["all_hold"]).unwrap();
        return Ok(out);
    }
    let summary = dir.join("summary.json");
    if summary.exists() {
        let s = read_json(&summary)?;
        let o = &s["outcome"];
        writeln!(
            out,
            "outcome: {} ({}) at t = {} after {} steps",
            o["kind"].as_str().unwrap_or("?"),
            o["reason"].as_str().unwrap_or("?"),
            num(&o["t_final"]),
            o["steps"]
        )
        .unwrap();
        writeln!(
            out,
            "E(0) = {}, final E = {}",
            num(&s["initial"]["E"]),
            num(&s["final_norms"]["E"])
        )
        .unwrap();
        writeln!(
            out,
            "dissipation residual: {}",
            num(&s["dissipation_residual"])
        )
        .unwrap();
        if !s["error_vs_closed_form"].is_null() {
            writeln!(
                out,
                "error vs closed form: {}",
                num(&s["error_vs_closed_form"])
            )
            .unwrap();
        }
        for w in s["warnings"].as_array().into_iter().flatten() {
            writeln!(out, "warning: {}", w.as_str().unwrap_or_default()).unwrap();
        }
        for v in s["verdicts"].as_array().into_iter().flatten() {
            writeln!(
                out,
                "{:<30} {:<24} margin {}",
                v["name"].as_str().unwrap_or("?"),
                v["status"].as_str().unwrap_or("?"),
                num(&v["margin"])
            )
            .unwrap();
        }
        return Ok(out);
    }
    let csv = dir.join("series.csv");
    if csv.exists() {
        let file = File::open(&csv).map_err(|e| CliError::io(&csv, e))?;
        let samples = read_csv(file)?;
        writeln!(out, "{} samples", samples.len()).unwrap();
        if samples.len() >= 3 {
            writeln!(
                out,
                "dissipation residual: {:.6e}",
                diagnostics::dissipation_residual(&samples)?
            )
            .unwrap();
            let d = diagnostics::virial_identity_defect(&samples, 1)?;
            writeln!(
                out,
                "M″ relative defect at spacing {:.3e}: {:.6e}",
                d.spacing, d.mpp_relative
            )
            .unwrap();
        }
        return Ok(out);
    }
    Err(CliError::Config(format!(
        "{} has no family.json, summary.json or series.csv",
        dir.display()
    )))
}
