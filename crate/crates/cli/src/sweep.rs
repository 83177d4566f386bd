//! Parallel parameter sweeps and the family-level verdict file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use dampedwave::integrator::OutcomeKind;
use dampedwave::verifier::{self, FamilyReport, RunRecord};

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::run::{execute_run, write_json, RunOptions, RunSummary, FORMAT_VERSION};

#[derive(Clone, Debug, Serialize)]
pub struct FamilyRow {
    pub id: String,
    pub overrides: BTreeMap<String, toml::Value>,
    pub completed: bool,
    pub error: Option<String>,
    pub kind: Option<OutcomeKind>,
    pub t_final: Option<f64>,
    pub energy0: Option<f64>,
    pub abs_energy0: Option<f64>,
    pub initial_norm_sq: Option<f64>,
    pub gamma_inf: Option<f64>,
    pub hyp3_constant: Option<f64>,
    /// `I₀` from the run's empirical hypothesis constant (informative).
    pub i0: Option<f64>,
    pub inf_energy: Option<f64>,
    pub dissipation_residual: Option<f64>,
    pub l2_a: Option<f64>,
    pub l2_c: Option<f64>,
    pub mprime_k: Option<f64>,
    pub sup_abs_mprime: Option<f64>,
    pub sup_norm: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyFile {
    pub format_version: &'static str,
    pub sweep: SweepConfig,
    pub runs: Vec<FamilyRow>,
    pub rollup: FamilyReport,
    pub all_completed: bool,
}

impl FamilyFile {
    pub fn exit_code(&self) -> i32 {
        if self.all_completed {
            0
        } else {
            1
        }
    }
}

/// Result of one sweep point.
pub struct SweepRun {
    pub id: String,
    pub result: Result<(RunSummary, RunRecord)>,
}

fn row(
    id: &str,
    overrides: &[(String, toml::Value)],
    result: &Result<(RunSummary, RunRecord)>,
) -> FamilyRow {
    let overrides = overrides.iter().cloned().collect();
    let mut r = FamilyRow {
        id: id.to_string(),
        overrides,
        completed: result.is_ok(),
        error: None,
        kind: None,
        t_final: None,
        energy0: None,
        abs_energy0: None,
        initial_norm_sq: None,
        gamma_inf: None,
        hyp3_constant: None,
        i0: None,
        inf_energy: None,
        dissipation_residual: None,
        l2_a: None,
        l2_c: None,
        mprime_k: None,
        sup_abs_mprime: None,
        sup_norm: None,
    };
    match result {
        Err(e) => r.error = Some(e.to_string()),
        Ok((s, rec)) => {
            let c = |name: &str, key: &str| s.verdict(name).and_then(|v| v.constant(key));
            r.kind = Some(s.outcome.kind);
            r.t_final = Some(s.outcome.t_final);
            r.energy0 = Some(s.initial.energy);
            r.abs_energy0 = Some(s.initial.energy.abs());
            r.initial_norm_sq = Some(rec.initial_norm_sq());
            r.gamma_inf = Some(rec.gamma_inf);
            r.hyp3_constant = s.hyp3_constant;
            r.i0 = s.i0;
            r.inf_energy = c("energy_monotone_and_bounded", "inf_energy");
            r.dissipation_residual = s.dissipation_residual;
            r.l2_a = c("l2_exponential_shape", "A");
            r.l2_c = c("l2_exponential_shape", "c");
            r.mprime_k = c("mprime_bounds", "K");
            r.sup_abs_mprime = c("mprime_bounds", "sup_abs_mprime");
            r.sup_norm = c("h1_uniform", "sup_norm");
        }
    }
    r
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub hyp3_seed: u64,
}

/// Runs every sweep point and assembles the family file. Per-run failures
/// are recorded rather than propagated.
pub fn execute_sweep(sweep: &SweepConfig, opts: &SweepOptions) -> Result<FamilyFile> {
    let points = sweep.points()?;
    let threads = opts.threads.or(sweep.threads).unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<(RunSummary, RunRecord)>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let run_opts = RunOptions {
                    out_dir: opts.out_dir.as_ref().map(|d| d.join(&p.id)),
                    hyp3_seed: opts.hyp3_seed,
                };
                execute_run(&p.config, &run_opts).map(|a| {
                    let mut rec = a.record;
                    rec.label = p.id.clone();
                    (a.summary, rec)
                })
            })
            .collect()
    });

    let rows: Vec<FamilyRow> = points
        .iter()
        .zip(&results)
        .map(|(p, r)| row(&p.id, &p.overrides, r))
        .collect();
    let records: Vec<RunRecord> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|(_, rec)| rec.clone())
        .collect();
    let base = sweep.base.resolve()?;
    let report = base.spec.hypothesis_report(base.domain.d());
    let rollup = verifier::family_rollup(&records, &report)?;
    let family = FamilyFile {
        format_version: FORMAT_VERSION,
        sweep: sweep.clone(),
        all_completed: rows.iter().all(|r| r.completed),
        runs: rows,
        rollup,
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_json(&dir.join("family.json"), &family)?;
    }
    Ok(family)
}

pub fn family_path(dir: &Path) -> PathBuf {
    dir.join("family.json")
}
