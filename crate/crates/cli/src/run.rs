//! Execution of a single configured run and its output files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dampedwave::checkpoint::FieldFile;
use dampedwave::diagnostics::{self, DiagnosticsSample, VirialDefect, WaveState};
use dampedwave::domain::PoincareCheck;
use dampedwave::integrator::{evolve_observed, OutcomeKind, OutcomeReason, RunOutcome};
use dampedwave::nonlinearity::HypothesisReport;
use dampedwave::verifier::{self, EstimateVerdict, Hyp3Estimator, RunRecord};

use crate::config::{ModeAmplitude, ResolvedRun, RunConfig};
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: &str = "1";
/// Random fields added to the hypothesis-constant family.
const HYP3_RANDOM_FIELDS: usize = 100;
/// Every this many recorded samples a snapshot joins that family.
const HYP3_SNAPSHOT_EVERY: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeSummary {
    pub kind: OutcomeKind,
    pub reason: OutcomeReason,
    pub t_final: f64,
    pub steps: usize,
    pub confirmed: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub format_version: &'static str,
    pub config: RunConfig,
    pub poincare: PoincareCheck,
    pub hypothesis: HypothesisReport,
    pub warnings: Vec<String>,
    pub outcome: OutcomeSummary,
    pub initial: DiagnosticsSample,
    pub final_norms: DiagnosticsSample,
    pub dissipation_residual: Option<f64>,
    pub virial_defect: Option<VirialDefect>,
    pub hyp3_constant: Option<f64>,
    pub i0: Option<f64>,
    pub verdicts: Vec<EstimateVerdict>,
    /// Largest coefficient error against the exact linear solution.
    pub error_vs_closed_form: Option<f64>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.outcome.kind {
            OutcomeKind::Global => 0,
            OutcomeKind::BlowUp => 2,
        }
    }

    pub fn verdict(&self, name: &str) -> Option<&EstimateVerdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub outcome: RunOutcome,
    pub record: RunRecord,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Where to write `series.csv`, `summary.json` and checkpoints.
    pub out_dir: Option<PathBuf>,
    /// Seed of the random fields in the hypothesis-constant family.
    pub hyp3_seed: u64,
}

/// `(û(t), v̂(t))` of `û″ + γû′ + ω₀²û = 0` with `û(0) = a`, `û′(0) = b`.
pub fn damped_oscillator(omega0_sq: f64, gamma: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    let disc = omega0_sq - 0.25 * gamma * gamma;
    let decay = (-0.5 * gamma * t).exp();
    let b_eff = b + 0.5 * gamma * a;
    // û = e^{−γt/2}(a·C(t) + b_eff·S(t)) with the branch-specific C, S.
    let (c, s, dc, ds) = if disc > 0.0 {
        let w = disc.sqrt();
        let (sn, cs) = (w * t).sin_cos();
        (cs, sn / w, -w * sn, cs)
    } else if disc < 0.0 {
        let k = (-disc).sqrt();
        let (sh, ch) = ((k * t).sinh(), (k * t).cosh());
        (ch, sh / k, k * sh, ch)
    } else {
        (1.0, t, 0.0, 1.0)
    };
    let inner = a * c + b_eff * s;
    let d_inner = a * dc + b_eff * ds;
    (decay * inner, decay * (d_inner - 0.5 * gamma * inner))
}

struct ClosedForm {
    gamma: f64,
    modes: Vec<([usize; 3], f64, f64, f64)>,
    max_error: f64,
}

impl ClosedForm {
    fn new(run: &ResolvedRun, gamma: f64, modes: &[ModeAmplitude]) -> Result<Self> {
        let mut merged: Vec<([usize; 3], f64, f64, f64)> = Vec::new();
        for m in modes {
            let idx = run.domain.mode_index(&m.k)?;
            let w2 = run.domain.eigenvalues()[idx] + run.domain.beta();
            match merged.iter_mut().find(|e| e.0 == idx) {
                Some(e) => {
                    e.2 += m.u;
                    e.3 += m.v;
                }
                None => merged.push((idx, w2, m.u, m.v)),
            }
        }
        let mut cf = Self {
            gamma,
            modes: merged,
            max_error: 0.0,
        };
        cf.observe(&run.initial, run.initial.t);
        Ok(cf)
    }

    fn observe(&mut self, state: &WaveState, t0: f64) {
        let t = state.t - t0;
        for &(idx, w2, a, b) in &self.modes {
            let (u, v) = damped_oscillator(w2, self.gamma, a, b, t);
            let eu = (state.u.values()[idx] - u).abs();
            let ev = (state.v.values()[idx] - v).abs();
            self.max_error = self.max_error.max(eu).max(ev);
        }
    }
}

fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("step-{step:08}.dwf"))
}

fn write_field(path: &Path, file: &FieldFile) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, file.to_bytes()).map_err(|e| CliError::io(path, e))
}

/// Runs `cfg` and, when `opts.out_dir` is set, writes its artifacts.
pub fn execute_run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let run = cfg.resolve()?;
    let dom = &run.domain;
    let report = run.spec.hypothesis_report(dom.d());
    let mut hyp3 = if run.spec.is_zero() {
        None
    } else {
        let mut est = Hyp3Estimator::new(dom, &run.spec)?;
        for f in verifier::hyp3_basis_family(dom)
            .iter()
            .chain(&verifier::hyp3_random_family(
                dom,
                opts.hyp3_seed,
                HYP3_RANDOM_FIELDS,
            ))
        {
            est.add(f)?;
        }
        est.add(&run.initial.u)?;
        Some(est)
    };
    let mut closed = match cfg.closed_form_modes() {
        Some((gamma, modes)) => Some(ClosedForm::new(&run, gamma, &modes)?),
        None => None,
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }

    let t0 = run.initial.t;
    let snapshot_every = HYP3_SNAPSHOT_EVERY * run.stepper.sample_every;
    let mut step = 0usize;
    let mut observer_error: Option<CliError> = None;
    let outcome = evolve_observed(
        &run.initial,
        &run.spec,
        dom,
        &run.damping,
        &run.stepper,
        |state| {
            step += 1;
            if let Some(cf) = closed.as_mut() {
                cf.observe(state, t0);
            }
            if let Some(est) = hyp3.as_mut() {
                if step.is_multiple_of(snapshot_every) {
                    est.add(&state.u)?;
                }
            }
            if let Some(dir) = &opts.out_dir {
                let every = cfg.outputs.checkpoint_every;
                if every > 0 && step.is_multiple_of(every) {
                    let file = FieldFile::from_state(dom, state)?;
                    if let Err(e) = write_field(&checkpoint_path(dir, step), &file) {
                        observer_error = Some(e);
                        return Err(dampedwave::error::Error::Stepper(
                            "checkpoint write failed".into(),
                        ));
                    }
                }
            }
            Ok(())
        },
    );
    if let Some(e) = observer_error {
        return Err(e);
    }
    let outcome = outcome?;

    let initial = diagnostics::virial_sample(&run.initial, &run.spec, dom, &run.damping)?;
    let final_norms =
        diagnostics::virial_sample(&outcome.final_state, &run.spec, dom, &run.damping)?;
    let record = RunRecord::from_outcome("run", run.damping.gamma_inf(), &outcome);
    let (residual, defect) = if outcome.samples.len() >= 3 {
        (
            Some(diagnostics::dissipation_residual(&outcome.samples)?),
            Some(diagnostics::virial_identity_defect(&outcome.samples, 1)?),
        )
    } else {
        (None, None)
    };
    let hyp3_constant = hyp3.as_ref().map(|e| e.value()).transpose()?;
    let i0 = match (hyp3_constant, run.spec.epsilon(), run.spec.p0()) {
        (Some(c0), Some(eps), Some(p0)) => {
            Some(verifier::i0_formula(c0, run.damping.gamma_inf(), eps, p0)?)
        }
        _ => None,
    };
    let mut verdicts = Vec::new();
    if outcome.kind == OutcomeKind::Global {
        verdicts.push(verifier::check_energy_monotone_and_bounded(&record, None)?);
        if run.damping.is_zero() {
            verdicts.push(verifier::check_undamped_energy_sign(&record)?);
        }
        if record.samples.len() >= 2 {
            verdicts.push(verifier::check_l2_exponential_shape(&record, None)?);
            verdicts.push(verifier::check_mprime_bounds(&record)?);
        }
        if report.part_iii_applicable {
            verdicts.push(verifier::check_h1_uniform(&record, &report)?);
        }
    }
    let summary = RunSummary {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        poincare: dom.poincare_check(),
        warnings: report.warnings(),
        hypothesis: report,
        outcome: OutcomeSummary {
            kind: outcome.kind,
            reason: outcome.reason,
            t_final: outcome.t_final,
            steps: outcome.steps,
            confirmed: outcome.confirmed,
        },
        initial,
        final_norms,
        dissipation_residual: residual,
        virial_defect: defect,
        hyp3_constant,
        i0,
        verdicts,
        error_vs_closed_form: closed.map(|c| c.max_error),
    };

    if let Some(dir) = &opts.out_dir {
        write_outputs(dir, cfg, dom, &summary, &outcome)?;
    }
    Ok(RunArtifacts {
        summary,
        outcome,
        record,
    })
}

fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    dom: &dampedwave::domain::SpectralDomain,
    summary: &RunSummary,
    outcome: &RunOutcome,
) -> Result<()> {
    let csv_path = dir.join("series.csv");
    let file = File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let rows: Vec<DiagnosticsSample> = outcome
        .samples
        .iter()
        .step_by(cfg.outputs.csv_stride)
        .copied()
        .collect();
    diagnostics::write_csv(BufWriter::new(file), &rows)?;
    write_json(&dir.join("summary.json"), summary)?;
    if outcome.final_state.is_finite() {
        write_field(
            &dir.join("final.dwf"),
            &FieldFile::from_state(dom, &outcome.final_state)?,
        )?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
