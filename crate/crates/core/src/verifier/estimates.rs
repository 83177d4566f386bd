//! Trajectory and family checks of the energy, L², M′ and H¹ estimates.

use serde::Serialize;

use super::{EstimateVerdict, RunRecord, Status};
use crate::diagnostics::{dissipation_residual, DiagnosticsSample};
use crate::error::{Error, Result};
use crate::integrator::OutcomeKind;
use crate::nonlinearity::HypothesisReport;

/// Relative slack allowed in estimate comparisons.
const SLACK: f64 = 1e-6;
/// Largest dissipation residual, relative to the energy scale, for which a
/// run counts as accurately integrated.
const RESIDUAL_FRACTION: f64 = 1e-3;
/// Candidate decay rates: 20 per decade on `[1e-6, 1e3]`.
const DECADES: (i32, i32) = (-6, 3);
const PER_DECADE: i32 = 20;

fn rate_grid() -> impl Iterator<Item = f64> {
    (DECADES.0 * PER_DECADE..=DECADES.1 * PER_DECADE)
        .map(|k| 10f64.powf(k as f64 / PER_DECADE as f64))
}

fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, |m, x| m.max(x.abs()))
}

fn residual_or_zero(samples: &[DiagnosticsSample]) -> Result<f64> {
    if samples.len() < 2 {
        Ok(0.0)
    } else {
        dissipation_residual(samples)
    }
}

/// `I₀ = (C₀‖γ‖²_∞/ε)^{(p₀+1)/(p₀−1)}`.
pub fn i0_formula(c0: f64, gamma_inf: f64, epsilon: f64, p0: f64) -> Result<f64> {
    if !(p0 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "p0 must exceed 1, got {p0}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(c0 >= 0.0 && gamma_inf >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C0 and gamma_inf must be nonnegative, got {c0} and {gamma_inf}"
        )));
    }
    if gamma_inf == 0.0 {
        return Ok(0.0);
    }
    Ok((c0 * gamma_inf * gamma_inf / epsilon).powf((p0 + 1.0) / (p0 - 1.0)))
}

/// Energy is non-increasing up to the dissipation residual and bounded
/// below. With a family `floor` the margin is `inf E + floor`; otherwise the
/// floor is the run's own `max(0, −inf E)`. The run must also satisfy the
/// energy equality to within a small fraction of its energy.
pub fn check_energy_monotone_and_bounded(
    run: &RunRecord,
    floor: Option<f64>,
) -> Result<EstimateVerdict> {
    run.require_global("energy bound")?;
    let s = &run.samples;
    let residual = residual_or_zero(s)?;
    let scale = max_abs(s.iter().map(|x| x.energy));
    let tol = residual + 1e-12 * scale;
    let max_increase = s
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let inf_e = s.iter().map(|x| x.energy).fold(f64::INFINITY, f64::min);
    let floor = floor.unwrap_or((-inf_e).max(0.0));
    let margin = inf_e + floor;
    // Any increase is bounded by the residual by construction, so the
    // residual itself must also be small against the energy scale.
    let scale_lin = max_abs(s.iter().map(|x| x.energy_lin));
    let bound = RESIDUAL_FRACTION * scale.max(scale_lin);
    let accurate = residual <= bound;
    let monotone = max_increase <= tol;
    let ok = accurate && monotone && inf_e.is_finite() && margin >= -tol;
    let status = if ok { Status::Holds } else { Status::Fails };
    let details = format!(
        "inf E = {inf_e:.6e}, largest increase {max_increase:.3e} against tolerance {tol:.3e}, \
         residual {residual:.3e} against accuracy bound {bound:.3e}"
    );
    Ok(
        EstimateVerdict::new("energy_monotone_and_bounded", status, margin, details)
            .with("inf_energy", inf_e)
            .with("floor", floor)
            .with("dissipation_residual", residual)
            .with("max_increase", max_increase),
    )
}

/// For undamped runs: `min E ≥ −10 × dissipation residual`.
pub fn check_undamped_energy_sign(run: &RunRecord) -> Result<EstimateVerdict> {
    run.require_global("undamped energy sign")?;
    if run.gamma_inf != 0.0 {
        return Err(Error::Inapplicable("run is damped".into()));
    }
    let residual = residual_or_zero(&run.samples)?;
    let min_e = run
        .samples
        .iter()
        .map(|x| x.energy)
        .fold(f64::INFINITY, f64::min);
    let tol = 10.0 * residual;
    let margin = min_e + tol;
    let status = if margin >= 0.0 {
        Status::Holds
    } else {
        Status::Fails
    };
    Ok(EstimateVerdict::new(
        "undamped_energy_nonnegative",
        status,
        margin,
        format!("min E = {min_e:.6e}, tolerance {tol:.3e}"),
    )
    .with("min_energy", min_e))
}

/// `a + b·x` with `b ≥ 0` lying on or above every point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineEnvelope {
    pub intercept: f64,
    pub slope: f64,
    /// `min (a + b x − y)`; zero for the tight envelope.
    pub margin: f64,
}

/// Least-squares slope (clamped at zero), then the smallest intercept that
/// puts every point under the line.
pub fn affine_upper_envelope(points: &[(f64, f64)]) -> Result<AffineEnvelope> {
    if points.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if points
        .iter()
        .any(|(x, y)| !(x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(
            "non-finite point in envelope fit".into(),
        ));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let intercept = points
        .iter()
        .map(|&(x, y)| y - slope * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = points
        .iter()
        .map(|&(x, y)| intercept + slope * x - y)
        .fold(f64::INFINITY, f64::min);
    Ok(AffineEnvelope {
        intercept,
        slope,
        margin,
    })
}

/// Smallest `A` with `M(t) ≤ A + (M₀ − A)e^{−cs}` at every sample.
fn dominating_level(ts: &[f64], ms: &[f64], c: f64) -> f64 {
    let m0 = ms[0];
    let mut a = 0.0f64;
    for (&s, &m) in ts.iter().zip(ms).skip(1) {
        let e = (-c * s).exp();
        let denom = -(-c * s).exp_m1();
        if denom > 0.0 {
            a = a.max((m - m0 * e) / denom);
        }
    }
    a
}

/// The L² shape `M(t) ≤ A + (M(0) − A)e^{−ct}`.
///
/// For each candidate `c` the smallest dominating `A` is computed exactly;
/// `c` is then chosen by least squares on the log-residuals over
/// `fit_window` (absolute times, default the whole run), ties toward the
/// smaller rate.
pub fn check_l2_exponential_shape(
    run: &RunRecord,
    fit_window: Option<(f64, f64)>,
) -> Result<EstimateVerdict> {
    run.require_global("L² shape")?;
    let s = &run.samples;
    let t0 = s[0].t;
    let ts: Vec<f64> = s.iter().map(|x| x.t - t0).collect();
    let ms: Vec<f64> = s.iter().map(|x| x.m).collect();
    if ms.iter().any(|m| !m.is_finite()) {
        let v = EstimateVerdict::new(
            "l2_exponential_shape",
            Status::Fails,
            f64::NEG_INFINITY,
            "non-finite M".into(),
        );
        return Ok(v);
    }
    let (lo, hi) = fit_window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let in_window: Vec<usize> = (0..s.len())
        .filter(|&i| s[i].t >= lo && s[i].t <= hi)
        .collect();
    let m0 = ms[0];
    let ln = |x: f64| x.max(1e-300).ln();

    let mut best: Option<(f64, f64, f64)> = None; // (sse, c, a)
    for c in rate_grid() {
        let a = dominating_level(&ts, &ms, c);
        let sse: f64 = in_window
            .iter()
            .map(|&i| {
                let env = a + (m0 - a) * (-c * ts[i]).exp();
                (ln(env) - ln(ms[i])).powi(2)
            })
            .sum();
        match best {
            Some((b, _, _)) if !(sse < b * (1.0 - 1e-9)) => {}
            _ => best = Some((sse, c, a)),
        }
    }
    let (sse, c, a) = best.expect("rate grid is nonempty");
    let margin = ts
        .iter()
        .zip(&ms)
        .map(|(&t, &m)| a + (m0 - a) * (-c * t).exp() - m)
        .fold(f64::INFINITY, f64::min);
    let scale = max_abs(ms.iter().copied());
    let ok = a.is_finite() && c > 0.0 && margin >= -SLACK * scale.max(f64::MIN_POSITIVE);
    let status = if ok { Status::Holds } else { Status::Fails };
    Ok(EstimateVerdict::new(
        "l2_exponential_shape",
        status,
        margin,
        format!("M(t) ≤ {a:.6e} + (M(0) − A)e^{{−{c:.4e} t}}"),
    )
    .with("A", a)
    .with("c", c)
    .with("M0", m0)
    .with("E0", run.initial_energy())
    .with("log_sse", sse))
}

/// `K(c)`: smallest level with `M′ ≤ K` and
/// `M′(t) ≥ M′(0)e^{−ct} − K(1 − e^{−ct})`.
fn mprime_level(ts: &[f64], mp: &[f64], c: f64) -> f64 {
    let sup = mp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut k = sup;
    for (&s, &m) in ts.iter().zip(mp).skip(1) {
        let e = (-c * s).exp();
        let denom = -(-c * s).exp_m1();
        if denom > 0.0 {
            k = k.max((mp[0] * e - m) / denom);
        }
    }
    k
}

/// Two-sided M′ envelope with a shared level `K` and rate `c₂`, chosen to
/// minimise `K` (ties toward the smaller rate).
pub fn check_mprime_bounds(run: &RunRecord) -> Result<EstimateVerdict> {
    run.require_global("M′ bounds")?;
    let s = &run.samples;
    let t0 = s[0].t;
    let ts: Vec<f64> = s.iter().map(|x| x.t - t0).collect();
    let mp: Vec<f64> = s.iter().map(|x| x.mp).collect();
    if mp.iter().any(|m| !m.is_finite()) {
        return Ok(EstimateVerdict::new(
            "mprime_bounds",
            Status::Fails,
            f64::NEG_INFINITY,
            "non-finite M′".into(),
        ));
    }
    let mut best: Option<(f64, f64)> = None;
    for c in rate_grid() {
        let k = mprime_level(&ts, &mp, c);
        match best {
            Some((b, _)) if !(k < b - 1e-9 * b.abs().max(f64::MIN_POSITIVE)) => {}
            _ => best = Some((k, c)),
        }
    }
    let (k, c) = best.expect("rate grid is nonempty");
    let margin = ts
        .iter()
        .zip(&mp)
        .map(|(&t, &m)| {
            let e = (-c * t).exp();
            let lower = mp[0] * e - k * (1.0 - e);
            (k - m).min(m - lower)
        })
        .fold(f64::INFINITY, f64::min);
    let sup_abs = max_abs(mp.iter().copied());
    let sup = mp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ok = k.is_finite() && margin >= -SLACK * sup_abs.max(f64::MIN_POSITIVE);
    let status = if ok { Status::Holds } else { Status::Fails };
    Ok(EstimateVerdict::new(
        "mprime_bounds",
        status,
        margin,
        format!("M′(0)e^{{−c₂t}} − K(1 − e^{{−c₂t}}) ≤ M′(t) ≤ K with K = {k:.6e}, c₂ = {c:.4e}"),
    )
    .with("K", k)
    .with("c2", c)
    .with("sup_mprime", sup)
    .with("sup_abs_mprime", sup_abs)
    .with("E0", run.initial_energy()))
}

/// Smallest `c ≥ 0` with `c·e^{c·s} ≥ bound`.
pub fn exponential_envelope_constant(bound: f64, s: f64) -> f64 {
    if !(bound > 0.0) {
        return 0.0;
    }
    let g = |c: f64| c * (c * s).exp() - bound;
    let (mut lo, mut hi) = (0.0f64, bound.max(1.0));
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Uniform H¹ × L² bound in the form `‖(u, ∂ₜu)‖ ≤ c·e^{c·s}` with
/// `s = ‖u⁰‖²_{H₀¹} + ‖u¹‖²`, the tail bound with `s = |E(u⁰,u¹)|` after the
/// transient, and the time-average bound `∫₀ᵗ E_lin ≤ K(1 + t)`.
///
/// The transient ends at the first sample after which the norm never again
/// exceeds its initial value.
pub fn check_h1_uniform(run: &RunRecord, report: &HypothesisReport) -> Result<EstimateVerdict> {
    if !report.part_iii_applicable {
        return Err(Error::Inapplicable(format!(
            "uniform H¹ bounds need p ≤ d/(d−2); p = {:?}, d = {}",
            report.p, report.d
        )));
    }
    run.require_global("H¹ bound")?;
    let s = &run.samples;
    let norms: Vec<f64> = s.iter().map(|x| x.energy_norm()).collect();
    if norms.iter().any(|x| !x.is_finite()) {
        return Ok(EstimateVerdict::new(
            "h1_uniform",
            Status::Fails,
            f64::NEG_INFINITY,
            "non-finite norm".into(),
        ));
    }
    let sup = norms.iter().copied().fold(0.0, f64::max);
    let s0 = run.initial_norm_sq();
    let c = exponential_envelope_constant(sup, s0);

    let mut tail_start = norms.len() - 1;
    while tail_start > 0 && norms[tail_start - 1] <= norms[0] {
        tail_start -= 1;
    }
    let tail_sup = norms[tail_start..].iter().copied().fold(0.0, f64::max);
    let c_tail = exponential_envelope_constant(tail_sup, run.initial_energy().abs());

    let t0 = s[0].t;
    let mut integral = 0.0;
    let mut k_avg = 0.0f64;
    for w in s.windows(2) {
        integral += 0.5 * (w[1].t - w[0].t) * (w[0].energy_lin + w[1].energy_lin);
        k_avg = k_avg.max(integral / (1.0 + w[1].t - t0));
    }

    let bound = c * (c * s0).exp();
    let margin = bound - sup;
    Ok(EstimateVerdict::new(
        "h1_uniform",
        Status::Holds,
        margin,
        format!("sup ‖(u, ∂ₜu)‖ = {sup:.6e} ≤ c·e^{{c·s}} with c = {c:.6e}"),
    )
    .with("sup_norm", sup)
    .with("initial_norm_sq", s0)
    .with("c", c)
    .with("transient_T", s[tail_start].t)
    .with("tail_sup_norm", tail_sup)
    .with("c_tail", c_tail)
    .with("average_K", k_avg))
}

/// Cross-run summary of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub runs: usize,
    pub global_runs: usize,
    /// `−min E(t)` over every global run.
    pub energy_floor: f64,
    /// Fitted L² level `A` against `|E(u⁰,u¹)|`.
    pub l2_envelope: Option<AffineEnvelope>,
    /// Fitted M′ level against `|E(u⁰,u¹)|`.
    pub mprime_envelope: Option<AffineEnvelope>,
    /// Single `c` of `c·e^{c·s}` dominating every run, when applicable.
    pub h1_c: Option<f64>,
    pub h1_margin: Option<f64>,
    pub verdicts: Vec<(String, Vec<EstimateVerdict>)>,
    pub all_hold: bool,
}

pub fn family_rollup(runs: &[RunRecord], report: &HypothesisReport) -> Result<FamilyReport> {
    let global: Vec<&RunRecord> = runs
        .iter()
        .filter(|r| r.kind == OutcomeKind::Global && !r.samples.is_empty())
        .collect();
    let energy_floor = global
        .iter()
        .flat_map(|r| r.samples.iter().map(|s| s.energy))
        .fold(f64::INFINITY, f64::min);
    let energy_floor = if global.is_empty() {
        0.0
    } else {
        -energy_floor
    };

    let mut verdicts = Vec::new();
    let mut l2_points = Vec::new();
    let mut mp_points = Vec::new();
    let mut h1 = Vec::new();
    let mut all_hold = true;
    for r in &global {
        let mut vs = vec![
            check_energy_monotone_and_bounded(r, Some(energy_floor))?,
            check_l2_exponential_shape(r, None)?,
            check_mprime_bounds(r)?,
        ];
        if r.gamma_inf == 0.0 {
            vs.push(check_undamped_energy_sign(r)?);
        }
        let e0 = r.initial_energy().abs();
        l2_points.push((e0, vs[1].constant("A").unwrap_or(f64::NAN)));
        mp_points.push((e0, vs[2].constant("K").unwrap_or(f64::NAN)));
        if report.part_iii_applicable {
            let v = check_h1_uniform(r, report)?;
            h1.push((
                r.initial_norm_sq(),
                v.constant("sup_norm").unwrap_or(f64::NAN),
            ));
            vs.push(v);
        }
        all_hold &= vs.iter().all(|v| v.holds);
        verdicts.push((r.label.clone(), vs));
    }
    let l2_envelope = (!l2_points.is_empty())
        .then(|| affine_upper_envelope(&l2_points))
        .transpose()?;
    let mprime_envelope = (!mp_points.is_empty())
        .then(|| affine_upper_envelope(&mp_points))
        .transpose()?;
    let (h1_c, h1_margin) = if h1.is_empty() {
        (None, None)
    } else {
        let c = h1
            .iter()
            .map(|&(s, sup)| exponential_envelope_constant(sup, s))
            .fold(0.0, f64::max);
        let margin = h1
            .iter()
            .map(|&(s, sup)| c * (c * s).exp() - sup)
            .fold(f64::INFINITY, f64::min);
        (Some(c), Some(margin))
    };
    Ok(FamilyReport {
        runs: runs.len(),
        global_runs: global.len(),
        energy_floor,
        l2_envelope,
        mprime_envelope,
        h1_c,
        h1_margin,
        verdicts,
        all_hold,
    })
}
