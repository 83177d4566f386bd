//! Energy and virial diagnostics.
//!
//! Every quantity here is computed from the state directly; in particular
//! `M″` comes from its closed-form expression
//! `2‖v‖² − 2‖u‖²_{H₀¹} + 2∫u f(u) − 2∫γuv`, never from differencing `M`,
//! so that comparing it with finite differences of the recorded `M(t)` is an
//! independent test of the time integrator.

use std::io::{Read, Write};

use ndarray::{Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::domain::{GridField, SpectralDomain, SpectralField};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// `(t, u, ∂ₜu)` with both fields stored as spectral coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u: SpectralField,
    pub v: SpectralField,
}

impl WaveState {
    pub fn new(t: f64, u: SpectralField, v: SpectralField) -> Self {
        Self { t, u, v }
    }

    pub fn zeros(dom: &SpectralDomain) -> Self {
        Self::new(0.0, dom.zeros_spectral(), dom.zeros_spectral())
    }

    pub fn from_grid(dom: &SpectralDomain, t: f64, u: &GridField, v: &GridField) -> Result<Self> {
        Ok(Self::new(t, dom.to_spectral(u)?, dom.to_spectral(v)?))
    }

    pub fn u_grid(&self, dom: &SpectralDomain) -> Result<GridField> {
        dom.to_grid(&self.u)
    }

    pub fn v_grid(&self, dom: &SpectralDomain) -> Result<GridField> {
        dom.to_grid(&self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.v.is_finite()
    }

    /// `‖u‖²_{H₀¹} + ‖v‖²_{L²}`, the squared energy-space norm.
    pub fn energy_norm_sq(&self, dom: &SpectralDomain) -> f64 {
        dom.spectral_h1_sq(&self.u) + dom.spectral_l2_sq(&self.v)
    }
}

/// Nonnegative damping coefficient `γ(x)` on the native grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DampingProfile {
    gamma: GridField,
    gamma_inf: f64,
    uniform: Option<f64>,
}

impl DampingProfile {
    pub fn constant(dom: &SpectralDomain, value: f64) -> Result<Self> {
        Self::from_grid(GridField::new(Array3::from_elem(dom.shape(), value)))
    }

    pub fn zero(dom: &SpectralDomain) -> Self {
        Self::constant(dom, 0.0).expect("zero damping is valid")
    }

    /// `value · 𝟙_{lo ≤ x ≤ hi}` on an axis-aligned sub-box.
    pub fn indicator_box(dom: &SpectralDomain, value: f64, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != dom.d() || hi.len() != dom.d() {
            return Err(Error::Damping(format!(
                "box corners need {} components",
                dom.d()
            )));
        }
        let d = dom.d();
        let g = dom.grid_from_fn(|x| {
            let inside = (0..d).all(|a| x[a] >= lo[a] && x[a] <= hi[a]);
            if inside {
                value
            } else {
                0.0
            }
        });
        Self::from_grid(g)
    }

    pub fn from_grid(gamma: GridField) -> Result<Self> {
        let mut gamma_inf = 0.0f64;
        for &g in gamma.values() {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Damping(format!(
                    "γ must be finite and nonnegative, found {g}"
                )));
            }
            gamma_inf = gamma_inf.max(g);
        }
        let first = gamma.values().iter().next().copied().unwrap_or(0.0);
        let uniform = gamma.values().iter().all(|&g| g == first).then_some(first);
        Ok(Self {
            gamma,
            gamma_inf,
            uniform,
        })
    }

    pub fn gamma(&self) -> &GridField {
        &self.gamma
    }

    /// `‖γ‖_{L∞}`.
    pub fn gamma_inf(&self) -> f64 {
        self.gamma_inf
    }

    /// The common value when `γ` is constant in space.
    pub fn uniform(&self) -> Option<f64> {
        self.uniform
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_inf == 0.0
    }
}

/// Frozen CSV column order.
pub const CSV_COLUMNS: [&str; 13] = [
    "t", "E", "E_lin", "M", "Mp", "Mpp", "l2_u", "l2_v", "h1_u", "intF", "intUf", "intGuv",
    "intGvv",
];

/// One time row of diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    /// Full energy `E = E_lin − ∫F(u)`.
    #[serde(rename = "E")]
    pub energy: f64,
    /// Linear energy `½‖u‖²_{H₀¹} + ½‖v‖²`.
    #[serde(rename = "E_lin")]
    pub energy_lin: f64,
    /// `M = ‖u‖²_{L²}`.
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "Mp")]
    pub mp: f64,
    #[serde(rename = "Mpp")]
    pub mpp: f64,
    pub l2_u: f64,
    pub l2_v: f64,
    pub h1_u: f64,
    #[serde(rename = "intF")]
    pub int_f: f64,
    #[serde(rename = "intUf")]
    pub int_uf: f64,
    #[serde(rename = "intGuv")]
    pub int_guv: f64,
    #[serde(rename = "intGvv")]
    pub int_gvv: f64,
}

impl DiagnosticsSample {
    /// `√(h1_u + l2_v)`.
    pub fn energy_norm(&self) -> f64 {
        (self.h1_u + self.l2_v).sqrt()
    }
}

/// `(∫F(u), ∫u f(u))` on the domain's quadrature grid.
fn nonlinear_integrals(
    state: &WaveState,
    spec: &NonlinearitySpec,
    dom: &SpectralDomain,
) -> Result<(f64, f64)> {
    if spec.is_zero() {
        return Ok((0.0, 0.0));
    }
    let q = dom.to_quadrature(&state.u)?;
    let (mut int_f, mut int_uf) = (0.0, 0.0);
    for &x in q.iter() {
        int_f += spec.antiderivative(x);
        int_uf += x * spec.f(x);
    }
    let ones = Array3::<f64>::ones((1, 1, 1));
    let cell = dom.quadrature_sum(&ones);
    Ok((cell * int_f, cell * int_uf))
}

/// `(∫γuv, ∫γv²)` on the native grid.
fn damping_integrals(
    state: &WaveState,
    dom: &SpectralDomain,
    damping: &DampingProfile,
) -> Result<(f64, f64)> {
    check_damping(dom, damping)?;
    if let Some(g) = damping.uniform() {
        if g == 0.0 {
            return Ok((0.0, 0.0));
        }
        return Ok((
            g * dom.spectral_inner(&state.u, &state.v),
            g * dom.spectral_l2_sq(&state.v),
        ));
    }
    let u = state.u_grid(dom)?;
    let v = state.v_grid(dom)?;
    let (mut guv, mut gvv) = (0.0, 0.0);
    Zip::from(damping.gamma().values())
        .and(u.values())
        .and(v.values())
        .for_each(|&g, &a, &b| {
            guv += g * a * b;
            gvv += g * b * b;
        });
    let cell = dom.cell_volume();
    Ok((cell * guv, cell * gvv))
}

pub(crate) fn check_damping(dom: &SpectralDomain, damping: &DampingProfile) -> Result<()> {
    let actual = damping.gamma().shape();
    let expected = dom.shape();
    if actual != expected {
        return Err(Error::ShapeMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn check_state(dom: &SpectralDomain, state: &WaveState) -> Result<()> {
    for shape in [state.u.shape(), state.v.shape()] {
        if shape != dom.shape() {
            return Err(Error::ShapeMismatch {
                expected: dom.shape(),
                actual: shape,
            });
        }
    }
    Ok(())
}

/// `E(u, v) = ½‖u‖²_{H₀¹} + ½‖v‖²_{L²} − ∫F(u)`.
pub fn energy(state: &WaveState, spec: &NonlinearitySpec, dom: &SpectralDomain) -> Result<f64> {
    check_state(dom, state)?;
    let (int_f, _) = nonlinear_integrals(state, spec, dom)?;
    Ok(0.5 * dom.spectral_h1_sq(&state.u) + 0.5 * dom.spectral_l2_sq(&state.v) - int_f)
}

/// Fills every diagnostic for one state.
pub fn virial_sample(
    state: &WaveState,
    spec: &NonlinearitySpec,
    dom: &SpectralDomain,
    damping: &DampingProfile,
) -> Result<DiagnosticsSample> {
    check_state(dom, state)?;
    let l2_u = dom.spectral_l2_sq(&state.u);
    let l2_v = dom.spectral_l2_sq(&state.v);
    let h1_u = dom.spectral_h1_sq(&state.u);
    let uv = dom.spectral_inner(&state.u, &state.v);
    let (int_f, int_uf) = nonlinear_integrals(state, spec, dom)?;
    let (int_guv, int_gvv) = damping_integrals(state, dom, damping)?;
    let energy_lin = 0.5 * h1_u + 0.5 * l2_v;
    Ok(DiagnosticsSample {
        t: state.t,
        energy: energy_lin - int_f,
        energy_lin,
        m: l2_u,
        mp: 2.0 * uv,
        mpp: 2.0 * l2_v - 2.0 * h1_u + 2.0 * int_uf - 2.0 * int_guv,
        l2_u,
        l2_v,
        h1_u,
        int_f,
        int_uf,
        int_guv,
        int_gvv,
    })
}

/// Uniform spacing of a sample series (relative tolerance 1e-9).
pub fn sample_spacing(samples: &[DiagnosticsSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let dt = samples[1].t - samples[0].t;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSamples);
    }
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(w[1].t.abs()) {
            return Err(Error::NonUniformSamples);
        }
    }
    Ok(dt)
}

/// Worst defect of the energy equality over all sample pairs,
/// `max_{i<j} |E(t_j) − E(t_i) + ∫_{t_i}^{t_j} ∫γv²|`, with the time integral
/// by the trapezoid rule.
pub fn dissipation_residual(samples: &[DiagnosticsSample]) -> Result<f64> {
    let dt = sample_spacing(samples)?;
    // R_k = E_k − E_0 + ∫_0^{t_k}; the pairwise maximum is max R − min R.
    let mut dissipated = 0.0;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for w in samples.windows(2) {
        dissipated += 0.5 * dt * (w[0].int_gvv + w[1].int_gvv);
        let r = w[1].energy - samples[0].energy + dissipated;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(hi - lo)
}

/// Mismatch between finite differences of the recorded `M(t)` and the
/// formula values of `M′` and `M″`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VirialDefect {
    /// Difference spacing `stride · Δt`.
    pub spacing: f64,
    /// `max |δM − Mp| / max |Mp|` (centered first difference).
    pub mp_relative: f64,
    /// `max |δ²M − Mpp| / max |Mpp|` (centered second difference).
    pub mpp_relative: f64,
}

/// Compares centered differences of `M` at spacing `stride·Δt` with the
/// formula-computed `M′` and `M″` at every interior sample.
pub fn virial_identity_defect(
    samples: &[DiagnosticsSample],
    stride: usize,
) -> Result<VirialDefect> {
    let dt = sample_spacing(samples)?;
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if samples.len() < 2 * stride + 1 {
        return Err(Error::InsufficientSamples {
            needed: 2 * stride + 1,
            got: samples.len(),
        });
    }
    let h = dt * stride as f64;
    let (mut e1, mut e2, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in stride..samples.len() - stride {
        let (a, b, c) = (samples[i - stride].m, samples[i].m, samples[i + stride].m);
        let d1 = (c - a) / (2.0 * h);
        let d2 = (c - 2.0 * b + a) / (h * h);
        e1 = e1.max((d1 - samples[i].mp).abs());
        e2 = e2.max((d2 - samples[i].mpp).abs());
        s1 = s1.max(samples[i].mp.abs());
        s2 = s2.max(samples[i].mpp.abs());
    }
    let rel = |e: f64, s: f64| if s > 0.0 { e / s } else { e };
    Ok(VirialDefect {
        spacing: h,
        mp_relative: rel(e1, s1),
        mpp_relative: rel(e2, s2),
    })
}

pub fn write_csv<W: Write>(writer: W, samples: &[DiagnosticsSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a diagnostics CSV; the header must match [`CSV_COLUMNS`] exactly.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<DiagnosticsSample>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Config(format!(
            "diagnostics header must be {}, got {}",
            CSV_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
