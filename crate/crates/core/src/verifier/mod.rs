//! Executable forms of the a priori estimates and the elementary ODE lemmas.
//!
//! The estimates are existential in their constants, so trajectory checks
//! fit the smallest constants of the stated shape and report them. Family
//! roll-ups then test how those constants depend on the data.

mod catalog;
mod estimates;
mod hyp3;
mod lemmas;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::diagnostics::DiagnosticsSample;
use crate::error::{Error, Result};
use crate::integrator::{OutcomeKind, RunOutcome};

pub use catalog::{
    lemma_catalog, run_lemma_catalog, CatalogCase, CatalogEntry, LemmaKind, LemmaReport,
};
pub use estimates::{
    affine_upper_envelope, check_energy_monotone_and_bounded, check_h1_uniform,
    check_l2_exponential_shape, check_mprime_bounds, check_undamped_energy_sign,
    exponential_envelope_constant, family_rollup, i0_formula, AffineEnvelope, FamilyReport,
};
pub use hyp3::{estimate_hyp3_constant, hyp3_basis_family, hyp3_random_family, Hyp3Estimator};
pub use lemmas::{lemma_explosion_check, lemma_exponential_check, OdeTrajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The checked statement holds on the data.
    Holds,
    /// The checked statement is contradicted by the data.
    Fails,
    /// The trajectory is on the unbounded alternative of a lemma.
    DivergingBranch,
    /// The lemma's hypothesis is violated, so nothing is asserted.
    HypothesisNotSatisfied,
    /// A finite window cannot decide the lemma's conclusion.
    Inconclusive,
    /// Reported for information only; not a pass/fail statement.
    Informative,
}

impl Status {
    pub fn is_failure(self) -> bool {
        self == Status::Fails
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateVerdict {
    pub name: String,
    pub holds: bool,
    /// Worst slack observed; negative means violated.
    pub margin: f64,
    pub details: String,
    pub fitted_constants: BTreeMap<String, f64>,
    pub status: Status,
}

impl EstimateVerdict {
    fn new(name: &str, status: Status, margin: f64, details: String) -> Self {
        Self {
            name: name.to_string(),
            holds: !status.is_failure(),
            margin,
            details,
            fitted_constants: BTreeMap::new(),
            status,
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.fitted_constants.insert(key.to_string(), value);
        self
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.fitted_constants.get(key).copied()
    }
}

/// Recorded diagnostics of one run together with its outcome.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub label: String,
    pub kind: OutcomeKind,
    pub gamma_inf: f64,
    pub samples: Vec<DiagnosticsSample>,
}

impl RunRecord {
    pub fn new(
        label: impl Into<String>,
        kind: OutcomeKind,
        gamma_inf: f64,
        samples: Vec<DiagnosticsSample>,
    ) -> Self {
        Self {
            label: label.into(),
            kind,
            gamma_inf,
            samples,
        }
    }

    pub fn from_outcome(label: impl Into<String>, gamma_inf: f64, outcome: &RunOutcome) -> Self {
        Self::new(label, outcome.kind, gamma_inf, outcome.samples.clone())
    }

    /// `E(u⁰, u¹)`.
    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.energy)
    }

    /// `‖u⁰‖²_{H₀¹} + ‖u¹‖²`.
    pub fn initial_norm_sq(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.h1_u + s.l2_v)
    }

    fn require_global(&self, check: &str) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if self.kind != OutcomeKind::Global {
            return Err(Error::Inapplicable(format!(
                "{check} needs a global run, '{}' blew up",
                self.label
            )));
        }
        Ok(())
    }
}
