//! Focusing power-sum nonlinearities `f(s) = Σ λᵢ s|s|^{αᵢ−1}` and their
//! antiderivatives.
//!
//! The growth constants used by the a priori estimates are derived from the
//! exponents: `p` is the largest exponent, `p0` the smallest, and
//! `epsilon = p0 − 1` is the sharpest constant for which
//! `s f(s) ≥ (2 + epsilon) F(s)` holds term by term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `λ s|s|^{α−1}` of a power-sum nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub lambda: f64,
    pub alpha: f64,
}

impl PowerTerm {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Nonlinearity(format!(
                "coefficient lambda must be positive and finite, got {lambda}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(Error::Nonlinearity(format!(
                "exponent alpha must be finite and ≥ 1, got {alpha}"
            )));
        }
        Ok(Self { lambda, alpha })
    }

    /// `|s|^{e}` for `a = |s|`, with small integral exponents evaluated by
    /// multiplication.
    #[inline]
    fn abs_pow(a: f64, exponent: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        if exponent.fract() == 0.0 && exponent <= 16.0 {
            a.powi(exponent as i32)
        } else {
            (exponent * a.ln()).exp()
        }
    }

    #[inline]
    fn f(&self, s: f64) -> f64 {
        self.lambda * s * Self::abs_pow(s.abs(), self.alpha - 1.0)
    }

    #[inline]
    fn antiderivative(&self, s: f64) -> f64 {
        self.lambda * Self::abs_pow(s.abs(), self.alpha + 1.0) / (self.alpha + 1.0)
    }
}

/// A validated power-sum nonlinearity. An empty term list is the zero map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonlinearitySpec {
    terms: Vec<PowerTerm>,
}

impl NonlinearitySpec {
    /// Builds a spec from terms in any order. Terms are sorted by exponent;
    /// the smallest exponent must exceed 1.
    pub fn new(terms: impl IntoIterator<Item = PowerTerm>) -> Result<Self> {
        let mut terms: Vec<PowerTerm> = terms
            .into_iter()
            .map(|t| PowerTerm::new(t.lambda, t.alpha))
            .collect::<Result<_>>()?;
        terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        if let Some(first) = terms.first() {
            if first.alpha <= 1.0 {
                return Err(Error::Nonlinearity(format!(
                    "smallest exponent must exceed 1 so that epsilon = p0 - 1 > 0, got p0 = {}",
                    first.alpha
                )));
            }
        }
        Ok(Self { terms })
    }

    /// Convenience constructor from `(lambda, alpha)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(lambda, alpha)| PowerTerm { lambda, alpha }),
        )
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn cubic() -> Self {
        Self {
            terms: vec![PowerTerm {
                lambda: 1.0,
                alpha: 3.0,
            }],
        }
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest exponent.
    pub fn p(&self) -> Option<f64> {
        self.terms.last().map(|t| t.alpha)
    }

    /// Smallest exponent.
    pub fn p0(&self) -> Option<f64> {
        self.terms.first().map(|t| t.alpha)
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.p0().map(|p0| p0 - 1.0)
    }

    /// `f(s) = Σ λᵢ s|s|^{αᵢ−1}`.
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.f(s)).sum()
    }

    /// `F(s) = ∫₀ˢ f = Σ λᵢ |s|^{αᵢ+1}/(αᵢ+1)`.
    #[inline]
    pub fn antiderivative(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.antiderivative(s)).sum()
    }

    /// Constant `C = Σ λᵢ αᵢ` of the local Lipschitz bound
    /// `|f(a) − f(b)| ≤ C|a − b|(1 + |a|^{p−1} + |b|^{p−1})`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.terms.iter().map(|t| t.lambda * t.alpha).sum()
    }

    pub fn hypothesis_report(&self, d: usize) -> HypothesisReport {
        HypothesisReport::new(self, d)
    }
}

/// Exponent conditions of the main estimates for a given dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub d: usize,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub epsilon: Option<f64>,
    /// `p < (d+2)/(d−2)`: energy bound and L² estimate apply.
    pub subcritical_i_ii: bool,
    /// `p ≤ d/(d−2)`: uniform H¹ bounds apply.
    pub part_iii_applicable: bool,
    /// The estimates are stated for `d ≥ 3` only.
    pub within_theorem_scope: bool,
}

impl HypothesisReport {
    fn new(spec: &NonlinearitySpec, d: usize) -> Self {
        let (subcritical, part_iii) = match spec.p() {
            // The zero map satisfies every growth condition.
            None => (true, true),
            // For d ≤ 2 both critical exponents are infinite.
            Some(_) if d <= 2 => (true, true),
            Some(p) => {
                let d = d as f64;
                (p < (d + 2.0) / (d - 2.0), p <= d / (d - 2.0))
            }
        };
        Self {
            d,
            p: spec.p(),
            p0: spec.p0(),
            epsilon: spec.epsilon(),
            subcritical_i_ii: subcritical,
            part_iii_applicable: part_iii,
            within_theorem_scope: d >= 3,
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.within_theorem_scope {
            out.push(format!(
                "dimension d = {} is outside the d ≥ 3 range of the estimates",
                self.d
            ));
        }
        if !self.subcritical_i_ii {
            out.push("p ≥ (d+2)/(d-2): energy-subcritical condition fails".into());
        } else if !self.part_iii_applicable {
            out.push("p > d/(d-2): uniform H¹ bounds are not covered".into());
        }
        out
    }
}
