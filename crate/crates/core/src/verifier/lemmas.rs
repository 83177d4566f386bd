//! Finite-window checkers for the two elementary ODE lemmas.
//!
//! Explosion lemma: if `M ≥ 0` and `(M′)² ≤ δ M M″` with `0 < δ < 1` on
//! `[T, ∞)`, then `M` is non-increasing. Exponential lemma: if
//! `M₀″ ≥ C M₀` on `[0, ∞)`, then either `M₀ → ∞` or
//! `M₀(t) ≤ M₀(0)e^{−√C t}`.
//!
//! Both conclusions concern infinite horizons. On a finite window the
//! checkers use the quantitative steps of the proofs instead: a point with
//! `M′(T₀) > 0` forces `M` to blow up before
//! `T₀ + δ/(1−δ)·M(T₀)/M′(T₀)`, and a point with `m′(t₀) > 0` for
//! `m = M₀e^{√C t}` forces an explicit exponential lower bound.

use super::{EstimateVerdict, Status};
use crate::error::{Error, Result};

/// Relative derivative tolerance when derivatives are supplied exactly.
const ANALYTIC_TOL: f64 = 1e-12;
/// Relative slack in the value comparisons of the conclusions.
const VALUE_TOL: f64 = 1e-6;

/// A sampled scalar trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeTrajectory {
    t: Vec<f64>,
    m: Vec<f64>,
    exact: Option<(Vec<f64>, Vec<f64>)>,
}

impl OdeTrajectory {
    pub fn new(t: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if t.len() != m.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times but {} values",
                t.len(),
                m.len()
            )));
        }
        if t.len() < 3 {
            return Err(Error::InsufficientSamples {
                needed: 3,
                got: t.len(),
            });
        }
        if t.iter().chain(&m).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "trajectory has non-finite entries".into(),
            ));
        }
        let h = t[1] - t[0];
        if !(h > 0.0)
            || t.windows(2)
                .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(w[1].abs()))
        {
            return Err(Error::NonUniformSamples);
        }
        Ok(Self { t, m, exact: None })
    }

    /// Samples `f` on `n + 1` points of `[a, b]`.
    pub fn sample(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let m = t.iter().map(|&x| f(x)).collect();
        Self::new(t, m)
    }

    /// Like [`sample`](Self::sample) with exact first and second derivatives.
    pub fn sample_with_derivatives(
        a: f64,
        b: f64,
        n: usize,
        f: impl Fn(f64) -> [f64; 3],
    ) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let vals: Vec<[f64; 3]> = t.iter().map(|&x| f(x)).collect();
        let mut out = Self::new(t, vals.iter().map(|v| v[0]).collect())?;
        let d1: Vec<f64> = vals.iter().map(|v| v[1]).collect();
        let d2: Vec<f64> = vals.iter().map(|v| v[2]).collect();
        if d1.iter().chain(&d2).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite derivative".into()));
        }
        out.exact = Some((d1, d2));
        Ok(out)
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn spacing(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn has_exact_derivatives(&self) -> bool {
        self.exact.is_some()
    }

    /// Relative tolerance for derivative comparisons: `1e-12` for exact
    /// derivatives, `10h²` for centered differences.
    pub fn derivative_tolerance(&self) -> f64 {
        if self.exact.is_some() {
            ANALYTIC_TOL
        } else {
            10.0 * self.spacing().powi(2)
        }
    }

    /// Indices at which derivatives are available.
    fn derivative_range(&self) -> std::ops::Range<usize> {
        if self.exact.is_some() {
            0..self.t.len()
        } else {
            1..self.t.len() - 1
        }
    }

    /// `(M′, M″)` at sample `i`.
    fn derivatives(&self, i: usize) -> (f64, f64) {
        match &self.exact {
            Some((d1, d2)) => (d1[i], d2[i]),
            None => {
                let h = self.spacing();
                let (a, b, c) = (self.m[i - 1], self.m[i], self.m[i + 1]);
                ((c - a) / (2.0 * h), (c - 2.0 * b + a) / (h * h))
            }
        }
    }
}

/// Explosion lemma on a finite window.
///
/// `Holds` when the hypothesis holds and `M` is non-increasing;
/// `Inconclusive` when some `M′(T₀) > 0` but the window ends before the
/// forced blow-up time; `Fails` when the trajectory stays finite past it or
/// violates monotonicity without a positive derivative.
pub fn lemma_explosion_check(traj: &OdeTrajectory, delta: f64) -> Result<EstimateVerdict> {
    const NAME: &str = "lemma_explosion";
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if traj.m.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidArgument(
            "trajectory must be nonnegative".into(),
        ));
    }
    let tol = traj.derivative_tolerance();
    let scale = traj.m.iter().fold(0.0f64, |a, &m| a.max(m.abs()));
    let value_tol = VALUE_TOL * scale.max(f64::MIN_POSITIVE);

    // Hypothesis, normalised by M² so that fast decay cannot underflow.
    let mut worst = f64::INFINITY;
    for i in traj.derivative_range() {
        let m = traj.m[i];
        let (d1, d2) = traj.derivatives(i);
        let slack = if m > 0.0 {
            let lhs = (d1 / m).powi(2);
            let rhs = delta * d2 / m;
            let s = rhs - lhs;
            if s < -tol * lhs.abs().max(rhs.abs()) {
                let v = EstimateVerdict::new(
                    NAME,
                    Status::HypothesisNotSatisfied,
                    s,
                    format!("(M′)² > δMM″ at t = {}", traj.t[i]),
                );
                return Ok(v.with("delta", delta));
            }
            s
        } else {
            // At a zero of M the hypothesis forces M′ = 0.
            if d1.abs() > tol * scale.max(f64::MIN_POSITIVE) {
                let v = EstimateVerdict::new(
                    NAME,
                    Status::HypothesisNotSatisfied,
                    -d1.abs(),
                    format!("M = 0 but M′ ≠ 0 at t = {}", traj.t[i]),
                );
                return Ok(v.with("delta", delta));
            }
            0.0
        };
        worst = worst.min(slack);
    }

    // A strictly positive derivative forces blow-up before t_blow.
    let t_end = *traj.t.last().expect("nonempty");
    let mut t_blow = f64::INFINITY;
    let mut max_d1 = f64::NEG_INFINITY;
    // Derivative noise: the relative tolerance over the window length plus
    // difference roundoff.
    let span = t_end - traj.t[0];
    let d1_tol = tol * scale / span + 4.0 * f64::EPSILON * scale / traj.spacing();
    for i in traj.derivative_range() {
        let (d1, _) = traj.derivatives(i);
        max_d1 = max_d1.max(d1);
        let m = traj.m[i];
        if d1 > d1_tol && m > 0.0 {
            t_blow = t_blow.min(traj.t[i] + delta / (1.0 - delta) * m / d1);
        }
    }
    let base = |v: EstimateVerdict| {
        v.with("delta", delta)
            .with("hypothesis_slack", worst)
            .with("max_derivative", max_d1)
    };
    if t_blow.is_finite() {
        let v = if t_end >= t_blow {
            EstimateVerdict::new(
                NAME,
                Status::Fails,
                t_blow - t_end,
                format!(
                    "M′ > 0 forces blow-up by t = {t_blow:.6e}, but M stays finite to {t_end:.6e}"
                ),
            )
        } else {
            EstimateVerdict::new(
                NAME,
                Status::Inconclusive,
                t_blow - t_end,
                format!("M′ > 0; forced blow-up time {t_blow:.6e} lies beyond the window end {t_end:.6e}"),
            )
        };
        return Ok(base(v.with("t_blow", t_blow)));
    }
    let m0 = traj.m[0];
    let excess = traj
        .m
        .iter()
        .map(|&m| m - m0)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = value_tol - excess;
    let status = if margin >= 0.0 {
        Status::Holds
    } else {
        Status::Fails
    };
    Ok(base(EstimateVerdict::new(
        NAME,
        status,
        margin,
        format!("non-increasing; max M(t) − M(T) = {excess:.3e}"),
    )))
}

/// Exponential lemma on a finite window.
///
/// `DivergingBranch` when the trajectory exceeds `2·max(|M₀(0)|, 1)` and is
/// increasing at the end; `Holds` when `M₀(t) ≤ M₀(0)e^{−√C t}`; otherwise
/// the proof's lower bound from the first `m′ > 0` is checked and the result
/// is `Inconclusive` (the bound holds) or `Fails` (it is violated).
pub fn lemma_exponential_check(traj: &OdeTrajectory, c: f64) -> Result<EstimateVerdict> {
    const NAME: &str = "lemma_exponential";
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {c}"
        )));
    }
    let tol = traj.derivative_tolerance();
    let rc = c.sqrt();
    let scale = traj.m.iter().fold(0.0f64, |a, &m| a.max(m.abs()));
    let value_tol = |x: f64| VALUE_TOL * x.abs().max(traj.m[0].abs()).max(1e-300);

    let mut worst = f64::INFINITY;
    for i in traj.derivative_range() {
        let (_, d2) = traj.derivatives(i);
        let rhs = c * traj.m[i];
        let s = d2 - rhs;
        if s < -tol * d2.abs().max(rhs.abs()).max(f64::MIN_POSITIVE) {
            let v = EstimateVerdict::new(
                NAME,
                Status::HypothesisNotSatisfied,
                s,
                format!("M₀″ < C M₀ at t = {}", traj.t[i]),
            );
            return Ok(v.with("C", c));
        }
        worst = worst.min(s);
    }
    let base = |v: EstimateVerdict| v.with("C", c).with("hypothesis_slack", worst);

    let t0 = traj.t[0];
    let n = traj.m.len();
    let m00 = traj.m[0];
    let threshold = 2.0 * m00.abs().max(1.0);
    let increasing_at_end = traj.m[n - 1] > traj.m[n - 2];
    if traj.m.iter().any(|&m| m > threshold) && increasing_at_end {
        return Ok(base(EstimateVerdict::new(
            NAME,
            Status::DivergingBranch,
            scale - threshold,
            format!("exceeds {threshold:.3e} and is increasing at the window end"),
        )));
    }

    let excess = traj
        .t
        .iter()
        .zip(&traj.m)
        .map(|(&t, &m)| {
            let bound = m00 * (-rc * (t - t0)).exp();
            m - bound - value_tol(bound)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if excess <= 0.0 {
        return Ok(base(EstimateVerdict::new(
            NAME,
            Status::Holds,
            -excess,
            format!("M₀(t) ≤ M₀(0)e^{{−√C t}} with √C = {rc:.6e}"),
        )));
    }

    // m′ = (M₀′ + √C M₀)e^{√C t}; its first positive point gives
    // M₀(t₁) ≥ m(t₀)e^{−√C t₁} + m′(t₀)/(2√C)(e^{√C(t₁−2t₀)} − e^{−√C t₁}).
    let start = traj.derivative_range().find(|&i| {
        let (d1, _) = traj.derivatives(i);
        d1 + rc * traj.m[i] > tol * (d1.abs() + rc * traj.m[i].abs()).max(f64::MIN_POSITIVE)
    });
    let Some(i0) = start else {
        return Ok(base(EstimateVerdict::new(
            NAME,
            Status::Fails,
            -excess,
            "bound violated although m′ ≤ 0 everywhere".into(),
        )));
    };
    let (d1, _) = traj.derivatives(i0);
    let s0 = traj.t[i0] - t0;
    let m_at = traj.m[i0] * (rc * s0).exp();
    let mp_at = (d1 + rc * traj.m[i0]) * (rc * s0).exp();
    let worst_lower = traj
        .t
        .iter()
        .zip(&traj.m)
        .skip(i0)
        .map(|(&t, &m)| {
            let s1 = t - t0;
            let lower = m_at * (-rc * s1).exp()
                + mp_at / (2.0 * rc) * ((rc * (s1 - 2.0 * s0)).exp() - (-rc * s1).exp());
            m - lower + value_tol(lower)
        })
        .fold(f64::INFINITY, f64::min);
    let status = if worst_lower >= 0.0 {
        Status::Inconclusive
    } else {
        Status::Fails
    };
    Ok(base(EstimateVerdict::new(
        NAME,
        status,
        worst_lower,
        format!(
            "m′ > 0 from t = {:.6e}; proof lower bound slack {worst_lower:.3e}",
            traj.t[i0]
        ),
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(a: f64, b: f64, n: usize, f: impl Fn(f64) -> [f64; 3]) -> OdeTrajectory {
        OdeTrajectory::sample_with_derivatives(a, b, n, f).unwrap()
    }

    #[test]
    fn explosion_examples() {
        let constant = exact(0.0, 5.0, 100, |_| [2.0, 0.0, 0.0]);
        assert_eq!(
            lemma_explosion_check(&constant, 0.5).unwrap().status,
            Status::Holds
        );

        for q in [0.5, 1.0, 3.0] {
            let d = q / (q + 1.0);
            let traj = exact(0.0, 10.0, 1000, |t| {
                let b = 1.0 + t;
                [
                    b.powf(-q),
                    -q * b.powf(-q - 1.0),
                    q * (q + 1.0) * b.powf(-q - 2.0),
                ]
            });
            assert_eq!(
                lemma_explosion_check(&traj, d).unwrap().status,
                Status::Holds
            );
        }

        let e = exact(0.0, 3.0, 300, |t| [t.exp(); 3]);
        for d in [0.1, 0.5, 0.999] {
            assert_eq!(
                lemma_explosion_check(&e, d).unwrap().status,
                Status::HypothesisNotSatisfied
            );
        }

        let q = 1000.0;
        let steep = exact(0.0, 0.5, 500, |t| {
            let b = 1.0 + t;
            [
                b.powf(-q),
                -q * b.powf(-q - 1.0),
                q * (q + 1.0) * b.powf(-q - 2.0),
            ]
        });
        assert_eq!(
            lemma_explosion_check(&steep, 0.999).unwrap().status,
            Status::HypothesisNotSatisfied
        );
    }

    #[test]
    fn explosion_finite_time_branch() {
        // (T* − t)^{−r} satisfies the hypothesis with δ = r/(r+1), and its
        // forced blow-up time from t = 0 is exactly T*.
        let (ts, r) = (2.0, 1.5);
        let f = |t: f64| {
            let b = ts - t;
            [
                b.powf(-r),
                r * b.powf(-r - 1.0),
                r * (r + 1.0) * b.powf(-r - 2.0),
            ]
        };
        let traj = exact(0.0, 1.8, 900, f);
        let v = lemma_explosion_check(&traj, r / (r + 1.0)).unwrap();
        assert_eq!(v.status, Status::Inconclusive);
        assert!((v.constant("t_blow").unwrap() - ts).abs() < 1e-9);
        // An increasing trajectory can never outlive its forced explosion,
        // so a linear ramp must violate the hypothesis.
        let ramp = exact(0.0, 10.0, 100, |t| [1.0 + t, 1.0, 0.0]);
        assert_eq!(
            lemma_explosion_check(&ramp, 0.9).unwrap().status,
            Status::HypothesisNotSatisfied
        );
    }

    #[test]
    fn explosion_with_finite_differences() {
        let traj = OdeTrajectory::sample(0.0, 5.0, 2000, |t| (1.0 + t).powi(-2)).unwrap();
        assert!(!traj.has_exact_derivatives());
        let v = lemma_explosion_check(&traj, 2.0 / 3.0 + 1e-3).unwrap();
        assert_eq!(v.status, Status::Holds);
        assert!(lemma_explosion_check(&traj, 1.0).is_err());
        let neg = OdeTrajectory::sample(0.0, 1.0, 10, |t| t - 0.5).unwrap();
        assert!(lemma_explosion_check(&neg, 0.5).is_err());
    }

    #[test]
    fn exponential_examples() {
        let c = 2.0f64;
        let r = c.sqrt();
        let decay = exact(0.0, 5.0, 500, |t| {
            let e = (-r * t).exp();
            [e, -r * e, c * e]
        });
        assert_eq!(
            lemma_exponential_check(&decay, c).unwrap().status,
            Status::Holds
        );

        let cosh = exact(0.0, 5.0, 500, |t| {
            [(r * t).cosh(), r * (r * t).sinh(), c * (r * t).cosh()]
        });
        assert_eq!(
            lemma_exponential_check(&cosh, c).unwrap().status,
            Status::DivergingBranch
        );

        let mixed = exact(0.0, 5.0, 500, |t| {
            let (a, b) = ((r * t).exp(), (-r * t).exp());
            [2.0 * a - b, r * (2.0 * a + b), c * (2.0 * a - b)]
        });
        assert_eq!(
            lemma_exponential_check(&mixed, c).unwrap().status,
            Status::DivergingBranch
        );

        let slow = exact(0.0, 5.0, 500, |t| {
            let e = (-0.5 * t).exp();
            [e, -0.5 * e, 0.25 * e]
        });
        assert_eq!(
            lemma_exponential_check(&slow, c).unwrap().status,
            Status::HypothesisNotSatisfied
        );
    }

    #[test]
    fn exponential_short_window_is_inconclusive() {
        // cosh on a window too short to reach the divergence threshold.
        let c = 1.0;
        let cosh = exact(0.0, 0.5, 100, |t| [t.cosh(), t.sinh(), t.cosh()]);
        assert_eq!(
            lemma_exponential_check(&cosh, c).unwrap().status,
            Status::Inconclusive
        );
    }

    #[test]
    fn trajectory_validation() {
        assert!(OdeTrajectory::new(vec![0.0, 1.0, 3.0], vec![1.0; 3]).is_err());
        assert!(OdeTrajectory::new(vec![0.0, 1.0], vec![1.0; 2]).is_err());
        assert!(OdeTrajectory::new(vec![0.0, 1.0, 2.0], vec![1.0, f64::NAN, 1.0]).is_err());
    }
}
