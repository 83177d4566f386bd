//! Manufactured trajectory catalog for the ODE lemma checkers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::lemmas::{lemma_explosion_check, lemma_exponential_check, OdeTrajectory};
use super::Status;
use crate::error::Result;

const POINTS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum LemmaKind {
    Explosion { delta: f64 },
    Exponential { c: f64 },
}

#[derive(Clone, Debug)]
pub struct CatalogCase {
    pub id: String,
    pub family: &'static str,
    pub lemma: LemmaKind,
    /// Classification required of boundary cases.
    pub expected: Option<Status>,
    pub trajectory: OdeTrajectory,
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: String,
    pub family: &'static str,
    #[serde(flatten)]
    pub lemma: LemmaKind,
    pub status: Status,
    pub expected: Option<Status>,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub total: usize,
    pub hypothesis_satisfied: usize,
    pub conclusion_failures: usize,
    pub expectation_mismatches: usize,
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub entries: Vec<CatalogEntry>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.conclusion_failures == 0 && self.expectation_mismatches == 0
    }
}

fn case(
    out: &mut Vec<CatalogCase>,
    family: &'static str,
    lemma: LemmaKind,
    expected: Option<Status>,
    trajectory: Result<OdeTrajectory>,
) -> Result<()> {
    let id = format!("{:04}-{family}", out.len());
    out.push(CatalogCase {
        id,
        family,
        lemma,
        expected,
        trajectory: trajectory?,
    });
    Ok(())
}

fn power_decay(q: f64) -> impl Fn(f64) -> [f64; 3] {
    move |t| {
        let b = 1.0 + t;
        [
            b.powf(-q),
            -q * b.powf(-q - 1.0),
            q * (q + 1.0) * b.powf(-q - 2.0),
        ]
    }
}

fn traj(a: f64, b: f64, n: usize, f: impl Fn(f64) -> [f64; 3]) -> Result<OdeTrajectory> {
    OdeTrajectory::sample_with_derivatives(a, b, n, f)
}

fn fixed_cases(out: &mut Vec<CatalogCase>) -> Result<()> {
    use Status::*;
    for m in [0.0, 1.0, 3.5] {
        for delta in [0.1, 0.5, 0.9] {
            case(
                out,
                "constant",
                LemmaKind::Explosion { delta },
                Some(Holds),
                traj(0.0, 10.0, POINTS, move |_| [m, 0.0, 0.0]),
            )?;
        }
    }
    for delta in [0.1, 0.5, 0.9, 0.999] {
        case(
            out,
            "exp_growth",
            LemmaKind::Explosion { delta },
            Some(HypothesisNotSatisfied),
            traj(0.0, 3.0, POINTS, |t: f64| [t.exp(); 3]),
        )?;
    }
    for q in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let delta = q / (q + 1.0);
        case(
            out,
            "power_decay",
            LemmaKind::Explosion { delta },
            Some(Holds),
            traj(0.0, 10.0, POINTS, power_decay(q)),
        )?;
        let delta = 0.9 * delta;
        case(
            out,
            "power_decay",
            LemmaKind::Explosion { delta },
            Some(HypothesisNotSatisfied),
            traj(0.0, 10.0, POINTS, power_decay(q)),
        )?;
    }
    case(
        out,
        "steep_power_decay",
        LemmaKind::Explosion { delta: 0.999 },
        Some(HypothesisNotSatisfied),
        traj(0.0, 0.5, POINTS, power_decay(1000.0)),
    )?;
    for (ts, r) in [(2.0, 1.5), (1.0, 0.5)] {
        let f = move |t: f64| {
            let b: f64 = ts - t;
            [
                b.powf(-r),
                r * b.powf(-r - 1.0),
                r * (r + 1.0) * b.powf(-r - 2.0),
            ]
        };
        let delta = r / (r + 1.0);
        case(
            out,
            "finite_time_power",
            LemmaKind::Explosion { delta },
            Some(Inconclusive),
            traj(0.0, 0.9 * ts, POINTS, f),
        )?;
    }

    for c in [0.5f64, 1.0, 2.0, 4.0] {
        let r = c.sqrt();
        let end = 4.0 / r;
        let lemma = LemmaKind::Exponential { c };
        case(
            out,
            "exp_decay_boundary",
            lemma,
            Some(Holds),
            traj(0.0, end, POINTS, move |t| {
                let e = (-r * t).exp();
                [e, -r * e, c * e]
            }),
        )?;
        case(
            out,
            "cosh",
            lemma,
            Some(DivergingBranch),
            traj(0.0, end, POINTS, move |t| {
                [(r * t).cosh(), r * (r * t).sinh(), c * (r * t).cosh()]
            }),
        )?;
        case(
            out,
            "two_exponentials",
            lemma,
            Some(DivergingBranch),
            traj(0.0, end, POINTS, move |t| {
                let (a, b) = ((r * t).exp(), (-r * t).exp());
                [2.0 * a - b, r * (2.0 * a + b), c * (2.0 * a - b)]
            }),
        )?;
        case(
            out,
            "slow_decay",
            lemma,
            Some(HypothesisNotSatisfied),
            traj(0.0, end, POINTS, move |t| {
                let e = (-0.5 * r * t).exp();
                [e, -0.5 * r * e, 0.25 * c * e]
            }),
        )?;
        case(
            out,
            "negative_constant",
            lemma,
            Some(Holds),
            traj(0.0, end, POINTS, |_| [-1.0, 0.0, 0.0]),
        )?;
    }
    Ok(())
}

fn random_explosion(rng: &mut ChaCha8Rng, out: &mut Vec<CatalogCase>) -> Result<()> {
    let delta = rng.random_range(0.05..0.99);
    let lemma = LemmaKind::Explosion { delta };
    let end = rng.random_range(1.0..10.0);
    match rng.random_range(0..3) {
        0 => {
            let c0: f64 = rng.random_range(0.0..1.0);
            let terms: Vec<(f64, f64)> = (0..3)
                .map(|_| (rng.random_range(0.0..2.0), rng.random_range(0.2..5.0)))
                .collect();
            let f = move |t: f64| {
                let b = 1.0 + t;
                terms.iter().fold([c0, 0.0, 0.0], |acc, &(a, q)| {
                    [
                        acc[0] + a * b.powf(-q),
                        acc[1] - a * q * b.powf(-q - 1.0),
                        acc[2] + a * q * (q + 1.0) * b.powf(-q - 2.0),
                    ]
                })
            };
            case(
                out,
                "power_mixture",
                lemma,
                None,
                OdeTrajectory::sample_with_derivatives(0.0, end, POINTS, f),
            )
        }
        1 => {
            let c0: f64 = rng.random_range(0.0..1.0);
            let mut terms: Vec<(f64, f64)> = (0..3)
                .map(|_| (rng.random_range(0.0..2.0), -rng.random_range(0.1..4.0)))
                .collect();
            if rng.random_bool(0.3) {
                terms.push((rng.random_range(0.0..0.5), rng.random_range(0.1..2.0)));
            }
            let f = move |t: f64| {
                terms.iter().fold([c0, 0.0, 0.0], |acc, &(a, k)| {
                    let e = a * (k * t).exp();
                    [acc[0] + e, acc[1] + k * e, acc[2] + k * k * e]
                })
            };
            case(
                out,
                "exp_mixture",
                lemma,
                None,
                OdeTrajectory::sample_with_derivatives(0.0, end, POINTS, f),
            )
        }
        _ => {
            let r = rng.random_range(0.2..4.0);
            let ts = rng.random_range(0.5..5.0);
            let frac = rng.random_range(0.1..0.95);
            let delta = rng.random_range(r / (r + 1.0)..1.0f64).min(1.0 - 1e-9);
            let f = move |t: f64| {
                let b: f64 = ts - t;
                [
                    b.powf(-r),
                    r * b.powf(-r - 1.0),
                    r * (r + 1.0) * b.powf(-r - 2.0),
                ]
            };
            case(
                out,
                "finite_time_power",
                LemmaKind::Explosion { delta },
                None,
                OdeTrajectory::sample_with_derivatives(0.0, frac * ts, POINTS, f),
            )
        }
    }
}

fn random_exponential(rng: &mut ChaCha8Rng, out: &mut Vec<CatalogCase>) -> Result<()> {
    let c: f64 = rng.random_range(0.1..4.0);
    let r = c.sqrt();
    let lemma = LemmaKind::Exponential { c };
    let end = rng.random_range(1.0..6.0) / r;
    if rng.random_bool(0.5) {
        let mut terms: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.random_range(-1.0..2.0), -r * rng.random_range(0.8..3.0)))
            .collect();
        if rng.random_bool(0.5) {
            terms.push((rng.random_range(-0.5..1.0), r * rng.random_range(0.8..2.0)));
        }
        let f = move |t: f64| {
            terms.iter().fold([0.0; 3], |acc, &(a, k)| {
                let e = a * (k * t).exp();
                [acc[0] + e, acc[1] + k * e, acc[2] + k * k * e]
            })
        };
        case(
            out,
            "exp_sum",
            lemma,
            None,
            OdeTrajectory::sample_with_derivatives(0.0, end, POINTS, f),
        )
    } else {
        let kappa = r * rng.random_range(0.9..2.0);
        let (a, b) = (rng.random_range(-1.0..2.0), rng.random_range(-2.0..2.0));
        let d: f64 = -rng.random_range(0.0..1.0);
        let f = move |t: f64| {
            let (ch, sh) = ((kappa * t).cosh(), (kappa * t).sinh());
            [
                a * ch + b * sh + d,
                kappa * (a * sh + b * ch),
                kappa * kappa * (a * ch + b * sh),
            ]
        };
        case(
            out,
            "hyperbolic",
            lemma,
            None,
            OdeTrajectory::sample_with_derivatives(0.0, end, POINTS, f),
        )
    }
}

/// Boundary cases followed by `random` seeded mixtures.
pub fn lemma_catalog(random: usize, seed: u64) -> Result<Vec<CatalogCase>> {
    let mut out = Vec::new();
    fixed_cases(&mut out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random {
        if i % 2 == 0 {
            random_explosion(&mut rng, &mut out)?;
        } else {
            random_exponential(&mut rng, &mut out)?;
        }
    }
    Ok(out)
}

pub fn run_lemma_catalog(random: usize, seed: u64) -> Result<LemmaReport> {
    let cases = lemma_catalog(random, seed)?;
    let mut entries = Vec::with_capacity(cases.len());
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let (mut satisfied, mut failures, mut mismatches) = (0, 0, 0);
    for c in cases {
        let (name, verdict) = match c.lemma {
            LemmaKind::Explosion { delta } => {
                ("explosion", lemma_explosion_check(&c.trajectory, delta)?)
            }
            LemmaKind::Exponential { c: k } => {
                ("exponential", lemma_exponential_check(&c.trajectory, k)?)
            }
        };
        let status = verdict.status;
        if status != Status::HypothesisNotSatisfied {
            satisfied += 1;
        }
        if status.is_failure() {
            failures += 1;
        }
        if c.expected.is_some_and(|e| e != status) {
            mismatches += 1;
        }
        let key = serde_json::to_value(status)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        *counts
            .entry(name.into())
            .or_default()
            .entry(key)
            .or_default() += 1;
        entries.push(CatalogEntry {
            id: c.id,
            family: c.family,
            lemma: c.lemma,
            status,
            expected: c.expected,
            margin: verdict.margin,
        });
    }
    Ok(LemmaReport {
        seed,
        total: entries.len(),
        hypothesis_satisfied: satisfied,
        conclusion_failures: failures,
        expectation_mismatches: mismatches,
        counts,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_has_no_failures() {
        let report = run_lemma_catalog(240, 1).unwrap();
        assert!(report.total >= 200);
        let bad: Vec<_> = report
            .entries
            .iter()
            .filter(|e| e.status.is_failure() || e.expected.is_some_and(|x| x != e.status))
            .collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(report.hypothesis_satisfied > 100);
    }

    #[test]
    fn report_is_deterministic() {
        let a = serde_json::to_string(&run_lemma_catalog(50, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&run_lemma_catalog(50, 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
