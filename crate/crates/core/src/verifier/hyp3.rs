//! Empirical constant of `‖u‖_{L²}^{p₀+1} ≤ C₀ ∫F(u)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{SpectralDomain, SpectralField};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Largest ratio `‖u‖^{p₀+1} / ∫F(u)` seen so far.
#[derive(Clone, Debug)]
pub struct Hyp3Estimator<'a> {
    dom: &'a SpectralDomain,
    spec: &'a NonlinearitySpec,
    best: f64,
    count: usize,
}

impl<'a> Hyp3Estimator<'a> {
    pub fn new(dom: &'a SpectralDomain, spec: &'a NonlinearitySpec) -> Result<Self> {
        if spec.is_zero() {
            return Err(Error::Inapplicable(
                "the zero map has no hypothesis constant".into(),
            ));
        }
        Ok(Self {
            dom,
            spec,
            best: 0.0,
            count: 0,
        })
    }

    /// Adds one field; zero fields are skipped.
    pub fn add(&mut self, u: &SpectralField) -> Result<()> {
        let l2 = self.dom.spectral_l2_sq(u);
        if l2 == 0.0 {
            return Ok(());
        }
        let int_f = self
            .dom
            .integrate_pointwise(u, |s| self.spec.antiderivative(s))?;
        if !(int_f > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "∫F(u) = {int_f} for a field with ‖u‖² = {l2}"
            )));
        }
        let p0 = self.spec.p0().expect("nonzero spec");
        self.best = self.best.max(l2.powf(0.5 * (p0 + 1.0)) / int_f);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        Ok(self.best)
    }
}

/// `max_u ‖u‖^{p₀+1}/∫F(u)` over a nonempty family.
pub fn estimate_hyp3_constant<'f>(
    dom: &SpectralDomain,
    spec: &NonlinearitySpec,
    fields: impl IntoIterator<Item = &'f SpectralField>,
) -> Result<f64> {
    let mut est = Hyp3Estimator::new(dom, spec)?;
    for f in fields {
        est.add(f)?;
    }
    est.value()
}

/// Every unit basis mode with `|k|∞ ≤ 4`.
pub fn hyp3_basis_family(dom: &SpectralDomain) -> Vec<SpectralField> {
    let d = dom.d();
    let mut out = Vec::new();
    let mut k = vec![-4i64; d];
    loop {
        if let Ok(f) = dom.mode_field(&k, 1.0) {
            out.push(f);
        }
        let mut axis = 0;
        loop {
            if axis == d {
                return out;
            }
            k[axis] += 1;
            if k[axis] <= 4 {
                break;
            }
            k[axis] = -4;
            axis += 1;
        }
    }
}

/// `count` seeded random fields with spectral decay 2.
pub fn hyp3_random_family(dom: &SpectralDomain, seed: u64, count: usize) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| dom.random_field(&mut rng, 1.0, 2.0))
        .collect()
}
