//! Spectral discretization of boxes `[0, L₁]×…×[0, L_d]`.
//!
//! Two bases are supported: homogeneous Dirichlet conditions through the sine
//! eigenbasis, and flat tori through a real Fourier basis. Both diagonalize the
//! Laplacian, so the linear part of the flow is exact mode by mode.
//!
//! Fields are stored as `Array3<f64>` for every dimension; axes beyond `d`
//! have length one and are skipped by the transforms.
//!
//! Bilinear quantities (L², H¹, inner products) are computed from spectral
//! coefficients with the discrete norms `w_k` of the native collocation grid,
//! which makes Parseval exact. Nonlinear integrands are evaluated on a
//! quadrature grid: the 3/2-padded grid by default, or the native grid when
//! dealiasing is off. The same quadrature is used to project `f(u)` back onto
//! the modes, so the discrete energy identities hold exactly in space.

use std::f64::consts::PI;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array3, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    #[serde(alias = "dirichlet")]
    DirichletSine,
    #[serde(alias = "periodic")]
    PeriodicFourier,
}

impl BoundaryCondition {
    pub fn code(self) -> u8 {
        match self {
            BoundaryCondition::DirichletSine => 0,
            BoundaryCondition::PeriodicFourier => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BoundaryCondition::DirichletSine),
            1 => Some(BoundaryCondition::PeriodicFourier),
            _ => None,
        }
    }
}

/// Values of a field on the native collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField(Array3<f64>);

/// Coefficients of a field in the domain's eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField(Array3<f64>);

macro_rules! field_newtype {
    ($name:ident) => {
        impl $name {
            pub fn new(values: Array3<f64>) -> Self {
                Self(values)
            }

            pub fn values(&self) -> &Array3<f64> {
                &self.0
            }

            pub fn values_mut(&mut self) -> &mut Array3<f64> {
                &mut self.0
            }

            pub fn into_inner(self) -> Array3<f64> {
                self.0
            }

            pub fn shape(&self) -> [usize; 3] {
                let s = self.0.shape();
                [s[0], s[1], s[2]]
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            /// `a·self + b·other`, elementwise.
            pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
                let mut out = self.0.clone();
                Zip::from(&mut out)
                    .and(&other.0)
                    .for_each(|x, &y| *x = a * *x + b * y);
                Self(out)
            }
        }
    };
}

field_newtype!(GridField);
field_newtype!(SpectralField);

/// One axis of the tensor basis.
#[derive(Clone, Debug)]
struct AxisBasis {
    active: bool,
    modes: usize,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    grid: Vec<f64>,
    grid_weight: f64,
    /// grid × modes
    synth: Array2<f64>,
    /// modes × grid
    analysis: Array2<f64>,
    padded_points: usize,
    padded_weight: f64,
    /// padded grid × modes
    padded_synth: Array2<f64>,
    /// modes × padded grid
    padded_project: Array2<f64>,
}

impl AxisBasis {
    fn inactive() -> Self {
        let one = Array2::from_elem((1, 1), 1.0);
        Self {
            active: false,
            modes: 1,
            eigenvalues: vec![0.0],
            weights: vec![1.0],
            grid: vec![0.0],
            grid_weight: 1.0,
            synth: one.clone(),
            analysis: one.clone(),
            padded_points: 1,
            padded_weight: 1.0,
            padded_synth: one.clone(),
            padded_project: one,
        }
    }

    fn dirichlet(length: f64, n: usize) -> Self {
        let intervals = n + 1;
        let padded_intervals = (3 * intervals).div_ceil(2);
        let m = padded_intervals - 1;
        let sine = |k: usize, j: usize, intervals: usize| {
            (PI * (k as f64) * (j as f64) / intervals as f64).sin()
        };
        let synth = Array2::from_shape_fn((n, n), |(j, k)| sine(k + 1, j + 1, intervals));
        let analysis = synth.t().mapv(|x| 2.0 * x / intervals as f64);
        let padded_synth =
            Array2::from_shape_fn((m, n), |(i, k)| sine(k + 1, i + 1, padded_intervals));
        let padded_project = padded_synth.t().mapv(|x| 2.0 * x / padded_intervals as f64);
        Self {
            active: true,
            modes: n,
            eigenvalues: (1..=n).map(|k| (PI * k as f64 / length).powi(2)).collect(),
            weights: vec![length / 2.0; n],
            grid: (1..=n)
                .map(|j| j as f64 * length / intervals as f64)
                .collect(),
            grid_weight: length / intervals as f64,
            synth,
            analysis,
            padded_points: m,
            padded_weight: length / padded_intervals as f64,
            padded_synth,
            padded_project,
        }
    }

    /// Real Fourier basis: index 0 is the constant, `2k−1`/`2k` are
    /// `cos`/`sin` of wavenumber `k`, and index `n−1` is the Nyquist cosine.
    fn periodic(length: f64, n: usize) -> Self {
        let half = n / 2;
        let wavenumber = |idx: usize| -> usize {
            if idx == 0 {
                0
            } else if idx == n - 1 {
                half
            } else {
                idx.div_ceil(2)
            }
        };
        let basis = move |idx: usize, x: f64| -> f64 {
            let k = wavenumber(idx) as f64;
            let arg = 2.0 * PI * k * x / length;
            if idx == 0 {
                1.0
            } else if idx == n - 1 || idx % 2 == 1 {
                arg.cos()
            } else {
                arg.sin()
            }
        };
        let h = length / n as f64;
        let grid: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
        // Discrete norms on the native grid; the Nyquist mode weighs L there.
        let weights: Vec<f64> = (0..n)
            .map(|idx| {
                if idx == 0 || idx == n - 1 {
                    length
                } else {
                    length / 2.0
                }
            })
            .collect();
        let synth = Array2::from_shape_fn((n, n), |(j, idx)| basis(idx, grid[j]));
        let analysis = Array2::from_shape_fn((n, n), |(idx, j)| h * synth[[j, idx]] / weights[idx]);
        let m = (3 * n).div_ceil(2);
        let hp = length / m as f64;
        let padded_synth = Array2::from_shape_fn((m, n), |(i, idx)| basis(idx, i as f64 * hp));
        let padded_project = Array2::from_shape_fn((n, m), |(idx, i)| {
            hp * padded_synth[[i, idx]] / weights[idx]
        });
        Self {
            active: true,
            modes: n,
            eigenvalues: (0..n)
                .map(|idx| (2.0 * PI * wavenumber(idx) as f64 / length).powi(2))
                .collect(),
            weights,
            grid,
            grid_weight: h,
            synth,
            analysis,
            padded_points: m,
            padded_weight: hp,
            padded_synth,
            padded_project,
        }
    }
}

/// Result of the discrete Poincaré admissibility test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub lambda1_plus_beta: f64,
    pub ok: bool,
}

/// Box or torus geometry with its spectral basis and quadrature plans.
#[derive(Clone, Debug)]
pub struct SpectralDomain {
    d: usize,
    lengths: Vec<f64>,
    n: Vec<usize>,
    bc: BoundaryCondition,
    beta: f64,
    lambda1: f64,
    dealias: bool,
    axes: [AxisBasis; 3],
    eigenvalues: Array3<f64>,
    weights: Array3<f64>,
}

impl SpectralDomain {
    pub fn new(
        d: usize,
        lengths: &[f64],
        n: &[usize],
        bc: BoundaryCondition,
        beta: f64,
    ) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Domain(format!(
                "dimension must be 1, 2 or 3, got {d}"
            )));
        }
        if lengths.len() != d || n.len() != d {
            return Err(Error::Domain(format!(
                "expected {d} lengths and {d} mode counts, got {} and {}",
                lengths.len(),
                n.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Domain(format!(
                "axis lengths must be positive, got {l}"
            )));
        }
        if !beta.is_finite() {
            return Err(Error::Domain("beta must be finite".into()));
        }
        for &m in n {
            match bc {
                BoundaryCondition::DirichletSine if m == 0 => {
                    return Err(Error::Domain("mode count must be at least 1".into()))
                }
                BoundaryCondition::PeriodicFourier if m < 2 || m % 2 != 0 => {
                    return Err(Error::Domain(format!(
                        "periodic mode count must be even and at least 2, got {m}"
                    )))
                }
                _ => {}
            }
            if m > 1024 {
                return Err(Error::Domain(format!("mode count {m} exceeds 1024")));
            }
        }
        let mut axes = [
            AxisBasis::inactive(),
            AxisBasis::inactive(),
            AxisBasis::inactive(),
        ];
        for a in 0..d {
            axes[a] = match bc {
                BoundaryCondition::DirichletSine => AxisBasis::dirichlet(lengths[a], n[a]),
                BoundaryCondition::PeriodicFourier => AxisBasis::periodic(lengths[a], n[a]),
            };
        }
        let shape = [axes[0].modes, axes[1].modes, axes[2].modes];
        let eigenvalues = Array3::from_shape_fn(shape, |(i, j, k)| {
            axes[0].eigenvalues[i] + axes[1].eigenvalues[j] + axes[2].eigenvalues[k]
        });
        let weights = Array3::from_shape_fn(shape, |(i, j, k)| {
            axes[0].weights[i] * axes[1].weights[j] * axes[2].weights[k]
        });
        let lambda1 = match bc {
            BoundaryCondition::DirichletSine => {
                lengths.iter().map(|l| (PI / l).powi(2)).sum::<f64>()
            }
            BoundaryCondition::PeriodicFourier => 0.0,
        };
        Ok(Self {
            d,
            lengths: lengths.to_vec(),
            n: n.to_vec(),
            bc,
            beta,
            lambda1,
            dealias: true,
            axes,
            eigenvalues,
            weights,
        })
    }

    /// `[0, π]^d` with `n` modes per axis.
    pub fn cube(d: usize, n: usize, bc: BoundaryCondition, beta: f64) -> Result<Self> {
        Self::new(d, &vec![PI; d], &vec![n; d], bc, beta)
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Smallest Laplacian eigenvalue of the basis.
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Array shape of grid and spectral fields (unused axes have length one).
    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].modes, self.axes[1].modes, self.axes[2].modes]
    }

    /// Shape of the grid used for nonlinear integrands.
    pub fn quadrature_shape(&self) -> [usize; 3] {
        let pts = |a: &AxisBasis| {
            if self.dealias {
                a.padded_points
            } else {
                a.modes
            }
        };
        [pts(&self.axes[0]), pts(&self.axes[1]), pts(&self.axes[2])]
    }

    /// Measure `|Ω|` of the box.
    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Collocation coordinates along `axis`.
    pub fn grid_points(&self, axis: usize) -> &[f64] {
        &self.axes[axis].grid
    }

    /// Laplacian eigenvalue `μ_k` per mode.
    pub fn eigenvalues(&self) -> &Array3<f64> {
        &self.eigenvalues
    }

    /// Discrete norm `‖φ_k‖²` per mode.
    pub fn weights(&self) -> &Array3<f64> {
        &self.weights
    }

    /// Product of native grid spacings (trapezoid cell volume).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.grid_weight).product()
    }

    fn quadrature_cell(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| {
                if self.dealias {
                    a.padded_weight
                } else {
                    a.grid_weight
                }
            })
            .product()
    }

    pub fn poincare_check(&self) -> PoincareCheck {
        let value = self.lambda1 + self.beta;
        PoincareCheck {
            lambda1_plus_beta: value,
            ok: value > 0.0,
        }
    }

    /// Fails with [`Error::Poincare`] unless `λ₁ + β > 0`.
    pub fn require_poincare(&self) -> Result<()> {
        let check = self.poincare_check();
        if check.ok {
            Ok(())
        } else {
            Err(Error::Poincare {
                lambda1_plus_beta: check.lambda1_plus_beta,
            })
        }
    }

    pub fn zeros_grid(&self) -> GridField {
        GridField(Array3::zeros(self.shape()))
    }

    pub fn zeros_spectral(&self) -> SpectralField {
        SpectralField(Array3::zeros(self.shape()))
    }

    /// Samples `g` at the collocation points. Unused coordinates are zero.
    pub fn grid_from_fn(&self, g: impl Fn([f64; 3]) -> f64) -> GridField {
        let [a, b, c] = &self.axes;
        GridField(Array3::from_shape_fn(self.shape(), |(i, j, k)| {
            g([a.grid[i], b.grid[j], c.grid[k]])
        }))
    }

    fn check_shape(&self, actual: [usize; 3]) -> Result<()> {
        let expected = self.shape();
        if actual == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected, actual })
        }
    }

    /// Array index of a mode given by integer wavenumbers.
    ///
    /// Dirichlet modes are `1..=n`. Periodic modes use signed wavenumbers:
    /// `0` is the constant, `k > 0` is `cos(2πkx/L)` and `k < 0` is
    /// `sin(2π|k|x/L)`.
    pub fn mode_index(&self, k: &[i64]) -> Result<[usize; 3]> {
        if k.len() != self.d {
            return Err(Error::Domain(format!(
                "mode {k:?} has {} components, domain has d = {}",
                k.len(),
                self.d
            )));
        }
        let mut idx = [0usize; 3];
        for (a, &ka) in k.iter().enumerate() {
            let n = self.n[a] as i64;
            idx[a] = match self.bc {
                BoundaryCondition::DirichletSine => {
                    if !(1..=n).contains(&ka) {
                        return Err(Error::Domain(format!(
                            "Dirichlet mode component {ka} outside 1..={n}"
                        )));
                    }
                    (ka - 1) as usize
                }
                BoundaryCondition::PeriodicFourier => {
                    let half = n / 2;
                    if ka == 0 {
                        0
                    } else if ka == half {
                        (n - 1) as usize
                    } else if ka > 0 && ka < half {
                        (2 * ka - 1) as usize
                    } else if ka < 0 && -ka < half {
                        (-2 * ka) as usize
                    } else {
                        return Err(Error::Domain(format!(
                            "periodic mode component {ka} outside the resolved band"
                        )));
                    }
                }
            };
        }
        Ok(idx)
    }

    /// Random coefficients `amplitude · ξ_k · (1 + μ_k)^{−decay/2}` with
    /// independent standard normal `ξ_k`, drawn in array order.
    pub fn random_field<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        amplitude: f64,
        decay: f64,
    ) -> SpectralField {
        let mut c = Array3::zeros(self.shape());
        Zip::from(&mut c).and(&self.eigenvalues).for_each(|c, &mu| {
            let xi: f64 = rng.sample(StandardNormal);
            *c = amplitude * xi * (1.0 + mu).powf(-0.5 * decay);
        });
        SpectralField(c)
    }

    /// A field with a single mode of amplitude `amplitude`.
    pub fn mode_field(&self, k: &[i64], amplitude: f64) -> Result<SpectralField> {
        let idx = self.mode_index(k)?;
        let mut c = self.zeros_spectral();
        c.0[idx] = amplitude;
        Ok(c)
    }

    fn apply(&self, input: &Array3<f64>, mats: [&Array2<f64>; 3]) -> Array3<f64> {
        let mut cur = input.as_standard_layout().into_owned();
        for axis in [2, 1, 0] {
            if !self.axes[axis].active {
                continue;
            }
            cur = apply_axis(&cur, axis, mats[axis]);
        }
        cur
    }

    pub fn to_spectral(&self, g: &GridField) -> Result<SpectralField> {
        self.check_shape(g.shape())?;
        let [a, b, c] = &self.axes;
        Ok(SpectralField(
            self.apply(&g.0, [&a.analysis, &b.analysis, &c.analysis]),
        ))
    }

    pub fn to_grid(&self, c: &SpectralField) -> Result<GridField> {
        self.check_shape(c.shape())?;
        Ok(GridField(self.synthesize(c)))
    }

    pub(crate) fn synthesize(&self, c: &SpectralField) -> Array3<f64> {
        let [a, b, z] = &self.axes;
        self.apply(&c.0, [&a.synth, &b.synth, &z.synth])
    }

    /// Values of `c` on the quadrature grid (padded when dealiasing).
    pub fn to_quadrature(&self, c: &SpectralField) -> Result<Array3<f64>> {
        self.check_shape(c.shape())?;
        if !self.dealias {
            return Ok(self.synthesize(c));
        }
        let [a, b, z] = &self.axes;
        Ok(self.apply(&c.0, [&a.padded_synth, &b.padded_synth, &z.padded_synth]))
    }

    /// Projection of quadrature-grid values onto the modes,
    /// `ĝ_k = Q[g φ_k] / w_k`.
    pub fn project_quadrature(&self, values: &Array3<f64>) -> Result<SpectralField> {
        let s = values.shape();
        let actual = [s[0], s[1], s[2]];
        let expected = self.quadrature_shape();
        if actual != expected {
            return Err(Error::ShapeMismatch { expected, actual });
        }
        let [a, b, z] = &self.axes;
        if !self.dealias {
            return Ok(SpectralField(
                self.apply(values, [&a.analysis, &b.analysis, &z.analysis]),
            ));
        }
        Ok(SpectralField(self.apply(
            values,
            [&a.padded_project, &b.padded_project, &z.padded_project],
        )))
    }

    /// `Q[g]` for values already on the quadrature grid.
    pub fn quadrature_sum(&self, values: &Array3<f64>) -> f64 {
        self.quadrature_cell() * values.sum()
    }

    /// `Q[g(u)]` for a spectral field `u`.
    pub fn integrate_pointwise(&self, u: &SpectralField, g: impl Fn(f64) -> f64) -> Result<f64> {
        let q = self.to_quadrature(u)?;
        Ok(self.quadrature_cell() * q.iter().map(|&x| g(x)).sum::<f64>())
    }

    pub fn laplacian_apply(&self, c: &SpectralField) -> Result<SpectralField> {
        self.check_shape(c.shape())?;
        let mut out = c.0.clone();
        Zip::from(&mut out)
            .and(&self.eigenvalues)
            .for_each(|x, &mu| *x *= -mu);
        Ok(SpectralField(out))
    }

    /// `∫ a b` of two spectral fields.
    pub fn spectral_inner(&self, a: &SpectralField, b: &SpectralField) -> f64 {
        let mut acc = 0.0;
        Zip::from(&a.0)
            .and(&b.0)
            .and(&self.weights)
            .for_each(|&x, &y, &w| acc += w * x * y);
        acc
    }

    pub fn spectral_l2_sq(&self, c: &SpectralField) -> f64 {
        self.spectral_inner(c, c)
    }

    /// `∫ |∇u|² + β|u|² = Σ w_k (μ_k + β) û_k²`.
    pub fn spectral_h1_sq(&self, c: &SpectralField) -> f64 {
        let mut acc = 0.0;
        Zip::from(&c.0)
            .and(&self.weights)
            .and(&self.eigenvalues)
            .for_each(|&x, &w, &mu| acc += w * (mu + self.beta) * x * x);
        acc
    }

    /// Trapezoid rule on the native grid, exact for the discrete basis.
    pub fn inner_product(&self, a: &GridField, b: &GridField) -> Result<f64> {
        self.check_shape(a.shape())?;
        self.check_shape(b.shape())?;
        Ok(self.cell_volume()
            * ndarray::Zip::from(&a.0)
                .and(&b.0)
                .fold(0.0, |acc, &x, &y| acc + x * y))
    }

    pub fn l2_norm_sq(&self, u: &GridField) -> Result<f64> {
        self.inner_product(u, u)
    }

    pub fn h1_norm_sq(&self, u: &GridField) -> Result<f64> {
        let c = self.to_spectral(u)?;
        Ok(self.spectral_h1_sq(&c))
    }
}

/// Applies the 1-D matrix `mat` (out × in) along `axis` of a standard-layout array.
fn apply_axis(input: &Array3<f64>, axis: usize, mat: &Array2<f64>) -> Array3<f64> {
    let sh = input.shape();
    let (rows, cols) = mat.dim();
    debug_assert_eq!(sh[axis], cols);
    let mut out_shape = [sh[0], sh[1], sh[2]];
    out_shape[axis] = rows;
    let mut out = Array3::<f64>::zeros(out_shape);
    match axis {
        0 => {
            let a = input
                .view()
                .into_shape_with_order((sh[0], sh[1] * sh[2]))
                .expect("standard layout");
            let mut o = out
                .view_mut()
                .into_shape_with_order((rows, sh[1] * sh[2]))
                .expect("standard layout");
            general_mat_mul(1.0, mat, &a, 0.0, &mut o);
        }
        1 => {
            for i in 0..sh[0] {
                let a = input.index_axis(Axis(0), i);
                let mut o = out.index_axis_mut(Axis(0), i);
                general_mat_mul(1.0, mat, &a, 0.0, &mut o);
            }
        }
        _ => {
            let a = input
                .view()
                .into_shape_with_order((sh[0] * sh[1], sh[2]))
                .expect("standard layout");
            let mut o = out
                .view_mut()
                .into_shape_with_order((sh[0] * sh[1], rows))
                .expect("standard layout");
            general_mat_mul(1.0, &a, &mat.t(), 0.0, &mut o);
        }
    }
    out
}
