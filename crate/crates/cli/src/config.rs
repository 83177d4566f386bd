//! Run and sweep configuration files.
//!
//! Both are TOML with every table closed to unknown keys, so a misspelled
//! exponent or coefficient is an error rather than a silent default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use dampedwave::checkpoint::FieldFile;
use dampedwave::diagnostics::{DampingProfile, WaveState};
use dampedwave::domain::{BoundaryCondition, SpectralDomain};
use dampedwave::integrator::StepperConfig;
use dampedwave::nonlinearity::{NonlinearitySpec, PowerTerm};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSize {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub d: usize,
    /// Side lengths; defaults to `π` on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    pub n: GridSize,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition,
    #[serde(default)]
    pub beta: f64,
}

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::DirichletSine
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DampingConfig {
    Constant {
        value: f64,
    },
    /// `value · 𝟙` of an axis-aligned sub-box.
    Box {
        value: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// A one-field grid file.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub k: Vec<i64>,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Modes {
        modes: Vec<ModeAmplitude>,
    },
    /// Gaussian coefficients scaled by `(1 + μ_k)^{−decay/2}`.
    Random {
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default)]
        velocity_amplitude: f64,
    },
    /// A two-field grid file `(u, ∂ₜu)` at `t = 0`.
    File {
        path: PathBuf,
    },
    /// Resume from a checkpoint, keeping its time.
    Checkpoint {
        path: PathBuf,
    },
}

fn default_decay() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Steps between checkpoints; 0 keeps only the final state.
    #[serde(default)]
    pub checkpoint_every: usize,
    /// Write every `csv_stride`-th recorded sample.
    #[serde(default = "default_stride")]
    pub csv_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            checkpoint_every: 0,
            csv_stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub nonlinearity: Vec<PowerTerm>,
    pub damping: DampingConfig,
    pub initial: InitialConfig,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// A validated configuration turned into simulator objects.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub domain: SpectralDomain,
    pub spec: NonlinearitySpec,
    pub damping: DampingProfile,
    pub initial: WaveState,
    pub stepper: StepperConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.rebase_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Makes relative file references relative to `base`.
    pub fn rebase_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DampingConfig::File { path } = &mut self.damping {
            fix(path);
        }
        match &mut self.initial {
            InitialConfig::File { path } | InitialConfig::Checkpoint { path } => fix(path),
            _ => {}
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        if let InitialConfig::Random { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
    }

    pub fn domain(&self) -> Result<SpectralDomain> {
        let c = &self.domain;
        let n = match &c.n {
            GridSize::Uniform(k) => vec![*k; c.d],
            GridSize::PerAxis(v) => v.clone(),
        };
        let lengths = c.lengths.clone().unwrap_or_else(|| vec![PI; c.d]);
        let dom = SpectralDomain::new(c.d, &lengths, &n, c.bc, c.beta)?
            .with_dealias(self.stepper.dealias);
        Ok(dom)
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let domain = self.domain()?;
        domain.require_poincare()?;
        let spec = NonlinearitySpec::new(self.nonlinearity.iter().copied())?;
        self.stepper.validate()?;
        let damping = match &self.damping {
            DampingConfig::Constant { value } => DampingProfile::constant(&domain, *value)?,
            DampingConfig::Box { value, lo, hi } => {
                DampingProfile::indicator_box(&domain, *value, lo, hi)?
            }
            DampingConfig::File { path } => {
                let file = read_field_file(path)?;
                file.require_compatible(&domain)?;
                if file.fields.len() != 1 {
                    return Err(CliError::Config(format!(
                        "damping file {} must hold one field, found {}",
                        path.display(),
                        file.fields.len()
                    )));
                }
                DampingProfile::from_grid(file.fields.into_iter().next().expect("one field"))?
            }
        };
        let initial = match &self.initial {
            InitialConfig::Modes { modes } => {
                let mut u = domain.zeros_spectral();
                let mut v = domain.zeros_spectral();
                for m in modes {
                    let idx = domain.mode_index(&m.k)?;
                    u.values_mut()[idx] += m.u;
                    v.values_mut()[idx] += m.v;
                }
                WaveState::new(0.0, u, v)
            }
            InitialConfig::Random {
                seed,
                amplitude,
                decay,
                velocity_amplitude,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let u = domain.random_field(&mut rng, *amplitude, *decay);
                let v = domain.random_field(&mut rng, *velocity_amplitude, *decay);
                WaveState::new(0.0, u, v)
            }
            InitialConfig::File { path } => {
                let mut s = read_field_file(path)?.to_state(&domain)?;
                s.t = 0.0;
                s
            }
            InitialConfig::Checkpoint { path } => read_field_file(path)?.to_state(&domain)?,
        };
        if initial.t >= self.stepper.t_end {
            return Err(CliError::Config(format!(
                "initial time {} is not before t_end {}",
                initial.t, self.stepper.t_end
            )));
        }
        if self.outputs.csv_stride == 0 {
            return Err(CliError::Config(
                "outputs.csv_stride must be at least 1".into(),
            ));
        }
        Ok(ResolvedRun {
            domain,
            spec,
            damping,
            initial,
            stepper: self.stepper,
        })
    }

    /// `(mode label, û₀, v̂₀)` when the run is linear with constant damping
    /// and mode initial data, so that a closed-form solution exists.
    pub fn closed_form_modes(&self) -> Option<(f64, Vec<ModeAmplitude>)> {
        if !self.nonlinearity.is_empty() {
            return None;
        }
        let gamma = match &self.damping {
            DampingConfig::Constant { value } => *value,
            _ => return None,
        };
        match &self.initial {
            InitialConfig::Modes { modes } => Some((gamma, modes.clone())),
            _ => None,
        }
    }
}

pub fn read_field_file(path: &Path) -> Result<FieldFile> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FieldFile::from_bytes(&bytes)?)
}

/// Built-in configurations.
pub fn preset(name: &str) -> Result<RunConfig> {
    let text = match name {
        // f = 0, γ = 1, fundamental mode: a damped oscillator per mode.
        "linear-verify" => {
            r#"
            [domain]
            d = 3
            n = 8
            [damping]
            kind = "constant"
            value = 1.0
            [initial]
            kind = "modes"
            modes = [{ k = [1, 1, 1], u = 1.0 }]
            [stepper]
            dt = 1e-3
            t_end = 10.0
            sample_every = 10
            "#
        }
        // E(u⁰, 0) < 0 for amplitudes above about 3.77.
        "negative-energy" => {
            r#"
            [domain]
            d = 3
            n = 16
            [[nonlinearity]]
            lambda = 1.0
            alpha = 3.0
            [damping]
            kind = "constant"
            value = 0.0
            [initial]
            kind = "modes"
            modes = [{ k = [1, 1, 1], u = 5.0 }]
            [stepper]
            dt = 1e-3
            t_end = 20.0
            sample_every = 10
            "#
        }
        "small-data" => {
            r#"
            [domain]
            d = 3
            n = 16
            [[nonlinearity]]
            lambda = 1.0
            alpha = 3.0
            [damping]
            kind = "constant"
            value = 0.5
            [initial]
            kind = "modes"
            modes = [{ k = [1, 1, 1], u = 0.1 }]
            [stepper]
            dt = 5e-3
            t_end = 50.0
            sample_every = 4
            "#
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    RunConfig::from_toml(text)
}

pub const PRESETS: &[&str] = &["linear-verify", "negative-energy", "small-data"];

/// One swept parameter: a dotted path into the base config and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
}

fn default_max_runs() -> usize {
    256
}

/// A sweep point: the overrides applied and the resulting config.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub id: String,
    pub overrides: Vec<(String, toml::Value)>,
    pub config: RunConfig,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base
            .rebase_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// The cross product of all axes, first axis varying slowest.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let size = self.size();
        if size == 0 {
            return Err(CliError::Config("a sweep axis has no values".into()));
        }
        if size > self.max_runs {
            return Err(CliError::Config(format!(
                "sweep has {size} runs, above max_runs = {}",
                self.max_runs
            )));
        }
        let base =
            toml::Value::try_from(&self.base).map_err(|e| CliError::Config(e.to_string()))?;
        let width = (size.max(2) - 1).to_string().len().max(3);
        let mut out = Vec::with_capacity(size);
        for index in 0..size {
            let mut rem = index;
            let mut picks = vec![0; self.axes.len()];
            for (a, axis) in self.axes.iter().enumerate().rev() {
                picks[a] = rem % axis.values.len();
                rem /= axis.values.len();
            }
            let mut value = base.clone();
            let mut overrides = Vec::new();
            for (axis, &pick) in self.axes.iter().zip(&picks) {
                let v = axis.values[pick].clone();
                set_path(&mut value, &axis.path, v.clone())?;
                overrides.push((axis.path.clone(), v));
            }
            let config: RunConfig = value.try_into().map_err(|e: toml::de::Error| {
                CliError::Config(format!("sweep point {index}: {e}"))
            })?;
            out.push(SweepPoint {
                id: format!("run-{index:0width$}"),
                overrides,
                config,
            });
        }
        Ok(out)
    }
}

/// Replaces the value at a dotted path; numeric segments index arrays.
/// Only existing entries can be replaced.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Config(format!("malformed path '{path}'")));
    }
    for seg in &segments {
        cur = match cur {
            toml::Value::Table(t) => t.get_mut(*seg),
            toml::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| {
            CliError::Config(format!("path '{path}' does not exist in the base config"))
        })?;
    }
    // Integers are accepted where floats live.
    *cur = match (&*cur, value) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.resolve().unwrap();
            let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(again, cfg);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn negative_energy_preset_has_negative_energy() {
        let r = preset("negative-energy").unwrap().resolve().unwrap();
        let e = dampedwave::diagnostics::energy(&r.initial, &r.spec, &r.domain).unwrap();
        assert!(e < 0.0, "E = {e}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = preset("small-data").unwrap().to_toml();
        text = text.replace("alpha = 3.0", "alpah = 3.0");
        assert!(RunConfig::from_toml(&text).is_err());
        let text = preset("small-data").unwrap().to_toml() + "\n[extra]\nx = 1\n";
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_domain_named_in_error() {
        let mut cfg = preset("small-data").unwrap();
        cfg.domain.beta = -3.0;
        let err = cfg.resolve().unwrap_err().to_string();
        assert!(err.contains("Poincaré"), "{err}");
        let mut cfg = preset("small-data").unwrap();
        cfg.damping = DampingConfig::Constant { value: -1.0 };
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn sweep_points_apply_overrides() {
        let text = format!(
            "max_runs = 5\n[[axes]]\npath = \"damping.value\"\nvalues = [0, 0.5]\n[[axes]]\npath = \"initial.modes.0.u\"\nvalues = [0.1, 0.2, 0.3]\n{}",
            prefix_base(&preset("small-data").unwrap().to_toml())
        );
        let sweep = SweepConfig::from_toml(&text).unwrap();
        assert!(sweep.points().is_err()); // 6 runs exceed the cap of 5
        let mut sweep = sweep;
        sweep.max_runs = 6;
        let pts = sweep.points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].id, "run-004");
        assert_eq!(
            pts[4].config.damping,
            DampingConfig::Constant { value: 0.5 }
        );
        match &pts[4].config.initial {
            InitialConfig::Modes { modes } => assert_eq!(modes[0].u, 0.2),
            _ => unreachable!(),
        }
        sweep.axes[0].path = "damping.nope".into();
        assert!(sweep.points().is_err());
    }

    fn prefix_base(run: &str) -> String {
        // Nest every table of a run config under [base].
        let mut out = String::new();
        let mut top = String::from("[base]\n");
        let mut in_table = false;
        for line in run.lines() {
            if let Some(rest) = line.strip_prefix("[[") {
                in_table = true;
                out.push_str(&format!("[[base.{rest}\n"));
            } else if let Some(rest) = line.strip_prefix('[') {
                in_table = true;
                out.push_str(&format!("[base.{rest}\n"));
            } else if in_table {
                out.push_str(line);
                out.push('\n');
            } else {
                top.push_str(line);
                top.push('\n');
            }
        }
        top + &out
    }
}
