//! Experiment config: a JSON document with one run's model, parameters and
//! output directory.
//!
//! ```json
//! {
//!   "command": "decay",
//!   "output_dir": "out/ou",
//!   "seed": 7,
//!   "model": "models/ou.json",
//!   "test_function": { "terms": [ { "x": [ { "poly": [0, 1] } ], "y": [ "one" ] } ] },
//!   "t_grid": [0.5, 1, 2, 4],
//!   "n_outer": 2000,
//!   "integrator": { "h": 0.001, "horizon": 4 }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionField, Model, Potential, ProbeSpec, TensorTerm, TestFunction, Univariate};
use crate::rates::Preset;
use crate::sde::Factorization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Validate,
    Rate,
    Simulate,
    Decay,
    Fpsolve,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Rate => "rate",
            Command::Simulate => "simulate",
            Command::Decay => "decay",
            Command::Fpsolve => "fpsolve",
            Command::Compare => "compare",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub model: Option<ModelRef>,
    #[serde(default)]
    pub test_function: Option<TestFunctionSpec>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub n_outer: Option<usize>,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub envelopes: Option<Vec<EnvelopeSpec>>,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub probes: Option<ProbeConfig>,
}

/// A model file path (relative to the config file) or an inline model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Path(PathBuf),
    Inline(ModelSpec),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// (d₁, d₂), checked against the potentials when present.
    #[serde(default)]
    pub dims: Option<(usize, usize)>,
    /// Row-major d₁×d₂.
    pub q: Vec<f64>,
    pub phi: PotentialSpec,
    pub psi: PotentialSpec,
    pub sigma: DiffusionSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gaussian { dim: usize },
    Quadratic {
        lambda: Vec<f64>,
        #[serde(default)]
        shift: Option<Vec<f64>>,
    },
    /// κ(1 + |x|²)^{exponent/2}
    PowerLaw { dim: usize, kappa: f64, exponent: f64 },
    /// ((tail + d)/2)·log(1 + |x|²)
    LogPower { dim: usize, tail: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Identity { dim: usize },
    ScalarBounded { dim: usize, s: f64 },
    DiagonalBounded { s: Vec<f64> },
    Constant { dim: usize, matrix: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UnivariateSpec {
    One,
    Poly(Vec<f64>),
    Tanh(f64),
    Sin { freq: f64, phase: f64 },
    Gauss { center: f64, width: f64 },
    Bump { center: f64, radius: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub coef: f64,
    pub x: Vec<UnivariateSpec>,
    pub y: Vec<UnivariateSpec>,
}

fn one() -> f64 {
    1.0
}

/// Σ_k coef_k · Π_i x_k[i](x_i) · Π_j y_k[j](y_j)
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub h: f64,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub factorization: Factorization,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n")]
    pub nx: usize,
    #[serde(default = "default_n")]
    pub ny: usize,
    /// (R_x, R_y); chosen from the tails of μ when absent.
    #[serde(default)]
    pub radius: Option<(f64, f64)>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Write u(t) on the grid at every output time.
    #[serde(default)]
    pub snapshots: bool,
    /// Also evolve this initial density under the Fokker–Planck equation:
    /// a Gaussian bump at (x, y) with the given width.
    #[serde(default)]
    pub density: Option<DensitySpec>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: default_n(),
            ny: default_n(),
            radius: None,
            dt: default_dt(),
            snapshots: false,
            density: None,
        }
    }
}

fn default_n() -> usize {
    257
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub center: (f64, f64),
    pub width: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    /// Dimension for polylog profiles.
    #[serde(default = "one_usize")]
    pub d: usize,
}

fn one_usize() -> usize {
    1
}

impl EnvelopeSpec {
    pub fn preset(&self) -> Result<Preset> {
        Preset::parse(&self.family, &self.params, self.d)
    }

    pub fn label(&self) -> String {
        if self.params.is_empty() {
            self.family.clone()
        } else {
            let p: Vec<String> = self.params.iter().map(|v| v.to_string()).collect();
            format!("{}({})", self.family, p.join(","))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub n_paths: usize,
    /// Fixed start (x, y); paths start from μ when absent.
    #[serde(default)]
    pub start: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Mc,
    Grid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub source: Source,
    /// ‖f‖²_osc used in the envelope; taken from f when bounded, else 1.
    #[serde(default)]
    pub osc_sq: Option<f64>,
    /// Smallest time used in the asymptotic exponent fit.
    #[serde(default)]
    pub fit_from: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

impl ProbeConfig {
    pub fn to_spec(&self) -> ProbeSpec {
        let mut p = ProbeSpec::default();
        if let Some(r) = self.radius {
            p.radius = r;
        }
        if let Some(c) = self.count {
            p.count = c;
        }
        p
    }
}

/// A config as loaded, with the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base: PathBuf,
    /// Raw bytes of the config file.
    pub raw: Vec<u8>,
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], origin: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { origin.to_string() } else { format!("{origin}:{path}") };
        Error::config(path, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let raw = fs::read(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let config: ExperimentConfig = parse_json(&raw, &path.display().to_string())?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, base, raw };
    loaded.check()?;
    Ok(loaded)
}

impl LoadedConfig {
    pub fn from_config(config: ExperimentConfig, base: impl Into<PathBuf>) -> Result<Self> {
        let raw = serde_json::to_vec_pretty(&config)?;
        let loaded = Self {
            config,
            base: base.into(),
            raw,
        };
        loaded.check()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Per-command requirements, reported with key paths.
    fn check(&self) -> Result<()> {
        let c = &self.config;
        let needs_model = c.command != Command::Rate;
        if needs_model && c.model.is_none() {
            return Err(Error::config("model", format!("required by `{}`", c.command.name())));
        }
        if let Some(ModelRef::Path(p)) = &c.model {
            if !self.resolve(p).is_file() {
                return Err(Error::config("model", format!("file {} does not exist", p.display())));
            }
        }
        let needs_grid_times = matches!(
            c.command,
            Command::Rate | Command::Simulate | Command::Decay | Command::Fpsolve | Command::Compare
        );
        if needs_grid_times {
            let t = c
                .t_grid
                .as_ref()
                .ok_or_else(|| Error::config("t_grid", format!("required by `{}`", c.command.name())))?;
            if t.is_empty() {
                return Err(Error::config("t_grid", "must not be empty"));
            }
            if let Some(k) = t.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::config(format!("t_grid[{k}]"), "must be finite and nonnegative"));
            }
            if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(Error::config(format!("t_grid[{}]", k + 1), "t_grid must be strictly increasing"));
            }
        }
        let needs_f = matches!(c.command, Command::Decay | Command::Fpsolve | Command::Compare);
        if needs_f && c.test_function.is_none() {
            return Err(Error::config("test_function", format!("required by `{}`", c.command.name())));
        }
        let mc = match c.command {
            Command::Simulate | Command::Decay => true,
            Command::Compare => matches!(c.compare.as_ref().map(|s| s.source), Some(Source::Mc)),
            _ => false,
        };
        if mc && c.integrator.is_none() {
            return Err(Error::config("integrator", format!("required by `{}`", c.command.name())));
        }
        if matches!(c.command, Command::Decay) || mc && c.command == Command::Compare {
            match c.n_outer {
                None => return Err(Error::config("n_outer", "required for Monte Carlo decay")),
                Some(n) if n < 2 => return Err(Error::config("n_outer", "must be at least 2")),
                _ => {}
            }
        }
        match c.command {
            Command::Rate => {
                let e = c.envelopes.as_ref().ok_or_else(|| Error::config("envelopes", "required by `rate`"))?;
                if e.is_empty() {
                    return Err(Error::config("envelopes", "must not be empty"));
                }
                for (k, spec) in e.iter().enumerate() {
                    spec.preset()
                        .and_then(|p| p.profiles())
                        .map_err(|err| Error::config(format!("envelopes[{k}]"), err.to_string()))?;
                    if !(spec.c1 > 0.0 && spec.c2 > 0.0) {
                        return Err(Error::config(format!("envelopes[{k}]"), "c1 and c2 must be positive"));
                    }
                }
            }
            Command::Simulate => {
                if c.simulate.is_none() {
                    return Err(Error::config("simulate", "required by `simulate`"));
                }
            }
            Command::Compare => {
                let e = c.envelopes.as_ref().ok_or_else(|| Error::config("envelopes", "required by `compare`"))?;
                if e.len() != 1 {
                    return Err(Error::config("envelopes", "`compare` takes exactly one envelope"));
                }
                e[0].preset()
                    .and_then(|p| p.profiles())
                    .map_err(|err| Error::config("envelopes[0]", err.to_string()))?;
                if c.compare.is_none() {
                    return Err(Error::config("compare", "required by `compare`"));
                }
            }
            _ => {}
        }
        if let Some(g) = &c.grid {
            if g.nx < 3 || g.ny < 3 {
                return Err(Error::config("grid", "nx and ny must be at least 3"));
            }
            if !(g.dt > 0.0) {
                return Err(Error::config("grid.dt", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        let (spec, origin) = match self.config.model.as_ref() {
            Some(ModelRef::Inline(m)) => (m.clone(), "model".to_string()),
            Some(ModelRef::Path(p)) => {
                let path = self.resolve(p);
                let raw = fs::read(&path).map_err(|e| Error::config("model", e.to_string()))?;
                (parse_json::<ModelSpec>(&raw, &path.display().to_string())?, path.display().to_string())
            }
            None => return Err(Error::config("model", "missing")),
        };
        spec.build().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config(origin, other.to_string()),
        })
    }

    pub fn test_function(&self, model: &Model) -> Result<TestFunction> {
        let spec = self
            .config
            .test_function
            .as_ref()
            .ok_or_else(|| Error::config("test_function", "missing"))?;
        spec.build(model.d1(), model.d2())
    }

    pub fn t_grid(&self) -> &[f64] {
        self.config.t_grid.as_deref().unwrap_or(&[])
    }
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialSpec::Gaussian { dim } => Ok(Potential::standard_gaussian(*dim)),
            PotentialSpec::Quadratic { lambda, shift } => {
                let shift = shift.clone().unwrap_or_else(|| vec![0.0; lambda.len()]);
                Potential::quadratic(lambda.clone(), shift)
            }
            PotentialSpec::PowerLaw { dim, kappa, exponent } => Potential::power_law(*dim, *kappa, *exponent),
            PotentialSpec::LogPower { dim, tail } => Potential::log_power(*dim, *tail),
        }
    }
}

impl DiffusionSpec {
    pub fn build(&self) -> Result<DiffusionField> {
        match self {
            DiffusionSpec::Identity { dim } => Ok(DiffusionField::identity(*dim)),
            DiffusionSpec::ScalarBounded { dim, s } => DiffusionField::scalar_bounded(*dim, *s),
            DiffusionSpec::DiagonalBounded { s } => DiffusionField::diagonal_bounded(s.clone()),
            DiffusionSpec::Constant { dim, matrix } => DiffusionField::constant(*dim, matrix.clone()),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        let phi = self.phi.build().map_err(|e| Error::config("model.phi", e.to_string()))?;
        let psi = self.psi.build().map_err(|e| Error::config("model.psi", e.to_string()))?;
        let sigma = self.sigma.build().map_err(|e| Error::config("model.sigma", e.to_string()))?;
        if let Some((d1, d2)) = self.dims {
            if (d1, d2) != (phi.dim(), psi.dim()) {
                return Err(Error::config(
                    "model.dims",
                    format!("({d1}, {d2}) disagrees with the potentials ({}, {})", phi.dim(), psi.dim()),
                ));
            }
        }
        let m = Model::new(self.q.clone(), phi, psi, sigma)?;
        Ok(match &self.name {
            Some(n) => m.with_name(n.clone()),
            None => m,
        })
    }
}

impl UnivariateSpec {
    pub fn build(&self) -> Univariate {
        match self {
            UnivariateSpec::One => Univariate::One,
            UnivariateSpec::Poly(c) => Univariate::Poly(c.clone()),
            UnivariateSpec::Tanh(s) => Univariate::Tanh(*s),
            UnivariateSpec::Sin { freq, phase } => Univariate::Sin {
                freq: *freq,
                phase: *phase,
            },
            UnivariateSpec::Gauss { center, width } => Univariate::Gauss {
                center: *center,
                width: *width,
            },
            UnivariateSpec::Bump { center, radius } => Univariate::Bump {
                center: *center,
                radius: *radius,
            },
        }
    }
}

impl TestFunctionSpec {
    pub fn build(&self, dx: usize, dy: usize) -> Result<TestFunction> {
        if self.terms.is_empty() {
            return Err(Error::config("test_function.terms", "must not be empty"));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, t) in self.terms.iter().enumerate() {
            if t.x.len() != dx || t.y.len() != dy {
                return Err(Error::config(
                    format!("test_function.terms[{k}]"),
                    format!("expected {dx} x-factors and {dy} y-factors"),
                ));
            }
            terms.push(TensorTerm {
                coef: t.coef,
                fx: t.x.iter().map(UnivariateSpec::build).collect(),
                fy: t.y.iter().map(UnivariateSpec::build).collect(),
            });
        }
        let f = TestFunction::tensor(dx, dy, terms)?;
        Ok(match &self.label {
            Some(l) => f.with_label(l.clone()),
            None => f,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_json() -> serde_json::Value {
        serde_json::json!({
            "q": [1.0],
            "phi": { "family": "gaussian", "dim": 1 },
            "psi": { "family": "gaussian", "dim": 1 },
            "sigma": { "family": "identity", "dim": 1 }
        })
    }

    #[test]
    fn error_carries_key_path() {
        let v = serde_json::json!({
            "command": "decay",
            "output_dir": "o",
            "seed": 1,
            "model": ou_json(),
            "integrator": { "h": "big" }
        });
        let e = parse_json::<ExperimentConfig>(&serde_json::to_vec(&v).unwrap(), "cfg").unwrap_err();
        assert!(e.to_string().contains("integrator.h"), "{e}");
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let v = serde_json::json!({
            "command": "rate",
            "output_dir": "o",
            "seed": 1,
            "t_grid": [1.0, 3.0, 2.0],
            "envelopes": [ { "family": "exponential" } ]
        });
        let c: ExperimentConfig = serde_json::from_value(v).unwrap();
        let e = LoadedConfig::from_config(c, ".").unwrap_err();
        assert!(e.to_string().contains("t_grid[2]"), "{e}");
    }

    #[test]
    fn inline_model_builds() {
        let spec: ModelSpec = serde_json::from_value(ou_json()).unwrap();
        let m = spec.build().unwrap();
        assert_eq!((m.d1(), m.d2()), (1, 1));
    }

    #[test]
    fn missing_seed_is_rejected() {
        let v = serde_json::json!({ "command": "validate", "output_dir": "o", "model": ou_json() });
        let e = parse_json::<ExperimentConfig>(&serde_json::to_vec(&v).unwrap(), "cfg").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }
}
