use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{default_q, ModelParams};
use crate::error::{KsError, Result};
use crate::exponent::Exponent;
use crate::fields::{box_length_rule, Component, GaussianMixture};
use crate::grid::GridSpec;
use crate::history::ThinningPolicy;
use crate::particles::{DriftBackend, DriftBackendConfig, ParticleRunConfig, DEFAULT_BANDWIDTH_CONSTANT};
use crate::pde::{DriftMode, PdeProblem, SolverConfig, TimeScheme};
use crate::verification::{params_from_mixtures, CheckTolerances, RunIdentity};

/// One run configuration, read from TOML. Every command reads the sections it needs.
///
/// ```toml
/// seed = 7
///
/// [model]
/// d = 2
/// chi = 0.1
/// lambda = 1.0
/// T = 1.0
///
/// [rho0]
/// components = [{ weight = 1.0, mean = [0.0, 0.0], variance = 1.0 }]
///
/// [c0]
/// components = [{ weight = 0.5, mean = [0.0, 0.0], variance = 1.0 }]
///
/// [pde]
/// n = 64
/// dt = 1e-3
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub rho0: MixtureSpec,
    pub c0: MixtureSpec,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default)]
    pub pde: Option<PdeSection>,
    #[serde(default)]
    pub particles: Option<ParticleSection>,
    #[serde(default)]
    pub tolerances: CheckTolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub chi: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Defaults to `3d/2`.
    #[serde(default)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

/// Evenly spaced `chi` values for the condition sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub chi_min: f64,
    pub chi_max: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.chi_min];
        }
        (0..self.points)
            .map(|i| self.chi_min + (self.chi_max - self.chi_min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub n: usize,
    pub dt: f64,
    /// Defaults to the larger box rule of `rho0` and `c0` at `T`.
    #[serde(default)]
    pub box_length: Option<f64>,
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default)]
    pub mode: DriftMode,
    #[serde(default = "default_every")]
    pub record_every: usize,
    /// Norms tracked every step; defaults to `q` and `d/2`.
    #[serde(default)]
    pub track_norms: Option<Vec<Exponent>>,
    /// Keep snapshots and report the Duhamel and mild-form residuals.
    #[serde(default)]
    pub duhamel: bool,
    #[serde(default = "default_cap")]
    pub blowup_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub n: usize,
    pub dt: f64,
    /// Defaults to `dt`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub backend: DriftBackend,
    /// Mesh points per axis for the mesh backend; defaults to the mesh rule.
    #[serde(default)]
    pub mesh_n: Option<usize>,
    #[serde(default = "default_true")]
    pub include_chi_on_b0: bool,
    /// KDE grid points per axis.
    pub kde_n: usize,
    #[serde(default)]
    pub box_length: Option<f64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_constant: f64,
    #[serde(default = "default_every")]
    pub record_every: usize,
    #[serde(default)]
    pub history: Option<ThinningPolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_every() -> usize {
    10
}

fn default_cap() -> f64 {
    1e8
}

fn default_true() -> bool {
    true
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_CONSTANT
}

fn default_dir() -> String {
    "out".into()
}

fn field_error(field: &str, e: impl std::fmt::Display) -> KsError {
    KsError::Config(format!("{field}: {e}"))
}

impl MixtureSpec {
    pub fn to_mixture(&self, d: usize) -> GaussianMixture {
        GaussianMixture { d, components: self.components.clone() }
    }
}

impl RunConfig {
    /// Parse and validate. Syntax errors carry the line and column, semantic
    /// errors the dotted field name.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| KsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KsError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configs serialise to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let d = m.d;
        if !(1..=3).contains(&d) {
            return Err(field_error("model.d", format!("must be 1, 2 or 3, got {d}")));
        }
        if !(m.chi >= 0.0 && m.chi.is_finite()) {
            return Err(field_error("model.chi", format!("must be finite and >= 0, got {}", m.chi)));
        }
        if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
            return Err(field_error("model.lambda", format!("must be finite and >= 0, got {}", m.lambda)));
        }
        if !(m.horizon > 0.0 && m.horizon.is_finite()) {
            return Err(field_error("model.T", format!("must be finite and > 0, got {}", m.horizon)));
        }
        if let Some(q) = m.q {
            let dd = d as f64;
            if !(q > dd && q < 2.0 * dd) {
                return Err(field_error("model.q", format!("must lie in (d, 2d) = ({dd}, {}), got {q}", 2.0 * dd)));
            }
        }
        self.rho0().validate_probability().map_err(|e| field_error("rho0", e))?;
        self.c0().validate().map_err(|e| field_error("c0", e))?;
        if let Some(s) = &self.constants.sweep {
            if !(s.chi_min >= 0.0 && s.chi_max >= s.chi_min && s.chi_max.is_finite()) || s.points == 0 {
                return Err(field_error("constants.sweep", "need 0 <= chi_min <= chi_max and points >= 1"));
            }
        }
        if let Some(p) = &self.pde {
            self.pde_problem(p).map_err(|e| field_error("pde", e))?;
            if !(p.dt > 0.0) {
                return Err(field_error("pde.dt", "must be > 0"));
            }
        }
        if let Some(p) = &self.particles {
            if p.n == 0 {
                return Err(field_error("particles.n", "must be >= 1"));
            }
            if !(p.dt > 0.0 && p.dt.is_finite()) {
                return Err(field_error("particles.dt", "must be > 0"));
            }
            if !(p.bandwidth_constant > 0.0) {
                return Err(field_error("particles.bandwidth_constant", "must be > 0"));
            }
            self.particle_config(p).map_err(|e| field_error("particles", e))?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the configuration, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection { dir: String::new() };
        let json = serde_json::to_vec(&c).expect("run configs serialise to JSON");
        hex::encode(Sha256::digest(&json))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    pub fn rho0(&self) -> GaussianMixture {
        self.rho0.to_mixture(self.model.d)
    }

    pub fn c0(&self) -> GaussianMixture {
        self.c0.to_mixture(self.model.d)
    }

    pub fn q(&self) -> f64 {
        self.model.q.unwrap_or_else(|| default_q(self.model.d))
    }

    /// Parameters with the initial-data norms evaluated from the mixtures.
    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let p = params_from_mixtures(&self.rho0(), &self.c0(), m.chi, m.lambda, m.horizon)?;
        Ok(p.with_q(self.q()))
    }

    pub fn identity(&self) -> RunIdentity {
        RunIdentity {
            rho0: self.rho0(),
            c0: self.c0(),
            chi: self.model.chi,
            lambda: self.model.lambda,
            horizon: self.model.horizon,
        }
    }

    fn default_box(&self) -> f64 {
        box_length_rule(&self.rho0(), self.model.horizon).max(box_length_rule(&self.c0(), self.model.horizon))
    }

    fn default_norms(&self) -> Vec<Exponent> {
        let half = 0.5 * self.model.d as f64;
        let mut v = vec![Exponent::new(self.q())];
        if half >= 1.0 {
            v.push(Exponent::new(half));
        }
        v
    }

    pub fn pde_problem(&self, p: &PdeSection) -> Result<(PdeProblem, SolverConfig)> {
        let grid = GridSpec::new(self.model.d, p.n, p.box_length.unwrap_or_else(|| self.default_box()))?;
        let problem =
            PdeProblem { chi: self.model.chi, lambda: self.model.lambda, rho0: self.rho0(), c0: self.c0(), grid };
        let mut cfg = SolverConfig::new(p.dt);
        cfg.scheme = p.scheme;
        cfg.mode = p.mode;
        cfg.blowup_cap = p.blowup_cap;
        cfg.record_history = p.duhamel;
        cfg.track_norms = p.track_norms.clone().unwrap_or_else(|| self.default_norms());
        cfg.track_drift = true;
        Ok((problem, cfg))
    }

    pub fn particle_config(&self, p: &ParticleSection) -> Result<ParticleRunConfig> {
        let d = self.model.d;
        let box_length = p.box_length.unwrap_or_else(|| self.default_box());
        let epsilon = p.epsilon.unwrap_or(p.dt);
        let mesh = match p.backend {
            DriftBackend::Pairwise => None,
            DriftBackend::Mesh => Some(match p.mesh_n {
                Some(n) => GridSpec::new(d, n, box_length)?,
                None => DriftBackendConfig::mesh_rule(d, box_length, p.dt.max(p.delta))?,
            }),
        };
        let backend = DriftBackendConfig {
            mode: p.backend,
            epsilon,
            delta: p.delta,
            mesh,
            include_chi_on_b0: p.include_chi_on_b0,
        };
        backend.validate()?;
        Ok(ParticleRunConfig {
            n: p.n,
            dt: p.dt,
            seed: self.seed,
            backend,
            kde_grid: GridSpec::new(d, p.kde_n, box_length)?,
            bandwidth_constant: p.bandwidth_constant,
            record_every: p.record_every,
            history_policy: p.history.unwrap_or_default(),
            track_norms: self.default_norms(),
        })
    }
}
