//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spenkf_core::propagators::ModelSequence;
use spenkf_core::RngSpec;

/// RNG stream numbers. Each source of randomness gets its own stream so
/// that, for instance, changing the replicate count never changes the
/// trajectory.
pub mod streams {
    pub const MODEL: u64 = 1;
    pub const OBSERVATIONS: u64 = 2;
    pub const ENSEMBLE: u64 = 3;
    pub const MONTE_CARLO: u64 = 4;
    pub const PERTURBED_OBS: u64 = 5;
    pub const MV_OBSERVATIONS: u64 = 6;
    pub const MV_ENSEMBLE: u64 = 7;
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `m_i = m` for every step.
    Constant { m: f64 },
    /// Explicit multipliers; its length overrides `steps`.
    List { values: Vec<f64> },
    /// `|m_i|` log-uniform on `[1/2, 2]` with a random sign, drawn from the seed.
    LogUniform,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InflationMode {
    #[default]
    None,
    /// φ_i, ψ_i applied after every forecast.
    Sequential,
    /// The prior variance multiplied once by θ* = α/(α-1).
    InitialTheta,
}

/// The multivariate problem for the `mv` subcommand.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MvConfig {
    /// Rows of the basis matrix Z.
    pub z: Vec<Vec<f64>>,
    /// Diagonal of M_i, used for every step.
    pub m: Vec<f64>,
    pub p0: Vec<f64>,
    pub r: Vec<f64>,
    /// Prior mean in state coordinates.
    pub v0: Vec<f64>,
    /// Initial truth in state coordinates.
    pub truth0: Vec<f64>,
}

impl Default for MvConfig {
    fn default() -> Self {
        MvConfig {
            z: vec![vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.5], vec![0.25, 0.0, 1.0]],
            m: vec![1.0, 0.9, 1.1],
            p0: vec![1.0, 2.0, 0.5],
            r: vec![1.0, 1.0, 1.0],
            v0: vec![0.0, 0.0, 0.0],
            truth0: vec![1.0, -1.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub steps: usize,
    pub ensemble_size: usize,
    pub p0: f64,
    pub x0: f64,
    pub x0_truth: f64,
    pub r: f64,
    pub model: ModelSpec,
    pub replicates: u64,
    pub inflation: InflationMode,
    pub perturbed_obs: bool,
    pub output_path: Option<PathBuf>,
    /// Perturbed initial variance scale; defaults to `p0`.
    pub p_tilde0: Option<f64>,
    /// Perturbed initial mean; defaults to `x0`.
    pub x_tilde0: Option<f64>,
    /// Ensemble shapes α tabulated by `po-penalty`.
    pub po_alphas: Vec<f64>,
    /// Step tabulated by `po-penalty`; defaults to the last step.
    pub po_step: Option<usize>,
    pub mv: MvConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: None,
            steps: 20,
            ensemble_size: 8,
            p0: 1.0,
            x0: 0.0,
            x0_truth: 0.0,
            r: 1.0,
            model: ModelSpec::Constant { m: 1.0 },
            replicates: 100_000,
            inflation: InflationMode::None,
            perturbed_obs: true,
            output_path: None,
            p_tilde0: None,
            x_tilde0: None,
            po_alphas: vec![2.0, 5.0, 10.0, 100.0, 1000.0],
            po_step: None,
            mv: MvConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse JSON, reporting the path of any offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("config field `{path}`: {}", e.into_inner())
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self, needs_ensemble: bool) -> Result<()> {
        if self.replicates < 1 {
            bail!("config field `replicates`: must be at least 1");
        }
        if self.model_steps() < 1 {
            bail!("config field `steps`: must be at least 1");
        }
        if needs_ensemble && self.ensemble_size < 3 {
            bail!("config field `ensemble_size`: N = {} but ensemble experiments need N >= 3", self.ensemble_size);
        }
        for (name, v) in [("p0", self.p0), ("r", self.r)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("config field `{name}`: {v} must be positive and finite");
            }
        }
        if let Some(p) = self.p_tilde0 {
            if !(p > 0.0 && p.is_finite()) {
                bail!("config field `p_tilde0`: {p} must be positive and finite");
            }
        }
        Ok(())
    }

    /// Number of model steps actually used.
    pub fn model_steps(&self) -> usize {
        match &self.model {
            ModelSpec::List { values } => values.len(),
            _ => self.steps,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn alpha(&self) -> f64 {
        self.ensemble_size as f64 / 2.0
    }

    pub fn p_tilde0(&self) -> f64 {
        self.p_tilde0.unwrap_or(self.p0)
    }

    pub fn x_tilde0(&self) -> f64 {
        self.x_tilde0.unwrap_or(self.x0)
    }

    pub fn stream(&self, stream: u64) -> RngSpec {
        RngSpec::new(self.seed(), stream)
    }

    pub fn model_sequence(&self) -> Result<ModelSequence> {
        let seq = match &self.model {
            ModelSpec::Constant { m } => ModelSequence::constant(*m, self.steps),
            ModelSpec::List { values } => ModelSequence::new(values.clone()),
            ModelSpec::LogUniform => ModelSequence::log_uniform(self.steps, self.stream(streams::MODEL)),
        };
        seq.context("config field `model`")
    }
}
