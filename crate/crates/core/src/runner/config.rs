//! Experiment configuration files.
//!
//! Configs are TOML with an explicit `schema_version`; unknown keys are
//! rejected everywhere. Policy hyperparameters fall back to the
//! `[hyperparameters]` table, and the policy noise level falls back to the
//! environment's.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::change_detect::recommended_tau;
use crate::environment::{EnvConfig, Setting};
use crate::error::{Error, Result};
use crate::policies::{Hyper, POLICY_NAMES};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    #[serde(default = "HyperConfig::default_ridge")]
    pub ridge: f64,
    /// Defaults to the environment noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default = "HyperConfig::default_delta")]
    pub delta1: f64,
    #[serde(default = "HyperConfig::default_delta")]
    pub delta2: f64,
    /// Defaults to the smallest window detecting a `tau_rho` change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default = "HyperConfig::default_rho")]
    pub tau_rho: f64,
    #[serde(default = "HyperConfig::default_gamma")]
    pub gamma_a: f64,
    #[serde(default = "HyperConfig::default_gamma")]
    pub gamma_b: f64,
    #[serde(default = "HyperConfig::default_gibbs_every")]
    pub gibbs_every: usize,
}

impl HyperConfig {
    fn default_ridge() -> f64 {
        1.0
    }
    fn default_delta() -> f64 {
        0.05
    }
    fn default_rho() -> f64 {
        0.5
    }
    fn default_gamma() -> f64 {
        1.0
    }
    fn default_gibbs_every() -> usize {
        1
    }
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            ridge: 1.0,
            noise_sd: None,
            delta1: 0.05,
            delta2: 0.05,
            tau: None,
            tau_rho: 0.5,
            gamma_a: 1.0,
            gamma_b: 1.0,
            gibbs_every: 1,
        }
    }
}

/// A policy entry with optional per-policy overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs_every: Option<usize>,
}

impl PolicySpec {
    pub fn named(name: impl Into<String>) -> Self {
        PolicySpec {
            name: name.into(),
            ridge: None,
            noise_sd: None,
            delta1: None,
            delta2: None,
            tau: None,
            gamma_a: None,
            gamma_b: None,
            gibbs_every: None,
        }
    }
}

/// One row of a regret grid; `k` sets the number of distinct parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRow {
    pub n_users: usize,
    pub k: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub horizon: usize,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub environment: EnvConfig,
    #[serde(default)]
    pub hyperparameters: HyperConfig,
    pub policies: Vec<PolicySpec>,
    /// Rows for the `grid` command; each overrides the environment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridRow>,
}

impl ExperimentConfig {
    /// Setting-2 desk-scale run: 20 users, 10 shared parameters, d = 10.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            replications: 20,
            master_seed: 2021,
            output_dir: None,
            environment: EnvConfig {
                n_users: 20,
                horizon: 1000,
                dim: 10,
                pool_size: 1000,
                candidates_per_round: 25,
                s_min: 200,
                s_max: 400,
                noise_sd: 0.1,
                setting: Setting::FixedMixture {
                    k: 10,
                    weights: None,
                },
            },
            hyperparameters: HyperConfig::default(),
            policies: ["oracle-linucb", "codband", "restart-ts", "linucb"]
                .iter()
                .map(|n| PolicySpec::named(*n))
                .collect(),
            grid: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policy list is empty".into()));
        }
        self.environment
            .validate()
            .map_err(|e| Error::Config(format!("environment: {e}")))?;
        for spec in &self.policies {
            if !POLICY_NAMES.contains(&spec.name.as_str()) {
                return Err(Error::Config(format!(
                    "policies: unknown policy `{}` (expected one of {})",
                    spec.name,
                    POLICY_NAMES.join(", ")
                )));
            }
            self.resolve(spec, &self.environment)
                .map_err(|e| Error::Config(format!("policies.{}: {e}", spec.name)))?;
        }
        for (i, row) in self.grid.iter().enumerate() {
            self.environment_for(row)
                .validate()
                .map_err(|e| Error::Config(format!("grid[{i}]: {e}")))?;
        }
        Ok(())
    }

    /// Replace the policy list with bare names.
    pub fn set_policy_names(&mut self, names: &[&str]) {
        self.policies = names.iter().map(|n| PolicySpec::named(n.trim())).collect();
    }

    /// Hyperparameters of `spec` for environment `env`.
    pub fn resolve(&self, spec: &PolicySpec, env: &EnvConfig) -> Result<Hyper> {
        let h = &self.hyperparameters;
        let delta1 = spec.delta1.unwrap_or(h.delta1);
        let delta2 = spec.delta2.unwrap_or(h.delta2);
        let tau = match spec.tau.or(h.tau) {
            Some(tau) => tau,
            None => recommended_tau(h.tau_rho, delta1, delta2)?,
        };
        let noise_sd = spec.noise_sd.or(h.noise_sd).unwrap_or(env.noise_sd);
        let hyper = Hyper {
            dim: env.dim,
            ridge: spec.ridge.unwrap_or(h.ridge),
            // A noiseless environment still needs a proper likelihood.
            noise_sd: if noise_sd > 0.0 { noise_sd } else { 1e-3 },
            delta1,
            delta2,
            tau,
            gamma_a: spec.gamma_a.unwrap_or(h.gamma_a),
            gamma_b: spec.gamma_b.unwrap_or(h.gamma_b),
            gibbs_every: spec.gibbs_every.unwrap_or(h.gibbs_every),
        };
        check_hyper(&hyper)?;
        Ok(hyper)
    }

    /// Environment of a grid row.
    pub fn environment_for(&self, row: &GridRow) -> EnvConfig {
        let mut env = self.environment.clone();
        env.n_users = row.n_users;
        env.s_min = row.s_min;
        env.s_max = row.s_max;
        env.horizon = row.horizon;
        env.noise_sd = row.noise_sd;
        env.setting = match env.setting {
            Setting::FixedMixture { weights, .. } => Setting::FixedMixture {
                k: row.k,
                weights: weights.filter(|w| w.len() == row.k),
            },
            Setting::Dirichlet { alpha0, .. } => Setting::Dirichlet {
                alpha0,
                initial_k: row.k,
            },
            Setting::Stationary { .. } => Setting::Stationary { k: row.k },
        };
        env
    }
}

fn check_hyper(h: &Hyper) -> Result<()> {
    if h.ridge.is_nan() || h.ridge <= 0.0 {
        return Err(Error::param("ridge", "must be positive"));
    }
    if !(h.delta1 > 0.0 && h.delta1 < 1.0) || !(h.delta2 > 0.0 && h.delta2 < 1.0) {
        return Err(Error::param("delta", "δ₁ and δ₂ must lie in (0,1)"));
    }
    if h.tau == 0 {
        return Err(Error::param("tau", "must be at least 1"));
    }
    if !(h.gamma_a > 0.0 && h.gamma_b > 0.0) {
        return Err(Error::param("gamma", "a and b must be positive"));
    }
    if h.gibbs_every == 0 {
        return Err(Error::param("gibbs_every", "must be at least 1"));
    }
    Ok(())
}
