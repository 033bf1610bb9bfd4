//! Run-configuration schema: flat, human-editable TOML sections, validated
//! before any computation starts. Unknown keys are rejected so typos fail
//! loudly instead of silently running defaults.

use crate::error::{Error, Result};
use crate::expansion::ScattererLaw;
use crate::scatter::{FormFactor, ModelParams, ScattererPotential, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelBlock,
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collide: Option<CollideBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareBlock>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.model.to_params()?.validate()?;
        cfg.ensemble.to_law()?.validate()?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub alpha_star: f64,
    pub mass_ratio: f64,
    pub ell_star: f64,
    pub dim: usize,
    pub xi_plus: f64,
    /// "bump" or "cosine2".
    pub form_factor: String,
    /// "harmonic" (default) or "even-power" with `potential_power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_power: Option<u32>,
}

impl ModelBlock {
    pub fn to_params(&self) -> Result<ModelParams> {
        let form_factor = match self.form_factor.as_str() {
            "bump" => FormFactor::SmoothBump,
            "cosine2" => FormFactor::CosineSquared,
            other => {
                return Err(Error::Config(format!(
                    "model.form_factor: unknown value '{other}' (use \"bump\" or \"cosine2\")"
                )))
            }
        };
        let potential = match self.potential.as_deref().unwrap_or("harmonic") {
            "harmonic" => ScattererPotential::Harmonic,
            "even-power" => {
                let power = self.potential_power.ok_or_else(|| {
                    Error::Config("model.potential_power required for even-power".into())
                })?;
                ScattererPotential::EvenPower { power }
            }
            other => {
                return Err(Error::Config(format!(
                    "model.potential: unknown value '{other}'"
                )))
            }
        };
        let params = ModelParams {
            alpha_star: self.alpha_star,
            mass_ratio: self.mass_ratio,
            ell_star: self.ell_star,
            dim: self.dim,
            xi_plus: self.xi_plus,
            form_factor,
            potential,
        };
        params
            .validate()
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    /// "microcanonical" or "truncated-gibbs".
    pub law: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

impl EnsembleBlock {
    pub fn to_law(&self) -> Result<ScattererLaw> {
        let law = match self.law.as_str() {
            "microcanonical" => ScattererLaw::Microcanonical {
                e_star: self
                    .e_star
                    .ok_or_else(|| Error::Config("ensemble.e_star required".into()))?,
            },
            "truncated-gibbs" => ScattererLaw::TruncatedGibbs {
                beta: self
                    .beta
                    .ok_or_else(|| Error::Config("ensemble.beta required".into()))?,
                cutoff: self
                    .cutoff
                    .ok_or_else(|| Error::Config("ensemble.cutoff required".into()))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "ensemble.law: unknown value '{other}'"
                )))
            }
        };
        law.validate()
            .map_err(|e| Error::Config(format!("ensemble: {e}")))?;
        Ok(law)
    }
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollideBlock {
    /// Collisions per momentum value; each uses its own rng stream.
    pub n_collisions: usize,
    /// Incoming speeds; every collision's random data is reused across the
    /// list so expansion residuals can be read off per kappa.
    pub p_norms: Vec<f64>,
    /// Adds first-order prediction and residual columns.
    #[serde(default)]
    pub expansion_comparison: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    /// "energy" or "vector".
    pub kind: String,
    /// "truncated" or "exact-ode".
    pub mode: String,
    pub n_steps: usize,
    pub e0: f64,
    #[serde(default = "default_one")]
    pub record_stride: usize,
    #[serde(default = "default_one")]
    pub n_chains: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeBlock {
    pub x0: f64,
    pub dt: f64,
    pub t_max: f64,
    pub n_paths: usize,
    #[serde(default = "default_one")]
    pub record_stride: usize,
}

fn default_grid_points() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryBlock {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Upper edge of the tables; densities' own tail cut when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
}

fn default_taus() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

fn default_alpha_stars() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_moment_tol() -> f64 {
    3.0
}

fn default_ks_threshold() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    #[serde(default = "default_alpha_stars")]
    pub alpha_stars: Vec<f64>,
    #[serde(default = "default_taus")]
    pub taus: Vec<f64>,
    pub x0: f64,
    pub n_chains: usize,
    pub n_paths: usize,
    pub dt: f64,
    /// Moment agreement threshold in combined standard errors.
    #[serde(default = "default_moment_tol")]
    pub moment_tol_se: f64,
    /// Stationary-law check: equilibrium-started chains pooled over this
    /// many streams and steps, KS against the time-weighted speed density.
    #[serde(default)]
    pub stationary_chains: usize,
    #[serde(default)]
    pub stationary_steps: usize,
    #[serde(default = "default_ks_threshold")]
    pub ks_threshold: f64,
}
