//! TOML run configuration. Every section and key is optional.
//!
//! ```toml
//! [model]
//! stiffness = 1.0
//! reaction = 1.0
//! load = 20.0
//! obstacle = 0.0
//! coupling = 0.5
//!
//! [hybrid]
//! tol_residual = 1e-10
//!
//! [bifurcation]
//! dense_max_dim = 400
//!
//! [stability]
//! tol_lambda = 1e-10
//! metric = "Euclidean"          # or { Energy = { shift = 0.0 } }
//!
//! [sweep]
//! epsilon_rel = 1e-6
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use unilateral_core::bifurcation::BifurcationParams;
use unilateral_core::harness::SweepConfig;
use unilateral_core::hybrid::HybridParams;
use unilateral_core::stability::ConeParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub hybrid: HybridParams,
    pub bifurcation: BifurcationParams,
    pub stability: ConeParams,
    pub sweep: SweepSection,
}

/// Coefficients of the FEM test problems driven by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Coefficient of `∫ u'²`.
    pub stiffness: f64,
    /// Coefficient of `∫ u²` on the order parameter.
    pub reaction: f64,
    /// Amplitude of the load `f(x) = load · cos(2πx)`.
    pub load: f64,
    /// Constant lower bound on the order parameter.
    pub obstacle: f64,
    /// Strength of the `∫ u' α` coupling (coupled model only).
    pub coupling: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stiffness: 1.0,
            reaction: 1.0,
            load: 20.0,
            obstacle: 0.0,
            coupling: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilon_rel: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilon_rel: SweepConfig::default().epsilon_rel,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.hybrid.validate()?;
        config.stability.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn sweep_config(&self, n_cells: usize) -> SweepConfig {
        SweepConfig {
            n_cells,
            epsilon_rel: self.sweep.epsilon_rel,
            bifurcation: self.bifurcation.clone(),
            stability: self.stability.clone(),
        }
    }
}
