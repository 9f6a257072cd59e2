//! Experiment configuration read from flat TOML files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QksdError, Result};
use crate::evolution::Filling;
use crate::krylov::Construction;
use crate::sampling::NoiseMode;

/// Which constructions a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstructionChoice {
    #[default]
    Toeplitz,
    NonToeplitz,
    Both,
}

impl ConstructionChoice {
    pub fn constructions(self) -> Vec<Construction> {
        match self {
            ConstructionChoice::Toeplitz => vec![Construction::Toeplitz],
            ConstructionChoice::NonToeplitz => vec![Construction::NonToeplitz],
            ConstructionChoice::Both => vec![Construction::Toeplitz, Construction::NonToeplitz],
        }
    }
}

impl std::str::FromStr for ConstructionChoice {
    type Err = QksdError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("both") {
            return Ok(ConstructionChoice::Both);
        }
        Ok(match s.parse::<Construction>()? {
            Construction::Toeplitz => ConstructionChoice::Toeplitz,
            Construction::NonToeplitz => ConstructionChoice::NonToeplitz,
        })
    }
}

fn default_trials() -> usize {
    100
}

fn default_mode() -> NoiseMode {
    NoiseMode::Gaussian
}

fn default_rho() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sites: usize,
    pub hopping: f64,
    pub onsite: f64,
    /// Extra `[hopping, onsite]` pairs; replaces the single pair when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_sets: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_up: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_down: Option<usize>,
    pub krylov_orders: Vec<usize>,
    /// Overrides `π/‖H‖_β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
    /// First-order Trotter steps per time step; exact propagation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trotter_steps: Option<usize>,
    /// Total shot budgets; floats so that `1e8` is accepted.
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub construction: ConstructionChoice,
    #[serde(default = "default_mode")]
    pub mode: NoiseMode,
    #[serde(default)]
    pub hardware_lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Assumption parameter of the thresholded `χ` bound.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

const MAX_EXACT_BUDGET: f64 = 9.007_199_254_740_992e15;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| QksdError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QksdError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(QksdError::Config(msg));
        if self.sites == 0 {
            return fail("sites must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.krylov_orders.is_empty() {
            return fail("krylov_orders must not be empty".into());
        }
        if let Some(n) = self.krylov_orders.iter().find(|n| **n == 0 || **n % 2 == 0) {
            return fail(format!("Krylov orders must be odd, got {n}"));
        }
        if self.budgets.is_empty() {
            return fail("budgets must not be empty".into());
        }
        for &m in &self.budgets {
            if !(m >= 1.0 && m <= MAX_EXACT_BUDGET && m.fract() == 0.0) {
                return fail(format!("budget {m} is not a positive integer"));
            }
        }
        if let Some(dt) = self.time_step {
            if !(dt.is_finite() && dt > 0.0) {
                return fail(format!("time_step must be positive, got {dt}"));
            }
        }
        if self.trotter_steps == Some(0) {
            return fail("trotter_steps must be positive".into());
        }
        if !(self.hardware_lambda.is_finite() && self.hardware_lambda >= 0.0) {
            return fail(format!("hardware_lambda must be non-negative, got {}", self.hardware_lambda));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return fail(format!("rho must be positive, got {}", self.rho));
        }
        for [t, u] in self.parameters() {
            if !(t.is_finite() && u.is_finite()) {
                return fail("hopping and onsite must be finite".into());
            }
        }
        let filling = self.filling();
        if filling.n_up > self.sites || filling.n_down > self.sites {
            return fail(format!(
                "filling ({}, {}) does not fit {} sites",
                filling.n_up, filling.n_down, self.sites
            ));
        }
        Ok(())
    }

    /// `(hopping, onsite)` pairs covered by the run.
    pub fn parameters(&self) -> Vec<[f64; 2]> {
        self.parameter_sets
            .clone()
            .unwrap_or_else(|| vec![[self.hopping, self.onsite]])
    }

    /// Explicit filling, or half filling with the extra electron spin-up.
    pub fn filling(&self) -> Filling {
        let half = Filling::half(self.sites);
        Filling::new(self.n_up.unwrap_or(half.n_up), self.n_down.unwrap_or(half.n_down))
    }

    pub fn budgets_u64(&self) -> Vec<u64> {
        self.budgets.iter().map(|m| *m as u64).collect()
    }

    /// SHA-256 of the canonical TOML form, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let text = toml::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
