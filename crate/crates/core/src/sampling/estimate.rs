//! Single Hadamard-test estimates and hardware decay.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{QksdError, Result};
use crate::krylov::KrylovPair;

/// Estimator noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Exact Bernoulli outcomes, the ground truth.
    Binomial,
    /// Normal approximation with variance `(1 − x²)/m`, not clamped.
    Gaussian,
    /// Returns the (decayed) true value; for reference runs.
    Noiseless,
}

impl NoiseMode {
    pub fn label(self) -> &'static str {
        match self {
            NoiseMode::Binomial => "binomial",
            NoiseMode::Gaussian => "gaussian",
            NoiseMode::Noiseless => "noiseless",
        }
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = QksdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binomial" => Ok(NoiseMode::Binomial),
            "gaussian" => Ok(NoiseMode::Gaussian),
            "noiseless" => Ok(NoiseMode::Noiseless),
            other => Err(QksdError::Config(format!("unknown sampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    /// Decay exponent `λ ≥ 0`; true values are scaled by `e^{−λ}`.
    pub hardware_lambda: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(mode: NoiseMode, hardware_lambda: f64, seed: u64) -> Result<Self> {
        if !(hardware_lambda.is_finite() && hardware_lambda >= 0.0) {
            return Err(QksdError::InvalidInput(format!(
                "decay exponent must be non-negative, got {hardware_lambda}"
            )));
        }
        Ok(Self { mode, hardware_lambda, seed })
    }

    pub fn decay_factor(&self) -> f64 {
        (-self.hardware_lambda).exp()
    }
}

/// Estimate of one real quantity in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartEstimate {
    pub value: f64,
    /// Set when no shots were taken; `value` is then 0.
    pub infinite_variance: bool,
}

const PROBABILITY_SLACK: f64 = 1e-12;

/// Samples the mean of `shots` ±1 outcomes whose expectation is `truth`.
pub fn estimate_part<R: Rng + ?Sized>(
    truth: f64,
    shots: u64,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<PartEstimate> {
    if !truth.is_finite() {
        return Err(QksdError::InvalidProbability(truth));
    }
    if shots == 0 {
        return Ok(PartEstimate { value: 0.0, infinite_variance: true });
    }
    let m = shots as f64;
    let value = match mode {
        NoiseMode::Binomial => {
            if truth.abs() > 1.0 + PROBABILITY_SLACK {
                return Err(QksdError::InvalidProbability(truth));
            }
            let p = ((1.0 + truth) / 2.0).clamp(0.0, 1.0);
            let successes = Binomial::new(shots, p)
                .map_err(|_| QksdError::InvalidProbability(truth))?
                .sample(rng);
            2.0 * successes as f64 / m - 1.0
        }
        NoiseMode::Noiseless => truth,
        NoiseMode::Gaussian => {
            let sd = ((1.0 - truth * truth).max(0.0) / m).sqrt();
            if sd == 0.0 {
                truth
            } else {
                truth + Normal::new(0.0, sd).expect("finite sd").sample(rng)
            }
        }
    };
    Ok(PartEstimate { value, infinite_variance: false })
}

/// Complex estimate from `m_r` real and `m_i` imaginary configuration shots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardEstimate {
    pub value: Complex64,
    pub infinite_variance: bool,
}

pub fn hadamard_estimate<R: Rng + ?Sized>(
    truth: Complex64,
    m_r: u64,
    m_i: u64,
    mode: NoiseMode,
    rng: &mut R,
) -> Result<HadamardEstimate> {
    let re = estimate_part(truth.re, m_r, mode, rng)?;
    let im = estimate_part(truth.im, m_i, mode, rng)?;
    Ok(HadamardEstimate {
        value: Complex64::new(re.value, im.value),
        infinite_variance: re.infinite_variance || im.infinite_variance,
    })
}

/// `λ = N_q · D · ln(1/r)` for per-gate fidelity `r`.
pub fn hardware_lambda(fidelity: f64, qubits: usize, depth: usize) -> Result<f64> {
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(QksdError::InvalidFidelity(fidelity));
    }
    Ok(qubits as f64 * depth as f64 * (1.0 / fidelity).ln())
}

/// Scales both matrices by `e^{−λ}`.
pub fn apply_hardware_decay(pair: &KrylovPair, lambda: f64) -> Result<KrylovPair> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(QksdError::InvalidInput(format!(
            "decay exponent must be non-negative, got {lambda}"
        )));
    }
    let factor = Complex64::new((-lambda).exp(), 0.0);
    Ok(KrylovPair {
        h: pair.h.map(|z| z * factor),
        s: pair.s.map(|z| z * factor),
        construction: pair.construction,
        config: pair.config,
    })
}
