//! Closed-form error bounds and diagnostics.
//!
//! Natural logarithms throughout.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use num_complex::Complex64;

use crate::error::{QksdError, Result};
use crate::krylov::Construction;
use crate::linalg::{hermitian_eigen, hermitian_function, hermitian_norm, spectral_norm, CMatrix};
use crate::sampling::{Part, PlanTarget, ShotPlan};

fn log_2n(n: usize) -> f64 {
    (2.0 * n as f64).ln()
}

/// Expected-norm prefactor `e_Z` with `E‖Δ_Z‖ ≤ e_Z / √M_Z`.
///
/// Toeplitz uses the simplified `2nV√(2 ln 2n)`; see
/// [`toeplitz_error_norm_bound_tight`] for the sharper form.
pub fn error_norm_bound(n: usize, v: f64, construction: Construction) -> f64 {
    let nf = n as f64;
    match construction {
        Construction::Toeplitz => 2.0 * nf * v * (2.0 * log_2n(n)).sqrt(),
        Construction::NonToeplitz => 2.0 * nf * v * (nf * log_2n(n)).sqrt(),
    }
}

/// `2V(√2 n + δ − √2)√(ln 2n)` with `δ = 1` for `H`, `0` for `S`.
pub fn toeplitz_error_norm_bound_tight(n: usize, v: f64, is_h: bool) -> f64 {
    let delta = if is_h { 1.0 } else { 0.0 };
    2.0 * v * (SQRT_2 * n as f64 + delta - SQRT_2) * log_2n(n).sqrt()
}

/// `ε = e_S / √M_S` with the Toeplitz overlap constant.
pub fn optimal_epsilon(n: usize, m_s: u64) -> Result<f64> {
    if m_s == 0 {
        return Err(QksdError::InvalidInput("overlap budget must be positive".into()));
    }
    Ok(error_norm_bound(n, 1.0, Construction::Toeplitz) / (m_s as f64).sqrt())
}

/// Structural coefficient matrix of one sampled configuration.
fn config_matrix(n: usize, target: PlanTarget, row: usize, col: usize, part: Part) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    let phase = match part {
        Part::Real => Complex64::new(1.0, 0.0),
        Part::Imag => Complex64::new(0.0, 1.0),
    };
    let mut place = |k: usize, l: usize| {
        if k == l {
            a[(k, k)] += Complex64::new(1.0, 0.0);
        } else {
            a[(k, l)] += phase;
            a[(l, k)] += phase.conj();
        }
    };
    match target {
        PlanTarget::HNonToeplitz => place(row, col),
        PlanTarget::SToeplitz | PlanTarget::HToeplitz => {
            let offset = col - row;
            for k in 0..(n - offset) {
                place(k, k + offset);
            }
        }
    }
    a
}

fn required_configs(plan: &ShotPlan) -> Vec<(usize, usize, Part)> {
    let n = plan.order();
    let mut keys = Vec::new();
    match plan.target() {
        PlanTarget::SToeplitz | PlanTarget::HToeplitz => {
            if plan.target() == PlanTarget::HToeplitz {
                keys.push((0, 0, Part::Real));
            }
            for k in 1..n {
                keys.push((0, k, Part::Real));
                keys.push((0, k, Part::Imag));
            }
        }
        PlanTarget::HNonToeplitz => {
            for k in 0..n {
                keys.push((k, k, Part::Real));
                for l in (k + 1)..n {
                    keys.push((k, l, Part::Real));
                    keys.push((k, l, Part::Imag));
                }
            }
        }
    }
    keys
}

/// Worst-case variance of one configuration's estimate.
///
/// Off-diagonal: `V² Σ_j w_j²/m_j` with `w_j = β_j/Σβ`; the real diagonal
/// carries an extra factor 2. Infinite when a weighted fragment has no shots.
pub fn config_variance(plan: &ShotPlan, row: usize, col: usize, part: Part, v: f64) -> f64 {
    let Some(config) = plan.config(row, col, part) else {
        return f64::INFINITY;
    };
    let weights = plan.weights();
    let total: f64 = weights.iter().sum();
    let mut sum = 0.0;
    for (w, &m) in weights.iter().zip(&config.fragments) {
        if m == 0 {
            return f64::INFINITY;
        }
        sum += (w / total).powi(2) / m as f64;
    }
    let factor = if row == col { 2.0 } else { 1.0 };
    factor * v * v * sum
}

/// Matrix variance statistic `‖Σ_c σ_c² A_c²‖` of the plan's error matrix.
pub fn variance_statistic(plan: &ShotPlan, v: f64) -> f64 {
    let n = plan.order();
    let mut acc = CMatrix::zeros(n, n);
    for (row, col, part) in required_configs(plan) {
        let sigma2 = config_variance(plan, row, col, part, v);
        if !sigma2.is_finite() {
            return f64::INFINITY;
        }
        let a = config_matrix(n, plan.target(), row, col, part);
        acc += (&a * &a) * Complex64::new(sigma2, 0.0);
    }
    hermitian_norm(&acc)
}

/// `√(2 v ln 2n)`, the expected-norm bound implied by a variance statistic.
pub fn expected_norm_from_variance(v_stat: f64, n: usize) -> f64 {
    (2.0 * v_stat * log_2n(n)).sqrt()
}

/// Probability that `‖Δ‖` exceeds `(1+κ)` times its expectation bound.
pub fn concentration_tail(n: usize, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || n == 0 {
        return Err(QksdError::InvalidInput(format!("need κ > 0 and n ≥ 1 (κ={kappa}, n={n})")));
    }
    let exponent = (1.0 + 1.0 / kappa).powi(-2);
    Ok((1.0 / (2.0 * n as f64)).powf(exponent))
}

/// Empirical `κ = e_Z/(√M · mean‖Δ_Z‖) − 1`.
pub fn kappa_estimate(e_z: f64, budget: u64, mean_norm: f64) -> f64 {
    e_z / ((budget as f64).sqrt() * mean_norm) - 1.0
}

/// `(1+E₀²) asin(√2 n_ε (e_H+e_S)/(d₀√M))`; `None` when the argument exceeds 1.
pub fn energy_error_bound(n_eps: usize, e_h: f64, e_s: f64, budget: u64, d0: f64, e0: f64) -> Option<f64> {
    let arg = SQRT_2 * n_eps as f64 * (e_h + e_s) / (d0 * (budget as f64).sqrt());
    (arg <= 1.0).then(|| (1.0 + e0 * e0) * arg.asin())
}

/// Eigenangle bound `asin(n_ε χ / d₀)`; `None` when the argument exceeds 1.
pub fn eigenangle_bound(n_eps: usize, chi: f64, d0: f64) -> Option<f64> {
    let arg = n_eps as f64 * chi / d0;
    (arg <= 1.0).then(|| arg.asin())
}

/// Small-perturbation condition `√2 n_ε χ ≤ λ_min(B)`.
pub fn small_perturbation_holds(n_eps: usize, chi: f64, b_min: f64) -> bool {
    SQRT_2 * n_eps as f64 * chi <= b_min
}

/// Gap condition `|atan E₁ − atan E₀| ≥ asin(n_ε χ / λ_min(B))`.
pub fn gap_condition_holds(n_eps: usize, chi: f64, b_min: f64, e0: f64, e1: f64) -> bool {
    let arg = n_eps as f64 * chi / b_min;
    arg <= 1.0 && (e1.atan() - e0.atan()).abs() >= arg.asin()
}

/// Upper bound `ε^{-1}(E₀² + 1)^{-1/2}` on `d₀^{-1}` after thresholding at `ε`.
pub fn d0_upper(epsilon: f64, e0: f64) -> f64 {
    1.0 / (epsilon * (e0 * e0 + 1.0).sqrt())
}

/// Weyl-type relative eigenvalue perturbation bound for an invertible `S`.
/// `None` when `‖S^{-1}ΔS‖ ≥ 1` or `S` is singular.
pub fn weyl_relative_bound(h: &CMatrix, s: &CMatrix, dh: &CMatrix, ds: &CMatrix) -> Option<f64> {
    let eig = hermitian_eigen(s);
    let s_min = eig.values.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if !(s_min > 0.0) {
        return None;
    }
    let s_inv = hermitian_function(&eig, |x| Complex64::new(1.0 / x, 0.0));
    let s_inv_norm = 1.0 / s_min;
    let lead = spectral_norm(&(&s_inv * ds));
    if lead >= 1.0 {
        return None;
    }
    let h_norm = spectral_norm(h);
    let s_norm = spectral_norm(s);
    let cond = s_norm * s_inv_norm;
    let h_term = if h_norm > 0.0 { spectral_norm(dh) / h_norm } else { 0.0 };
    Some(h_norm * s_inv_norm / (1.0 - lead) * (cond * spectral_norm(ds) / s_norm + h_term))
}

/// Trotter depth scaling `N_Γ Δt² (‖H‖/‖H‖_β) √(n³ M_H)` with unit constant.
///
/// A scaling diagnostic only; the `1/ln n` factor of the asymptotic form is
/// dropped so the expression stays finite at `n = 1`.
pub fn trotter_depth_threshold(
    n_gamma: usize,
    dt: f64,
    h_norm: f64,
    beta_norm: f64,
    n: usize,
    m_h: u64,
) -> f64 {
    let nf = n as f64;
    n_gamma as f64 * dt * dt * (h_norm / beta_norm) * (nf.powi(3) * m_h as f64).sqrt()
}

/// Parameters of the `χ` bound under the thresholding assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiBoundParams {
    pub alpha: f64,
    pub mu: f64,
    pub rho: f64,
}

/// `3(2+μ)n³(1+1/ρ)(‖S‖/ε)^α ‖ΔS‖ + ‖ΔH‖`.
pub fn thresholded_chi_bound(
    n: usize,
    params: ChiBoundParams,
    s_norm: f64,
    epsilon: f64,
    ds_norm: f64,
    dh_norm: f64,
) -> f64 {
    let nf = n as f64;
    3.0 * (2.0 + params.mu)
        * nf.powi(3)
        * (1.0 + 1.0 / params.rho)
        * (s_norm / epsilon).powf(params.alpha)
        * ds_norm
        + dh_norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assumption {
    Holds,
    Violated,
    Unknown,
}

impl Assumption {
    pub fn from_flag(flag: Option<bool>) -> Self {
        match flag {
            Some(true) => Assumption::Holds,
            Some(false) => Assumption::Violated,
            None => Assumption::Unknown,
        }
    }
}

/// Inputs for a full [`BoundReport`].
#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub n: usize,
    pub construction: Construction,
    pub beta_norm: f64,
    pub h_norm: f64,
    pub budget: u64,
    pub h_plan: &'a ShotPlan,
    pub s_plan: Option<&'a ShotPlan>,
    pub kappa: f64,
    pub n_eps: usize,
    pub d0: f64,
    pub e0: f64,
    pub dt: f64,
    pub n_gamma: usize,
    /// `‖Δ_H‖, ‖Δ_S‖` and `χ, η` of one trial when available.
    pub delta_norms: Option<(f64, f64)>,
    pub chi_eta: Option<(f64, f64)>,
    pub exact_n_eps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub e_h: f64,
    pub e_s: f64,
    pub epsilon_opt: f64,
    pub v_stat: f64,
    pub tail_prob: f64,
    pub energy_error_bound: Option<f64>,
    pub d0_upper: f64,
    pub trotter_depth_threshold: f64,
    pub assumptions: BTreeMap<&'static str, Assumption>,
}

impl BoundReport {
    /// True when every recorded assumption holds.
    pub fn qualifies(&self) -> bool {
        self.assumptions.values().all(|a| *a == Assumption::Holds)
    }
}

pub fn bound_report(inputs: &ReportInputs<'_>) -> Result<BoundReport> {
    let n = inputs.n;
    let e_h = error_norm_bound(n, inputs.beta_norm, inputs.construction);
    let e_s = error_norm_bound(n, 1.0, Construction::Toeplitz);
    let m_s = inputs.s_plan.map_or(0, ShotPlan::budget);
    let m_h = inputs.h_plan.budget();
    let epsilon_opt = if m_s > 0 { optimal_epsilon(n, m_s)? } else { 0.0 };
    let v_stat = variance_statistic(inputs.h_plan, inputs.beta_norm);

    let mut assumptions = BTreeMap::new();
    let (dh_ok, ds_ok) = match inputs.delta_norms {
        Some((dh, ds)) => (
            Some(dh < e_h / (m_h as f64).sqrt()),
            Some(m_s > 0 && ds < e_s / (m_s as f64).sqrt()),
        ),
        None => (None, None),
    };
    assumptions.insert("delta_h_within_expectation", Assumption::from_flag(dh_ok));
    assumptions.insert("delta_s_within_expectation", Assumption::from_flag(ds_ok));
    assumptions.insert(
        "chi_le_eta",
        Assumption::from_flag(inputs.chi_eta.map(|(chi, eta)| chi <= eta)),
    );
    assumptions.insert(
        "matched_n_eps",
        Assumption::from_flag(inputs.exact_n_eps.map(|k| k == inputs.n_eps)),
    );

    Ok(BoundReport {
        e_h,
        e_s,
        epsilon_opt,
        v_stat,
        tail_prob: concentration_tail(n, inputs.kappa)?,
        energy_error_bound: energy_error_bound(inputs.n_eps, e_h, e_s, inputs.budget, inputs.d0, inputs.e0),
        d0_upper: if epsilon_opt > 0.0 { d0_upper(epsilon_opt, inputs.e0) } else { f64::INFINITY },
        trotter_depth_threshold: trotter_depth_threshold(
            inputs.n_gamma,
            inputs.dt,
            inputs.h_norm,
            inputs.beta_norm,
            n,
            m_h,
        ),
        assumptions,
    })
}
