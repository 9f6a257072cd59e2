//! Shot allocation across Hadamard-test configurations and fragments.

use std::f64::consts::SQRT_2;

use crate::error::{QksdError, Result};
use crate::krylov::Construction;

/// Which matrix a plan samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanTarget {
    SToeplitz,
    HToeplitz,
    HNonToeplitz,
}

/// Real or imaginary Hadamard-test configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Real,
    Imag,
}

/// Shots for one `(element, part)` configuration, split over fragments.
///
/// Toeplitz elements are keyed `(0, k)`; non-Toeplitz elements `(k, l)` with `k ≤ l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigShots {
    pub row: usize,
    pub col: usize,
    pub part: Part,
    pub fragments: Vec<u64>,
}

impl ConfigShots {
    pub fn total(&self) -> u64 {
        self.fragments.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotPlan {
    target: PlanTarget,
    order: usize,
    budget: u64,
    weights: Vec<f64>,
    configs: Vec<ConfigShots>,
}

impl ShotPlan {
    pub fn target(&self) -> PlanTarget {
        self.target
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Fragment weights `β_j` used for the split (`[1]` for `S`).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn configs(&self) -> &[ConfigShots] {
        &self.configs
    }

    pub fn total(&self) -> u64 {
        self.configs.iter().map(ConfigShots::total).sum()
    }

    pub fn config(&self, row: usize, col: usize, part: Part) -> Option<&ConfigShots> {
        self.configs
            .iter()
            .find(|c| c.row == row && c.col == col && c.part == part)
    }

    /// Shots of one configuration summed over fragments; 0 if absent.
    pub fn shots(&self, row: usize, col: usize, part: Part) -> u64 {
        self.config(row, col, part).map_or(0, ConfigShots::total)
    }

    /// Builds a plan from explicit per-configuration totals, splitting each
    /// over fragments proportionally to `weights`.
    pub fn from_config_totals(
        target: PlanTarget,
        order: usize,
        weights: &[f64],
        totals: Vec<((usize, usize, Part), u64)>,
    ) -> Result<Self> {
        check_weights(weights)?;
        let configs: Vec<ConfigShots> = totals
            .into_iter()
            .map(|((row, col, part), m)| ConfigShots {
                row,
                col,
                part,
                fragments: largest_remainder(m, weights),
            })
            .collect();
        let budget = configs.iter().map(ConfigShots::total).sum();
        Ok(Self {
            target,
            order,
            budget,
            weights: weights.to_vec(),
            configs,
        })
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(QksdError::InvalidInput(
            "fragment weights must be positive and non-empty".into(),
        ));
    }
    Ok(())
}

/// Integer apportionment of `total` proportional to `weights`; ties go to the
/// earlier index.
pub fn largest_remainder(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    let ideal: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<u64> = ideal.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - ideal[a].floor();
        let rb = ideal[b] - ideal[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Minimax-optimal Toeplitz allocation.
///
/// For `H` the diagonal gets `M/(√2(n−1)+1)` real shots and each off-diagonal
/// configuration `M/(2(n−1)+√2)`; for `S` the diagonal is exact and the
/// off-diagonal configurations share `M` evenly. `betas` is ignored for `S`.
pub fn allocate_toeplitz(budget: u64, n: usize, is_h: bool, betas: &[f64]) -> Result<ShotPlan> {
    if n == 0 {
        return Err(QksdError::InvalidSize("Krylov order must be positive".into()));
    }
    let required = 2 * n as u64;
    if budget < required {
        return Err(QksdError::InfeasibleBudget { budget, required });
    }
    if !is_h && n == 1 {
        return Err(QksdError::InvalidInput(
            "an order-one overlap matrix has nothing to sample".into(),
        ));
    }
    let delta = if is_h { 1.0 } else { 0.0 };
    let m = budget as f64;
    let off = m / (2.0 * (n - 1) as f64 + SQRT_2 * delta);
    let diag = m * delta / (SQRT_2 * (n - 1) as f64 + 1.0);

    let mut keys = Vec::new();
    let mut ideal = Vec::new();
    if is_h {
        keys.push((0, 0, Part::Real));
        ideal.push(diag);
    }
    for k in 1..n {
        for part in [Part::Real, Part::Imag] {
            keys.push((0, k, part));
            ideal.push(off);
        }
    }
    let totals = largest_remainder(budget, &ideal);
    let (target, weights) = if is_h {
        (PlanTarget::HToeplitz, betas.to_vec())
    } else {
        (PlanTarget::SToeplitz, vec![1.0])
    };
    ShotPlan::from_config_totals(target, n, &weights, keys.into_iter().zip(totals).collect())
}

/// Minimax-optimal non-Toeplitz allocation: `M/n²` for every diagonal real
/// and every off-diagonal real and imaginary configuration.
pub fn allocate_nontoeplitz(budget: u64, n: usize, betas: &[f64]) -> Result<ShotPlan> {
    if n == 0 {
        return Err(QksdError::InvalidSize("Krylov order must be positive".into()));
    }
    let required = (n * n) as u64;
    if budget < required {
        return Err(QksdError::InfeasibleBudget { budget, required });
    }
    let mut keys = Vec::with_capacity(n * n);
    for k in 0..n {
        keys.push((k, k, Part::Real));
        for l in (k + 1)..n {
            keys.push((k, l, Part::Real));
            keys.push((k, l, Part::Imag));
        }
    }
    let totals = largest_remainder(budget, &vec![1.0; keys.len()]);
    ShotPlan::from_config_totals(
        PlanTarget::HNonToeplitz,
        n,
        betas,
        keys.into_iter().zip(totals).collect(),
    )
}

/// Shot plan for `H` in the given construction.
pub fn allocate_h(budget: u64, n: usize, construction: Construction, betas: &[f64]) -> Result<ShotPlan> {
    match construction {
        Construction::Toeplitz => allocate_toeplitz(budget, n, true, betas),
        Construction::NonToeplitz => allocate_nontoeplitz(budget, n, betas),
    }
}

/// Error-constant prefactors `(e_H, e_S)` used to split a total budget.
pub fn split_constants(n: usize, construction: Construction, beta_norm: f64) -> (f64, f64) {
    let nf = n as f64;
    let log_term = (2.0 * nf).ln().sqrt();
    let e_s = 2.0 * SQRT_2 * nf * log_term;
    let e_h = match construction {
        Construction::Toeplitz => 2.0 * SQRT_2 * beta_norm * nf * log_term,
        Construction::NonToeplitz => 2.0 * beta_norm * nf.powf(1.5) * log_term,
    };
    (e_h, e_s)
}

/// `(M_H, M_S)` with `M_H/M_S = e_H/e_S` and `M_H + M_S = M`.
pub fn split_budget(
    budget: u64,
    n: usize,
    construction: Construction,
    beta_norm: f64,
) -> Result<(u64, u64)> {
    if budget < 2 {
        return Err(QksdError::InfeasibleBudget { budget, required: 2 });
    }
    if n == 0 || !(beta_norm.is_finite() && beta_norm > 0.0) {
        return Err(QksdError::InvalidInput(format!(
            "split needs n > 0 and a positive norm (n={n}, norm={beta_norm})"
        )));
    }
    // n = 1 makes log 2n positive, so the ratio is always defined
    let (e_h, e_s) = split_constants(n, construction, beta_norm);
    let m_h = (budget as f64 * e_h / (e_h + e_s)).round() as u64;
    let m_h = m_h.clamp(1, budget - 1);
    Ok((m_h, budget - m_h))
}
