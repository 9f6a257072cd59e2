//! Shared experiment state: prepared Hamiltonians, budget cells and trials.

use std::collections::BTreeMap;

use crate::bounds::{
    thresholded_chi_bound, eigenangle_bound, error_norm_bound, gap_condition_holds,
    optimal_epsilon, small_perturbation_holds, energy_error_bound, weyl_relative_bound, Assumption,
    ChiBoundParams,
};
use crate::error::{QksdError, Result};
use crate::evolution::{hartree_fock_state, sector_ground_energy, Filling};
use crate::gevp::{
    basis_thresholding, conjugated_deltas, perturbation_magnitude, solve_gevp, GevpSolution,
    ThresholdResult,
};
use crate::hamiltonian::{build_hubbard_1d, sorted_insertion_partition, PauliSum, UnitaryPartition};
use crate::krylov::{
    default_time_step, Construction, KrylovConfig, KrylovPair, KrylovProblem, PropagatorSource,
};
use crate::linalg::{hermitian_eigenvalues, spectral_norm, CMatrix};
use crate::sampling::{
    allocate_h, allocate_toeplitz, decayed_truth, rng::mix, sample_pair, split_budget,
    NoiseSpec, ShotPlan,
};

use super::config::ExperimentConfig;

/// Threshold used for "unthresholded" exact energies; only discards the
/// numerically null directions of the exact overlap matrix.
pub const NUMERICAL_RANK_CUTOFF: f64 = 1e-10;

/// One Hubbard parameter set with its Krylov problems.
#[derive(Debug)]
pub struct PreparedSystem {
    pub index: usize,
    pub hopping: f64,
    pub onsite: f64,
    pub sites: usize,
    pub filling: Filling,
    pub hamiltonian: PauliSum,
    pub partition: UnitaryPartition,
    pub h_norm: f64,
    pub e0_sector: f64,
    pub dt: f64,
    pub problems: BTreeMap<usize, KrylovProblem>,
}

impl PreparedSystem {
    pub fn prepare(cfg: &ExperimentConfig, index: usize, orders: &[usize]) -> Result<Self> {
        let [hopping, onsite] = cfg.parameters()[index];
        let filling = cfg.filling();
        let hamiltonian = build_hubbard_1d(cfg.sites, hopping, onsite)?;
        let partition = sorted_insertion_partition(&hamiltonian)?;
        let h_dense = hamiltonian.to_dense()?;
        let e0_sector = sector_ground_energy(&h_dense, cfg.sites, filling)?;
        let reference = hartree_fock_state(cfg.sites, hopping, filling)?;
        let dt = match cfg.time_step {
            Some(dt) => dt,
            None => default_time_step(&partition)?,
        };
        let source = match cfg.trotter_steps {
            Some(steps) => PropagatorSource::Trotter { steps },
            None => PropagatorSource::Exact,
        };
        let spectrum = crate::evolution::Spectrum::from_dense(&h_dense);
        let mut problems = BTreeMap::new();
        for &n in orders {
            if problems.contains_key(&n) {
                continue;
            }
            let config = KrylovConfig::new(n, dt)?;
            let basis =
                crate::krylov::krylov_basis(&hamiltonian, &spectrum, &reference, &config, source)?;
            let problem = KrylovProblem::from_basis(&h_dense, &partition, &basis, config, source)?;
            problems.insert(n, problem);
        }
        Ok(Self {
            index,
            hopping,
            onsite,
            sites: cfg.sites,
            filling,
            h_norm: spectral_norm(&h_dense),
            hamiltonian,
            partition,
            e0_sector,
            dt,
            problems,
        })
    }

    pub fn problem(&self, n: usize) -> &KrylovProblem {
        &self.problems[&n]
    }

    /// Number of non-identity Pauli terms.
    pub fn n_gamma(&self) -> usize {
        self.hamiltonian.non_identity_terms().count()
    }
}

/// Prepares every parameter set of a config for the given orders.
pub fn prepare_systems(cfg: &ExperimentConfig, orders: &[usize]) -> Result<Vec<PreparedSystem>> {
    (0..cfg.parameters().len())
        .map(|i| PreparedSystem::prepare(cfg, i, orders))
        .collect()
}

/// Exact thresholded solution used as the unperturbed reference.
#[derive(Debug, Clone)]
pub struct ExactReference {
    pub threshold: ThresholdResult,
    pub solution: GevpSolution,
}

/// A `(system, n, M, construction)` combination with its shot plans.
#[derive(Debug)]
pub struct Cell<'a> {
    pub system: &'a PreparedSystem,
    pub problem: &'a KrylovProblem,
    pub n: usize,
    pub budget: u64,
    pub construction: Construction,
    pub m_h: u64,
    pub m_s: u64,
    pub h_plan: ShotPlan,
    pub s_plan: Option<ShotPlan>,
    pub epsilon: f64,
    pub truth: KrylovPair,
    pub noise: NoiseSpec,
    pub e_h: f64,
    pub e_s: f64,
    /// Exact pair thresholded at `epsilon`; `None` when nothing survives.
    pub exact: Option<ExactReference>,
    /// Exact energy with only numerically null directions removed.
    pub e0_krylov: Option<f64>,
    pub rho: f64,
}

fn construction_tag(c: Construction) -> u64 {
    match c {
        Construction::Toeplitz => 0,
        Construction::NonToeplitz => 1,
    }
}

impl<'a> Cell<'a> {
    pub fn new(
        cfg: &ExperimentConfig,
        system: &'a PreparedSystem,
        n: usize,
        budget: u64,
        construction: Construction,
    ) -> Result<Self> {
        let problem = system.problem(n);
        let beta_norm = system.partition.beta_norm();
        let (m_h, m_s) = split_budget(budget, n, construction, beta_norm)?;
        let h_plan = allocate_h(m_h, n, construction, &problem.betas)?;
        let s_plan = if n > 1 { Some(allocate_toeplitz(m_s, n, false, &[])?) } else { None };
        let epsilon = optimal_epsilon(n, m_s)?;
        let truth = decayed_truth(problem, construction, cfg.hardware_lambda)?;
        let seed = mix(&[
            cfg.seed,
            system.index as u64,
            n as u64,
            budget,
            construction_tag(construction),
        ]);
        let noise = NoiseSpec::new(cfg.mode, cfg.hardware_lambda, seed)?;
        let exact = exact_reference(&truth, epsilon)?;
        let e0_krylov = exact_reference(&truth, NUMERICAL_RANK_CUTOFF)?
            .map(|r| r.solution.ground_energy());
        Ok(Self {
            system,
            problem,
            n,
            budget,
            construction,
            m_h,
            m_s,
            h_plan,
            s_plan,
            epsilon,
            truth,
            noise,
            e_h: error_norm_bound(n, beta_norm, construction),
            e_s: error_norm_bound(n, 1.0, Construction::Toeplitz),
            exact,
            e0_krylov,
            rho: cfg.rho,
        })
    }

    pub fn bound_h(&self) -> f64 {
        self.e_h / (self.m_h as f64).sqrt()
    }

    pub fn bound_s(&self) -> f64 {
        self.e_s / (self.m_s as f64).sqrt()
    }

    pub fn sample(&self, trial: u64) -> Result<KrylovPair> {
        Ok(sample_pair(
            self.problem,
            self.construction,
            &self.h_plan,
            self.s_plan.as_ref(),
            &self.noise,
            trial,
        )?
        .pair)
    }
}

/// Thresholds and solves; `Ok(None)` when the threshold removes everything
/// or leaves an ill-posed pencil.
pub fn exact_reference(pair: &KrylovPair, epsilon: f64) -> Result<Option<ExactReference>> {
    let threshold = match basis_thresholding(&pair.h, &pair.s, epsilon) {
        Ok(t) => t,
        Err(QksdError::EmptyBasis { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    match solve_gevp(&threshold.a, &threshold.b) {
        Ok(solution) => Ok(Some(ExactReference { threshold, solution })),
        Err(QksdError::IllPosed(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per-trial measurements; `None` marks a not-applicable value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub param_set: usize,
    pub hopping: f64,
    pub onsite: f64,
    pub n: usize,
    pub construction: Construction,
    pub budget: u64,
    pub m_h: u64,
    pub m_s: u64,
    pub trial: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub n_eps: Option<usize>,
    pub n_eps_exact: Option<usize>,
    pub norm_h: f64,
    pub norm_s: f64,
    pub eta: f64,
    pub chi: Option<f64>,
    pub e0_sector: f64,
    pub e0_krylov: Option<f64>,
    pub e0_thresholded: Option<f64>,
    pub e0_noisy: Option<f64>,
    /// `|Ẽ0 − E0_sector| / |E0_sector|`.
    pub rel_error: Option<f64>,
    /// `|Ẽ0 − E0^(n→n_ε)|`.
    pub energy_error: Option<f64>,
    pub angle_error: Option<f64>,
    pub d0: Option<f64>,
    pub cond_s: Option<f64>,
    pub bound_h: f64,
    pub bound_s: f64,
    pub angle_error_bound: Option<f64>,
    pub energy_error_bound: Option<f64>,
    pub weyl_rel_bound: Option<f64>,
    pub chi_rhs: Option<f64>,
    pub small_perturbation: Assumption,
    pub gap_condition: Assumption,
    pub delta_h_within: Assumption,
    pub delta_s_within: Assumption,
    pub chi_le_eta: Assumption,
    pub matched_n_eps: Assumption,
    pub angle_bound_satisfied: Assumption,
    pub energy_bound_satisfied: Assumption,
}

impl TrialRecord {
    pub fn angle_bound_qualifies(&self) -> bool {
        self.matched_n_eps == Assumption::Holds
            && self.small_perturbation == Assumption::Holds
            && self.gap_condition == Assumption::Holds
            && self.angle_error_bound.is_some()
    }

    pub fn energy_bound_qualifies(&self) -> bool {
        self.angle_bound_qualifies()
            && self.delta_h_within == Assumption::Holds
            && self.delta_s_within == Assumption::Holds
            && self.chi_le_eta == Assumption::Holds
            && self.energy_error_bound.is_some()
    }
}

/// Slack for floating-point comparisons against exact inequalities.
const FLOAT_SLACK: f64 = 1e-9;

fn flag(b: bool) -> Assumption {
    Assumption::from_flag(Some(b))
}

/// Samples one trial of a cell and evaluates every diagnostic.
pub fn evaluate_trial(cell: &Cell<'_>, trial: u64) -> Result<TrialRecord> {
    let noisy = cell.sample(trial)?;
    let dh: CMatrix = &noisy.h - &cell.truth.h;
    let ds: CMatrix = &noisy.s - &cell.truth.s;
    let norm_h = spectral_norm(&dh);
    let norm_s = spectral_norm(&ds);
    let eta = perturbation_magnitude(&dh, &ds);
    let e0_sector = cell.system.e0_sector;

    let perturbed = exact_reference(&noisy, cell.epsilon)?;
    let e0_noisy = perturbed.as_ref().map(|r| r.solution.ground_energy());
    let exact = cell.exact.as_ref();
    let e0_thresholded = exact.map(|r| r.solution.ground_energy());

    let deltas = match (exact, perturbed.as_ref()) {
        (Some(e), Some(p)) => conjugated_deltas(&e.threshold, &p.threshold),
        _ => None,
    };
    let chi = deltas.as_ref().map(|(da, db)| perturbation_magnitude(da, db));
    let matched = match (exact, perturbed.as_ref()) {
        (Some(e), Some(p)) => flag(e.threshold.n_eps == p.threshold.n_eps),
        _ => Assumption::Unknown,
    };

    let mut small_perturbation = Assumption::Unknown;
    let mut gap_condition = Assumption::Unknown;
    let mut angle_error_bound = None;
    let mut energy_bound = None;
    let mut weyl_rel = None;
    let mut chi_rhs = None;
    let mut angle_error = None;
    let mut energy_error = None;
    if let Some(e) = exact {
        let n_eps = e.threshold.n_eps;
        let b_min = hermitian_eigenvalues(&e.threshold.b)[0];
        let e0 = e.solution.ground_energy();
        energy_bound = energy_error_bound(n_eps, cell.e_h, cell.e_s, cell.budget, e.solution.d0, e0);
        let mu = e.solution.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        chi_rhs = Some(thresholded_chi_bound(
            cell.n,
            ChiBoundParams { alpha: 0.5, mu, rho: cell.rho },
            spectral_norm(&cell.truth.s),
            cell.epsilon,
            norm_s,
            norm_h,
        ));
        if let Some(chi) = chi {
            small_perturbation = flag(small_perturbation_holds(n_eps, chi, b_min));
            gap_condition = flag(match e.solution.eigenvalues.get(1) {
                Some(&e1) => gap_condition_holds(n_eps, chi, b_min, e0, e1),
                None => true,
            });
            angle_error_bound = eigenangle_bound(n_eps, chi, e.solution.d0);
        }
        if let Some((da, db)) = &deltas {
            weyl_rel = weyl_relative_bound(&e.threshold.a, &e.threshold.b, da, db);
        }
        if let Some(en) = e0_noisy {
            angle_error = Some((en.atan() - e0.atan()).abs());
            energy_error = Some((en - e0).abs());
        }
    }

    let delta_h_within = flag(norm_h < cell.bound_h());
    let delta_s_within = flag(norm_s < cell.bound_s());
    let chi_le_eta = chi.map_or(Assumption::Unknown, |c| flag(c <= eta));

    let mut record = TrialRecord {
        param_set: cell.system.index,
        hopping: cell.system.hopping,
        onsite: cell.system.onsite,
        n: cell.n,
        construction: cell.construction,
        budget: cell.budget,
        m_h: cell.m_h,
        m_s: cell.m_s,
        trial,
        seed: cell.noise.seed,
        epsilon: cell.epsilon,
        n_eps: perturbed.as_ref().map(|r| r.threshold.n_eps),
        n_eps_exact: exact.map(|r| r.threshold.n_eps),
        norm_h,
        norm_s,
        eta,
        chi,
        e0_sector,
        e0_krylov: cell.e0_krylov,
        e0_thresholded,
        e0_noisy,
        rel_error: e0_noisy.map(|e| (e - e0_sector).abs() / e0_sector.abs()),
        energy_error,
        angle_error,
        d0: exact.map(|r| r.solution.d0),
        cond_s: perturbed.as_ref().map(|r| r.solution.cond_s),
        bound_h: cell.bound_h(),
        bound_s: cell.bound_s(),
        angle_error_bound,
        energy_error_bound: energy_bound,
        weyl_rel_bound: weyl_rel,
        chi_rhs,
        small_perturbation,
        gap_condition,
        delta_h_within,
        delta_s_within,
        chi_le_eta,
        matched_n_eps: matched,
        angle_bound_satisfied: Assumption::Unknown,
        energy_bound_satisfied: Assumption::Unknown,
    };
    if record.angle_bound_qualifies() {
        record.angle_bound_satisfied =
            flag(angle_error.unwrap_or(f64::INFINITY) <= angle_error_bound.unwrap() + FLOAT_SLACK);
    }
    if record.energy_bound_qualifies() {
        record.energy_bound_satisfied =
            flag(energy_error.unwrap_or(f64::INFINITY) <= energy_bound.unwrap() + FLOAT_SLACK);
    }
    Ok(record)
}
