//! Experiment drivers producing trial records and per-cell summaries.

use rayon::prelude::*;

use crate::bounds::{concentration_tail, d0_upper, kappa_estimate, trotter_depth_threshold, variance_statistic, Assumption};
use crate::error::{QksdError, Result};
use crate::gevp::{solve_gevp, threshold_top_k};
use crate::krylov::{Construction, KrylovPair};
use crate::linalg::hermitian_eigenvalues;

use super::config::ExperimentConfig;
use super::records::{fmt_bool, fmt_f64, fmt_flag, fmt_opt, fmt_opt_usize, Columns};
use super::system::{evaluate_trial, prepare_systems, Cell, PreparedSystem, TrialRecord, NUMERICAL_RANK_CUTOFF};

/// Available experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driver {
    ErrorNorms,
    SingularSpectrum,
    ThresholdSweep,
    OptimalThreshold,
    PerturbationBound,
}

impl Driver {
    pub const ALL: [Driver; 5] = [
        Driver::ErrorNorms,
        Driver::SingularSpectrum,
        Driver::ThresholdSweep,
        Driver::OptimalThreshold,
        Driver::PerturbationBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Driver::ErrorNorms => "error-norms",
            Driver::SingularSpectrum => "singular-spectrum",
            Driver::ThresholdSweep => "threshold-sweep",
            Driver::OptimalThreshold => "optimal-threshold",
            Driver::PerturbationBound => "perturbation-bound",
        }
    }
}

impl std::str::FromStr for Driver {
    type Err = QksdError;

    fn from_str(s: &str) -> Result<Self> {
        Driver::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| QksdError::Config(format!("unknown driver {s:?}")))
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn rms(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt())
}

fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    })
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

fn fraction(count: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| count as f64 / total as f64)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if xs.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Slope of `ln(mean‖Δ‖·√M/√ln 2n)` against `ln n`.
///
/// Dividing out `√ln 2n` and the per-cell budget leaves the power of `n`.
pub fn normalized_norm_slope(ns: &[usize], means: &[f64], budgets: &[u64]) -> Option<f64> {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns
        .iter()
        .zip(means)
        .zip(budgets)
        .map(|((&n, m), &b)| (m * (b as f64).sqrt() / (2.0 * n as f64).ln().sqrt()).ln())
        .collect();
    fit_slope(&xs, &ys)
}

fn run_trials<'a, T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send + 'a,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

/// Aggregate of one `(system, n, M, construction)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub param_set: usize,
    pub hopping: f64,
    pub onsite: f64,
    pub n: usize,
    pub construction: Construction,
    pub budget: u64,
    pub m_h: Option<u64>,
    pub m_s: Option<u64>,
    /// `None` for a completed cell, otherwise the skip reason.
    pub skipped: Option<String>,
    pub trials: usize,
    pub epsilon: Option<f64>,
    pub mean_norm_h: Option<f64>,
    pub mean_norm_s: Option<f64>,
    pub max_norm_h: Option<f64>,
    pub max_norm_s: Option<f64>,
    pub bound_h: Option<f64>,
    pub bound_s: Option<f64>,
    pub frac_under_h: Option<f64>,
    pub frac_under_s: Option<f64>,
    pub kappa_h: Option<f64>,
    pub kappa_s: Option<f64>,
    pub tail_h: Option<f64>,
    pub tail_s: Option<f64>,
    pub slope_h: Option<f64>,
    pub slope_s: Option<f64>,
    pub v_stat_h: Option<f64>,
    pub v_stat_s: Option<f64>,
    pub e0_sector: f64,
    pub e0_krylov: Option<f64>,
    pub e0_thresholded: Option<f64>,
    pub n_eps_exact: Option<usize>,
    pub mean_n_eps: Option<f64>,
    pub rms_rel_error: Option<f64>,
    pub mean_rel_error: Option<f64>,
    pub median_rel_error: Option<f64>,
    pub failed_trials: usize,
    pub frac_chi_le_eta: Option<f64>,
    pub mean_chi_over_eta: Option<f64>,
    pub angle_bound_qualifying: usize,
    pub angle_bound_satisfied: usize,
    pub energy_bound_qualifying: usize,
    pub energy_bound_satisfied: usize,
    pub energy_bound_not_applicable: usize,
    pub mean_d0_inv: Option<f64>,
    pub d0_upper: Option<f64>,
    pub trotter_depth: Option<f64>,
}

impl CellSummary {
    fn skeleton(system: &PreparedSystem, n: usize, budget: u64, construction: Construction) -> Self {
        Self {
            param_set: system.index,
            hopping: system.hopping,
            onsite: system.onsite,
            n,
            construction,
            budget,
            m_h: None,
            m_s: None,
            skipped: None,
            trials: 0,
            epsilon: None,
            mean_norm_h: None,
            mean_norm_s: None,
            max_norm_h: None,
            max_norm_s: None,
            bound_h: None,
            bound_s: None,
            frac_under_h: None,
            frac_under_s: None,
            kappa_h: None,
            kappa_s: None,
            tail_h: None,
            tail_s: None,
            slope_h: None,
            slope_s: None,
            v_stat_h: None,
            v_stat_s: None,
            e0_sector: system.e0_sector,
            e0_krylov: None,
            e0_thresholded: None,
            n_eps_exact: None,
            mean_n_eps: None,
            rms_rel_error: None,
            mean_rel_error: None,
            median_rel_error: None,
            failed_trials: 0,
            frac_chi_le_eta: None,
            mean_chi_over_eta: None,
            angle_bound_qualifying: 0,
            angle_bound_satisfied: 0,
            energy_bound_qualifying: 0,
            energy_bound_satisfied: 0,
            energy_bound_not_applicable: 0,
            mean_d0_inv: None,
            d0_upper: None,
            trotter_depth: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.skipped.is_none()
    }

    fn summarize(cell: &Cell<'_>, records: &[TrialRecord]) -> Self {
        let mut s = Self::skeleton(cell.system, cell.n, cell.budget, cell.construction);
        let t = records.len();
        let norms_h: Vec<f64> = records.iter().map(|r| r.norm_h).collect();
        let norms_s: Vec<f64> = records.iter().map(|r| r.norm_s).collect();
        let rel: Vec<f64> = records.iter().filter_map(|r| r.rel_error).collect();
        let n_eps: Vec<f64> = records.iter().filter_map(|r| r.n_eps.map(|k| k as f64)).collect();
        let ratios: Vec<f64> = records
            .iter()
            .filter_map(|r| r.chi.map(|c| if r.eta > 0.0 { c / r.eta } else { 0.0 }))
            .collect();
        let d0_inv: Vec<f64> = records.iter().filter_map(|r| r.d0.map(|d| 1.0 / d)).collect();
        let count = |f: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| f(r)).count();

        s.m_h = Some(cell.m_h);
        s.m_s = Some(cell.m_s);
        s.trials = t;
        s.epsilon = Some(cell.epsilon);
        s.mean_norm_h = mean(&norms_h);
        s.mean_norm_s = mean(&norms_s);
        s.max_norm_h = norms_h.iter().copied().reduce(f64::max);
        s.max_norm_s = norms_s.iter().copied().reduce(f64::max);
        s.bound_h = Some(cell.bound_h());
        s.bound_s = Some(cell.bound_s());
        s.frac_under_h = fraction(count(&|r| r.norm_h < r.bound_h), t);
        s.frac_under_s = fraction(count(&|r| r.norm_s < r.bound_s), t);
        s.kappa_h = s.mean_norm_h.filter(|m| *m > 0.0).map(|m| kappa_estimate(cell.e_h, cell.m_h, m));
        s.kappa_s = s.mean_norm_s.filter(|m| *m > 0.0).map(|m| kappa_estimate(cell.e_s, cell.m_s, m));
        s.tail_h = s.kappa_h.and_then(|k| concentration_tail(cell.n, k).ok());
        s.tail_s = s.kappa_s.and_then(|k| concentration_tail(cell.n, k).ok());
        let beta_norm = cell.system.partition.beta_norm();
        s.v_stat_h = Some(variance_statistic(&cell.h_plan, beta_norm));
        s.v_stat_s = cell.s_plan.as_ref().map(|p| variance_statistic(p, 1.0));
        s.e0_krylov = cell.e0_krylov;
        s.e0_thresholded = cell.exact.as_ref().map(|e| e.solution.ground_energy());
        s.n_eps_exact = cell.exact.as_ref().map(|e| e.threshold.n_eps);
        s.mean_n_eps = mean(&n_eps);
        s.rms_rel_error = rms(&rel);
        s.mean_rel_error = mean(&rel);
        s.median_rel_error = median(&rel);
        s.failed_trials = t - rel.len();
        s.frac_chi_le_eta = fraction(count(&|r| r.chi_le_eta == Assumption::Holds), ratios.len());
        s.mean_chi_over_eta = mean(&ratios);
        s.angle_bound_qualifying = count(&|r| r.angle_bound_qualifies());
        s.angle_bound_satisfied = count(&|r| r.angle_bound_satisfied == Assumption::Holds);
        s.energy_bound_qualifying = count(&|r| r.energy_bound_qualifies());
        s.energy_bound_satisfied = count(&|r| r.energy_bound_satisfied == Assumption::Holds);
        s.energy_bound_not_applicable = count(&|r| r.energy_error_bound.is_none());
        s.mean_d0_inv = mean(&d0_inv);
        s.d0_upper = s.e0_thresholded.map(|e0| d0_upper(cell.epsilon, e0));
        s.trotter_depth = Some(trotter_depth_threshold(
            cell.system.n_gamma(),
            cell.system.dt,
            cell.system.h_norm,
            beta_norm,
            cell.n,
            cell.m_h,
        ));
        s
    }
}

/// Records and summaries of an ensemble driver.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<CellSummary>,
}

/// Fails with the first skip reason when no cell could run.
fn require_some_cell(summaries: &[CellSummary], first_error: Option<QksdError>) -> Result<()> {
    if summaries.iter().any(CellSummary::is_ok) {
        return Ok(());
    }
    Err(first_error.unwrap_or_else(|| QksdError::Config("no experiment cells".into())))
}

/// Full ensemble over parameter sets × orders × budgets × constructions.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleRun> {
    cfg.validate()?;
    let systems = prepare_systems(cfg, &cfg.krylov_orders)?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut first_error = None;
    for system in &systems {
        for &construction in &cfg.construction.constructions() {
            for budget in cfg.budgets_u64() {
                for &n in &cfg.krylov_orders {
                    let mut summary = CellSummary::skeleton(system, n, budget, construction);
                    match Cell::new(cfg, system, n, budget, construction) {
                        Ok(cell) => {
                            let cell_records =
                                run_trials(cfg.trials, |t| evaluate_trial(&cell, t))?;
                            summary = CellSummary::summarize(&cell, &cell_records);
                            records.extend(cell_records);
                        }
                        Err(e @ (QksdError::InfeasibleBudget { .. } | QksdError::InvalidInput(_))) => {
                            summary.skipped = Some(e.to_string());
                            first_error.get_or_insert(e);
                        }
                        Err(e) => return Err(e),
                    }
                    summaries.push(summary);
                }
            }
        }
    }
    require_some_cell(&summaries, first_error)?;
    attach_slopes(&mut summaries);
    Ok(EnsembleRun { records, summaries })
}

fn attach_slopes(summaries: &mut [CellSummary]) {
    let keys: Vec<(usize, u64, Construction)> = summaries
        .iter()
        .map(|s| (s.param_set, s.budget, s.construction))
        .collect();
    for key in &keys {
        let group: Vec<usize> = (0..summaries.len())
            .filter(|&i| keys[i] == *key && summaries[i].is_ok())
            .collect();
        let ns: Vec<usize> = group.iter().map(|&i| summaries[i].n).collect();
        let slope = |f: &dyn Fn(&CellSummary) -> Option<(f64, u64)>| {
            let points: Option<Vec<(f64, u64)>> = group.iter().map(|&i| f(&summaries[i])).collect();
            let points = points.filter(|p| p.iter().all(|(m, _)| *m > 0.0))?;
            let (means, budgets): (Vec<f64>, Vec<u64>) = points.into_iter().unzip();
            normalized_norm_slope(&ns, &means, &budgets)
        };
        let slope_h = slope(&|s| s.mean_norm_h.zip(s.m_h));
        let slope_s = slope(&|s| s.mean_norm_s.zip(s.m_s));
        for &i in &group {
            summaries[i].slope_h = slope_h;
            summaries[i].slope_s = slope_s;
        }
    }
}

impl Columns for TrialRecord {
    fn value(&self, column: &str) -> String {
        match column {
            "param_set" => self.param_set.to_string(),
            "hopping" => fmt_f64(self.hopping),
            "onsite" => fmt_f64(self.onsite),
            "n" => self.n.to_string(),
            "construction" => self.construction.label().into(),
            "budget" => self.budget.to_string(),
            "m_h" => self.m_h.to_string(),
            "m_s" => self.m_s.to_string(),
            "trial" => self.trial.to_string(),
            "seed" => self.seed.to_string(),
            "epsilon" => fmt_f64(self.epsilon),
            "n_eps" => fmt_opt_usize(self.n_eps),
            "n_eps_exact" => fmt_opt_usize(self.n_eps_exact),
            "norm_h" => fmt_f64(self.norm_h),
            "norm_s" => fmt_f64(self.norm_s),
            "eta" => fmt_f64(self.eta),
            "chi" => fmt_opt(self.chi),
            "e0_sector" => fmt_f64(self.e0_sector),
            "e0_krylov" => fmt_opt(self.e0_krylov),
            "e0_thresholded" => fmt_opt(self.e0_thresholded),
            "e0_noisy" => fmt_opt(self.e0_noisy),
            "rel_error" => fmt_opt(self.rel_error),
            "energy_error" => fmt_opt(self.energy_error),
            "angle_error" => fmt_opt(self.angle_error),
            "d0" => fmt_opt(self.d0),
            "d0_inv" => fmt_opt(self.d0.map(|d| 1.0 / d)),
            "cond_s" => fmt_opt(self.cond_s),
            "bound_h" => fmt_f64(self.bound_h),
            "bound_s" => fmt_f64(self.bound_s),
            "under_bound_h" => fmt_bool(self.norm_h < self.bound_h),
            "under_bound_s" => fmt_bool(self.norm_s < self.bound_s),
            "angle_error_bound" => fmt_opt(self.angle_error_bound),
            "energy_error_bound" => fmt_opt(self.energy_error_bound),
            "weyl_rel_bound" => fmt_opt(self.weyl_rel_bound),
            "chi_rhs" => fmt_opt(self.chi_rhs),
            "small_perturbation" => fmt_flag(self.small_perturbation),
            "gap_condition" => fmt_flag(self.gap_condition),
            "delta_h_within" => fmt_flag(self.delta_h_within),
            "delta_s_within" => fmt_flag(self.delta_s_within),
            "chi_le_eta" => fmt_flag(self.chi_le_eta),
            "matched_n_eps" => fmt_flag(self.matched_n_eps),
            "angle_bound_satisfied" => fmt_flag(self.angle_bound_satisfied),
            "energy_bound_satisfied" => fmt_flag(self.energy_bound_satisfied),
            other => panic!("unknown trial column {other}"),
        }
    }
}

impl Columns for CellSummary {
    fn value(&self, column: &str) -> String {
        let u = |x: Option<u64>| x.map_or_else(|| "NA".into(), |v| v.to_string());
        match column {
            "param_set" => self.param_set.to_string(),
            "hopping" => fmt_f64(self.hopping),
            "onsite" => fmt_f64(self.onsite),
            "n" => self.n.to_string(),
            "construction" => self.construction.label().into(),
            "budget" => self.budget.to_string(),
            "m_h" => u(self.m_h),
            "m_s" => u(self.m_s),
            "status" => self.skipped.as_ref().map_or_else(|| "ok".into(), |r| format!("skipped: {r}")),
            "trials" => self.trials.to_string(),
            "epsilon" => fmt_opt(self.epsilon),
            "mean_norm_h" => fmt_opt(self.mean_norm_h),
            "mean_norm_s" => fmt_opt(self.mean_norm_s),
            "max_norm_h" => fmt_opt(self.max_norm_h),
            "max_norm_s" => fmt_opt(self.max_norm_s),
            "bound_h" => fmt_opt(self.bound_h),
            "bound_s" => fmt_opt(self.bound_s),
            "frac_under_h" => fmt_opt(self.frac_under_h),
            "frac_under_s" => fmt_opt(self.frac_under_s),
            "kappa_h" => fmt_opt(self.kappa_h),
            "kappa_s" => fmt_opt(self.kappa_s),
            "tail_h" => fmt_opt(self.tail_h),
            "tail_s" => fmt_opt(self.tail_s),
            "slope_h" => fmt_opt(self.slope_h),
            "slope_s" => fmt_opt(self.slope_s),
            "v_stat_h" => fmt_opt(self.v_stat_h),
            "v_stat_s" => fmt_opt(self.v_stat_s),
            "e0_sector" => fmt_f64(self.e0_sector),
            "e0_krylov" => fmt_opt(self.e0_krylov),
            "e0_thresholded" => fmt_opt(self.e0_thresholded),
            "n_eps_exact" => fmt_opt_usize(self.n_eps_exact),
            "mean_n_eps" => fmt_opt(self.mean_n_eps),
            "rms_rel_error" => fmt_opt(self.rms_rel_error),
            "mean_rel_error" => fmt_opt(self.mean_rel_error),
            "median_rel_error" => fmt_opt(self.median_rel_error),
            "failed_trials" => self.failed_trials.to_string(),
            "frac_chi_le_eta" => fmt_opt(self.frac_chi_le_eta),
            "mean_chi_over_eta" => fmt_opt(self.mean_chi_over_eta),
            "angle_bound_qualifying" => self.angle_bound_qualifying.to_string(),
            "angle_bound_satisfied" => self.angle_bound_satisfied.to_string(),
            "energy_bound_qualifying" => self.energy_bound_qualifying.to_string(),
            "energy_bound_satisfied" => self.energy_bound_satisfied.to_string(),
            "energy_bound_not_applicable" => self.energy_bound_not_applicable.to_string(),
            "mean_d0_inv" => fmt_opt(self.mean_d0_inv),
            "d0_upper" => fmt_opt(self.d0_upper),
            "trotter_depth" => fmt_opt(self.trotter_depth),
            other => panic!("unknown summary column {other}"),
        }
    }
}

const CELL_KEY: [&str; 8] = ["param_set", "hopping", "onsite", "n", "construction", "budget", "m_h", "m_s"];

macro_rules! columns {
    ($($extra:literal),* $(,)?) => {
        &[
            CELL_KEY[0], CELL_KEY[1], CELL_KEY[2], CELL_KEY[3],
            CELL_KEY[4], CELL_KEY[5], CELL_KEY[6], CELL_KEY[7],
            $($extra),*
        ]
    };
}

pub const ERROR_NORM_TRIAL_COLUMNS: &[&str] = columns!(
    "trial", "seed", "norm_h", "norm_s", "bound_h", "bound_s", "under_bound_h", "under_bound_s",
);
pub const ERROR_NORM_SUMMARY_COLUMNS: &[&str] = columns!(
    "status", "trials", "mean_norm_h", "mean_norm_s", "max_norm_h", "max_norm_s", "bound_h",
    "bound_s", "frac_under_h", "frac_under_s", "kappa_h", "kappa_s", "tail_h", "tail_s",
    "slope_h", "slope_s", "v_stat_h", "v_stat_s",
);
pub const OPTIMAL_THRESHOLD_TRIAL_COLUMNS: &[&str] = columns!(
    "trial", "seed", "epsilon", "n_eps", "n_eps_exact", "e0_sector", "e0_krylov",
    "e0_thresholded", "e0_noisy", "rel_error", "cond_s",
);
pub const OPTIMAL_THRESHOLD_SUMMARY_COLUMNS: &[&str] = columns!(
    "status", "trials", "epsilon", "n_eps_exact", "mean_n_eps", "e0_sector", "e0_krylov",
    "e0_thresholded", "rms_rel_error", "mean_rel_error", "median_rel_error", "failed_trials",
);
pub const PERTURBATION_TRIAL_COLUMNS: &[&str] = columns!(
    "trial", "seed", "epsilon", "n_eps", "n_eps_exact", "norm_h", "norm_s", "eta", "chi",
    "e0_thresholded", "e0_noisy", "energy_error", "angle_error", "d0", "d0_inv", "cond_s",
    "angle_error_bound", "energy_error_bound", "weyl_rel_bound", "chi_rhs", "small_perturbation",
    "gap_condition", "delta_h_within", "delta_s_within", "chi_le_eta", "matched_n_eps",
    "angle_bound_satisfied", "energy_bound_satisfied",
);
pub const PERTURBATION_SUMMARY_COLUMNS: &[&str] = columns!(
    "status", "trials", "epsilon", "n_eps_exact", "mean_n_eps", "frac_chi_le_eta",
    "mean_chi_over_eta", "angle_bound_qualifying", "angle_bound_satisfied", "energy_bound_qualifying",
    "energy_bound_satisfied", "energy_bound_not_applicable", "mean_d0_inv", "d0_upper", "trotter_depth",
);

/// Per-trial, per-index eigenvalue record of the overlap spectrum run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub param_set: usize,
    pub n: usize,
    pub budget: u64,
    pub m_s: u64,
    pub trial: u64,
    /// 1-based, descending order.
    pub index: usize,
    pub exact: f64,
    pub perturbed: f64,
    pub norm_s: f64,
    pub epsilon: f64,
}

impl SpectrumRecord {
    pub fn deviation(&self) -> f64 {
        (self.perturbed - self.exact).abs()
    }

    pub fn weyl_holds(&self) -> bool {
        self.deviation() <= self.norm_s + WEYL_SLACK
    }
}

/// Floating slack for the eigenvalue perturbation inequality.
pub const WEYL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub param_set: usize,
    pub n: usize,
    pub budget: u64,
    pub m_s: u64,
    pub index: usize,
    pub exact: f64,
    pub mean_perturbed: f64,
    pub std_perturbed: Option<f64>,
    pub epsilon: f64,
    pub weyl_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub records: Vec<SpectrumRecord>,
    pub summaries: Vec<SpectrumSummary>,
}

fn descending_eigenvalues(m: &crate::linalg::CMatrix) -> Vec<f64> {
    let mut v = hermitian_eigenvalues(m);
    v.reverse();
    v
}

/// Exact versus sampled overlap spectra at the first configured order.
pub fn run_singular_spectrum(cfg: &ExperimentConfig) -> Result<SpectrumRun> {
    cfg.validate()?;
    let n = cfg.krylov_orders[0];
    let systems = prepare_systems(cfg, &[n])?;
    let construction = cfg.construction.constructions()[0];
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for system in &systems {
        for budget in cfg.budgets_u64() {
            let cell = Cell::new(cfg, system, n, budget, construction)?;
            let exact = descending_eigenvalues(&cell.truth.s);
            let per_trial: Vec<Vec<SpectrumRecord>> = run_trials(cfg.trials, |t| {
                let noisy = cell.sample(t)?;
                let norm_s = crate::linalg::spectral_norm(&(&noisy.s - &cell.truth.s));
                let perturbed = descending_eigenvalues(&noisy.s);
                Ok((0..n)
                    .map(|i| SpectrumRecord {
                        param_set: system.index,
                        n,
                        budget,
                        m_s: cell.m_s,
                        trial: t,
                        index: i + 1,
                        exact: exact[i],
                        perturbed: perturbed[i],
                        norm_s,
                        epsilon: cell.epsilon,
                    })
                    .collect())
            })?;
            for i in 0..n {
                let values: Vec<f64> = per_trial.iter().map(|r| r[i].perturbed).collect();
                let holds = per_trial.iter().filter(|r| r[i].weyl_holds()).count();
                summaries.push(SpectrumSummary {
                    param_set: system.index,
                    n,
                    budget,
                    m_s: cell.m_s,
                    index: i + 1,
                    exact: exact[i],
                    mean_perturbed: mean(&values).unwrap_or(f64::NAN),
                    std_perturbed: std_dev(&values),
                    epsilon: cell.epsilon,
                    weyl_fraction: holds as f64 / per_trial.len() as f64,
                });
            }
            records.extend(per_trial.into_iter().flatten());
        }
    }
    Ok(SpectrumRun { records, summaries })
}

impl Columns for SpectrumRecord {
    fn value(&self, column: &str) -> String {
        match column {
            "param_set" => self.param_set.to_string(),
            "n" => self.n.to_string(),
            "budget" => self.budget.to_string(),
            "m_s" => self.m_s.to_string(),
            "trial" => self.trial.to_string(),
            "index" => self.index.to_string(),
            "exact" => fmt_f64(self.exact),
            "perturbed" => fmt_f64(self.perturbed),
            "deviation" => fmt_f64(self.deviation()),
            "norm_s" => fmt_f64(self.norm_s),
            "weyl_holds" => fmt_bool(self.weyl_holds()),
            "epsilon" => fmt_f64(self.epsilon),
            "above_epsilon" => fmt_bool(self.exact > self.epsilon),
            other => panic!("unknown spectrum column {other}"),
        }
    }
}

impl Columns for SpectrumSummary {
    fn value(&self, column: &str) -> String {
        match column {
            "param_set" => self.param_set.to_string(),
            "n" => self.n.to_string(),
            "budget" => self.budget.to_string(),
            "m_s" => self.m_s.to_string(),
            "index" => self.index.to_string(),
            "exact" => fmt_f64(self.exact),
            "mean_perturbed" => fmt_f64(self.mean_perturbed),
            "std_perturbed" => fmt_opt(self.std_perturbed),
            "epsilon" => fmt_f64(self.epsilon),
            "above_epsilon" => fmt_bool(self.exact > self.epsilon),
            "weyl_fraction" => fmt_f64(self.weyl_fraction),
            other => panic!("unknown spectrum column {other}"),
        }
    }
}

pub const SPECTRUM_TRIAL_COLUMNS: &[&str] = &[
    "param_set", "n", "budget", "m_s", "trial", "index", "exact", "perturbed", "deviation",
    "norm_s", "weyl_holds", "epsilon", "above_epsilon",
];
pub const SPECTRUM_SUMMARY_COLUMNS: &[&str] = &[
    "param_set", "n", "budget", "m_s", "index", "exact", "mean_perturbed", "std_perturbed",
    "epsilon", "above_epsilon", "weyl_fraction",
];

/// One trial's energies for every forced retained dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub param_set: usize,
    pub n: usize,
    pub construction: Construction,
    pub budget: u64,
    pub trial: u64,
    pub retained: usize,
    pub energy: Option<f64>,
    pub rel_error: Option<f64>,
    /// Whether `retained` equals this trial's `ε`-cut dimension.
    pub marked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub param_set: usize,
    pub hopping: f64,
    pub onsite: f64,
    pub n: usize,
    pub construction: Construction,
    pub budget: u64,
    pub m_s: u64,
    pub retained: usize,
    pub ideal_rel_error: Option<f64>,
    pub rms_rel_error: Option<f64>,
    pub mean_rel_error: Option<f64>,
    pub valid_trials: usize,
    pub frac_marked: f64,
    pub epsilon: f64,
    pub marked_rms: Option<f64>,
    pub sweep_min_rms: Option<f64>,
}

impl SweepSummary {
    /// `marked_rms / sweep_min_rms`.
    pub fn marked_ratio(&self) -> Option<f64> {
        Some(self.marked_rms? / self.sweep_min_rms?)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub records: Vec<SweepRecord>,
    pub summaries: Vec<SweepSummary>,
}

fn forced_energy(pair: &KrylovPair, k: usize) -> Option<f64> {
    let t = threshold_top_k(&pair.h, &pair.s, k).ok()?;
    solve_gevp(&t.a, &t.b).ok().map(|s| s.ground_energy())
}

/// Forced-dimension sweep at the first configured order.
pub fn run_threshold_sweep(cfg: &ExperimentConfig) -> Result<SweepRun> {
    cfg.validate()?;
    let n = cfg.krylov_orders[0];
    let systems = prepare_systems(cfg, &[n])?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for system in &systems {
        let e0 = system.e0_sector;
        let rel = |e: f64| (e - e0).abs() / e0.abs();
        for &construction in &cfg.construction.constructions() {
            for budget in cfg.budgets_u64() {
                let cell = match Cell::new(cfg, system, n, budget, construction) {
                    Ok(c) => c,
                    Err(QksdError::InfeasibleBudget { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let exact_eigs = descending_eigenvalues(&cell.truth.s);
                let ideal: Vec<Option<f64>> = (1..=n)
                    .map(|k| {
                        (exact_eigs[k - 1] > NUMERICAL_RANK_CUTOFF)
                            .then(|| forced_energy(&cell.truth, k).map(rel))
                            .flatten()
                    })
                    .collect();
                let per_trial: Vec<(Vec<SweepRecord>, Option<f64>)> = run_trials(cfg.trials, |t| {
                    let noisy = cell.sample(t)?;
                    let cut = descending_eigenvalues(&noisy.s)
                        .iter()
                        .filter(|&&v| v > cell.epsilon)
                        .count();
                    let rows: Vec<SweepRecord> = (1..=n)
                        .map(|k| {
                            let energy = forced_energy(&noisy, k);
                            SweepRecord {
                                param_set: system.index,
                                n,
                                construction,
                                budget,
                                trial: t,
                                retained: k,
                                energy,
                                rel_error: energy.map(rel),
                                marked: k == cut,
                            }
                        })
                        .collect();
                    let marked = (cut > 0).then(|| rows[cut - 1].rel_error).flatten();
                    Ok((rows, marked))
                })?;
                let marked: Vec<f64> = per_trial.iter().filter_map(|(_, m)| *m).collect();
                let marked_rms = (marked.len() == per_trial.len()).then(|| rms(&marked)).flatten();
                let mut cell_rows = Vec::with_capacity(n);
                for k in 1..=n {
                    let errs: Vec<f64> =
                        per_trial.iter().filter_map(|(rows, _)| rows[k - 1].rel_error).collect();
                    let marked_count = per_trial.iter().filter(|(rows, _)| rows[k - 1].marked).count();
                    cell_rows.push(SweepSummary {
                        param_set: system.index,
                        hopping: system.hopping,
                        onsite: system.onsite,
                        n,
                        construction,
                        budget,
                        m_s: cell.m_s,
                        retained: k,
                        ideal_rel_error: ideal[k - 1],
                        rms_rel_error: rms(&errs),
                        mean_rel_error: mean(&errs),
                        valid_trials: errs.len(),
                        frac_marked: marked_count as f64 / per_trial.len() as f64,
                        epsilon: cell.epsilon,
                        marked_rms,
                        sweep_min_rms: None,
                    });
                }
                let sweep_min = cell_rows
                    .iter()
                    .filter(|r| r.valid_trials == per_trial.len())
                    .filter_map(|r| r.rms_rel_error)
                    .reduce(f64::min);
                for row in &mut cell_rows {
                    row.sweep_min_rms = sweep_min;
                }
                summaries.extend(cell_rows);
                records.extend(per_trial.into_iter().flat_map(|(rows, _)| rows));
            }
        }
    }
    if summaries.is_empty() {
        return Err(QksdError::InfeasibleBudget {
            budget: cfg.budgets_u64().into_iter().max().unwrap_or(0),
            required: (n * n) as u64,
        });
    }
    Ok(SweepRun { records, summaries })
}

impl Columns for SweepRecord {
    fn value(&self, column: &str) -> String {
        match column {
            "param_set" => self.param_set.to_string(),
            "n" => self.n.to_string(),
            "construction" => self.construction.label().into(),
            "budget" => self.budget.to_string(),
            "trial" => self.trial.to_string(),
            "retained" => self.retained.to_string(),
            "energy" => fmt_opt(self.energy),
            "rel_error" => fmt_opt(self.rel_error),
            "marked" => fmt_bool(self.marked),
            other => panic!("unknown sweep column {other}"),
        }
    }
}

impl Columns for SweepSummary {
    fn value(&self, column: &str) -> String {
        match column {
            "param_set" => self.param_set.to_string(),
            "hopping" => fmt_f64(self.hopping),
            "onsite" => fmt_f64(self.onsite),
            "n" => self.n.to_string(),
            "construction" => self.construction.label().into(),
            "budget" => self.budget.to_string(),
            "m_s" => self.m_s.to_string(),
            "retained" => self.retained.to_string(),
            "ideal_rel_error" => fmt_opt(self.ideal_rel_error),
            "rms_rel_error" => fmt_opt(self.rms_rel_error),
            "mean_rel_error" => fmt_opt(self.mean_rel_error),
            "valid_trials" => self.valid_trials.to_string(),
            "frac_marked" => fmt_f64(self.frac_marked),
            "epsilon" => fmt_f64(self.epsilon),
            "marked_rms" => fmt_opt(self.marked_rms),
            "sweep_min_rms" => fmt_opt(self.sweep_min_rms),
            "marked_ratio" => fmt_opt(self.marked_ratio()),
            other => panic!("unknown sweep column {other}"),
        }
    }
}

pub const SWEEP_TRIAL_COLUMNS: &[&str] = &[
    "param_set", "n", "construction", "budget", "trial", "retained", "energy", "rel_error", "marked",
];
pub const SWEEP_SUMMARY_COLUMNS: &[&str] = &[
    "param_set", "hopping", "onsite", "n", "construction", "budget", "m_s", "retained",
    "ideal_rel_error", "rms_rel_error", "mean_rel_error", "valid_trials", "frac_marked",
    "epsilon", "marked_rms", "sweep_min_rms", "marked_ratio",
];
