//! Acceptance suite. Every criterion runs, prints one PASS/FAIL line, and the
//! process exits non-zero if any of them failed.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qksd_core::bounds::variance_statistic;
use qksd_core::evolution::{exact_propagator, trotter_propagator, Spectrum};
use qksd_core::gevp::threshold_and_solve;
use qksd_core::hamiltonian::{
    annihilation, build_hubbard_1d, creation, sorted_insertion_partition, DEFAULT_DENSE_QUBIT_CAP,
};
use qksd_core::harness::system::NUMERICAL_RANK_CUTOFF;
use qksd_core::harness::{
    run_driver, run_ensemble, run_singular_spectrum, run_threshold_sweep, CellSummary, Driver,
    ExperimentConfig, PreparedSystem,
};
use qksd_core::krylov::Construction;
use qksd_core::linalg::{identity, max_abs_diff, CMatrix};
use qksd_core::sampling::{
    allocate_nontoeplitz, allocate_toeplitz, estimate_part, NoiseMode, Part, PlanTarget, ShotPlan,
};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const EXACT_TOL: f64 = 1e-10;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("acceptance config parses")
}

fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

fn exactness_stack() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for sites in 1..=3usize {
        let nq = 2 * sites;
        let lowers: Vec<CMatrix> = (0..nq)
            .map(|p| annihilation(p, nq).to_dense_capped(DEFAULT_DENSE_QUBIT_CAP))
            .collect::<Result<_, _>>()?;
        let raises: Vec<CMatrix> = (0..nq)
            .map(|p| creation(p, nq).to_dense_capped(DEFAULT_DENSE_QUBIT_CAP))
            .collect::<Result<_, _>>()?;
        let dim = 1 << nq;
        let zero = CMatrix::zeros(dim, dim);
        let one = identity(dim);
        for p in 0..nq {
            for q in 0..nq {
                let expected = if p == q { &one } else { &zero };
                worst = worst.max(max_abs_diff(&anticommutator(&lowers[p], &raises[q]), expected));
                worst = worst.max(max_abs_diff(&anticommutator(&lowers[p], &lowers[q]), &zero));
            }
        }

        for (t, u) in [(0.2, 0.1), (0.1, 0.8), (1.0, 4.0)] {
            let h = build_hubbard_1d(sites, t, u)?;
            let h_dense = h.to_dense()?;
            let partition = sorted_insertion_partition(&h)?;
            let mut rebuilt = identity(dim) * Complex64::new(partition.identity_offset(), 0.0);
            for (beta, unitary) in partition.betas().iter().zip(partition.dense_unitaries()?) {
                worst = worst.max(max_abs_diff(&(unitary.adjoint() * &unitary), &one));
                rebuilt += unitary * Complex64::new(*beta, 0.0);
            }
            worst = worst.max(max_abs_diff(&rebuilt, &h_dense));

            let spectrum = Spectrum::from_dense(&h_dense);
            let (t1, t2) = (0.37, 1.91);
            let u1 = exact_propagator(&spectrum, t1);
            let u2 = exact_propagator(&spectrum, t2);
            let u12 = exact_propagator(&spectrum, t1 + t2);
            worst = worst.max(u1.unitarity_defect());
            worst = worst.max(max_abs_diff(&(&u1.matrix * &u2.matrix), &u12.matrix));
            let back = exact_propagator(&spectrum, -t1);
            worst = worst.max(max_abs_diff(&(&u1.matrix * &back.matrix), &one));
            worst = worst.max(trotter_propagator(&h, t2, 7)?.unitarity_defect());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= EXACT_TOL && secs < 10.0,
        format!("max defect {worst:.2e} (tol {EXACT_TOL:.0e}), {secs:.2} s (limit 10 s)"),
    ))
}

/// Dense `S_z = 0` sector of the two-site model in the basis
/// `c†0↑c†1↓, c†0↓c†1↑, c†0↑c†0↓, c†1↑c†1↓`, built by hand.
fn two_site_sector_ground(t: f64, u: f64) -> f64 {
    let h = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, -t, -t, //
            0.0, 0.0, t, t, //
            -t, t, u, 0.0, //
            -t, t, 0.0, u,
        ],
    );
    h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn two_site_oracle() -> Check {
    let (t, u): (f64, f64) = (0.2, 0.1);
    let closed_form = (u - (u * u + 16.0 * t * t).sqrt()) / 2.0;
    let oracle = two_site_sector_ground(t, u);
    let orders: Vec<usize> = (3..=15).step_by(2).collect();
    let cfg = config(&format!(
        "sites = 2\nhopping = {t}\nonsite = {u}\nkrylov_orders = [5]\nbudgets = [1e6]\n"
    ));
    let system = PreparedSystem::prepare(&cfg, 0, &orders)?;
    let energy = |n: usize| -> Result<f64, Box<dyn std::error::Error>> {
        let (_, sol) = threshold_and_solve(&system.problem(n).toeplitz, NUMERICAL_RANK_CUTOFF)?;
        Ok(sol.ground_energy())
    };
    let e5 = energy(5)?;
    let oracle_err = (e5 - oracle).abs();
    let quoted_err = (e5 - (-0.353113)).abs();
    let sector_err = (system.e0_sector - oracle).abs();

    let mut monotone = true;
    let mut worst_rise = f64::NEG_INFINITY;
    for n in (3..=13).step_by(2) {
        let rise = energy(n + 2)? - energy(n)?;
        worst_rise = worst_rise.max(rise);
        monotone &= rise <= 1e-9;
    }
    let pass = oracle_err <= 1e-6
        && quoted_err <= 1e-6
        && sector_err <= 1e-10
        && (closed_form - oracle).abs() <= 1e-12
        && monotone;
    Ok((
        pass,
        format!(
            "E0(n=5) = {e5:.9}, oracle {oracle:.9} (|diff| {oracle_err:.1e}), \
             max E0(n+2)-E0(n) = {worst_rise:.1e}"
        ),
    ))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Kind {
    ToeplitzH,
    ToeplitzS,
    NonToeplitzH,
}

fn norm_bounds() -> Check {
    let start = Instant::now();
    let cfg = config(
        "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [5, 9, 13, 17, 25]\n\
         budgets = [1e6, 1e8]\nconstruction = \"both\"\nmode = \"gaussian\"\nseed = 1\ntrials = 1000\n",
    );
    let run = run_ensemble(&cfg)?;

    // (kind) -> (under, total)
    let mut counts: BTreeMap<Kind, (usize, usize)> = BTreeMap::new();
    for r in &run.records {
        let h_kind = match r.construction {
            Construction::Toeplitz => Kind::ToeplitzH,
            Construction::NonToeplitz => Kind::NonToeplitzH,
        };
        for (kind, under) in [(h_kind, r.norm_h < r.bound_h), (Kind::ToeplitzS, r.norm_s < r.bound_s)] {
            let entry = counts.entry(kind).or_default();
            entry.0 += usize::from(under);
            entry.1 += 1;
        }
    }
    let mut pass = true;
    let mut notes = Vec::new();
    for (kind, (under, total)) in &counts {
        let frac = *under as f64 / *total as f64;
        pass &= frac >= 0.999;
        notes.push(format!("{kind:?} {:.2}%", 100.0 * frac));
    }

    // slope of ln(mean·√M_Z/√ln 2n) against ln n per (construction, budget, matrix)
    let ok: Vec<&CellSummary> = run.summaries.iter().filter(|s| s.is_ok()).collect();
    let mut series: BTreeMap<(Kind, u64), Vec<(f64, f64)>> = BTreeMap::new();
    for s in &ok {
        let n = s.n as f64;
        let log_factor = (2.0 * n).ln().sqrt();
        let (h_kind, mh, ms) = match s.construction {
            Construction::Toeplitz => (Kind::ToeplitzH, s.m_h.unwrap(), s.m_s.unwrap()),
            Construction::NonToeplitz => (Kind::NonToeplitzH, s.m_h.unwrap(), s.m_s.unwrap()),
        };
        series
            .entry((h_kind, s.budget))
            .or_default()
            .push((n.ln(), (s.mean_norm_h.unwrap() * (mh as f64).sqrt() / log_factor).ln()));
        if s.construction == Construction::Toeplitz {
            series
                .entry((Kind::ToeplitzS, s.budget))
                .or_default()
                .push((n.ln(), (s.mean_norm_s.unwrap() * (ms as f64).sqrt() / log_factor).ln()));
        }
    }
    for ((kind, budget), pts) in &series {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        let b = slope(&xs, &ys);
        let range = if *kind == Kind::NonToeplitzH { (1.35, 1.65) } else { (0.85, 1.15) };
        let inside = b >= range.0 && b <= range.1;
        pass &= inside;
        notes.push(format!("slope {kind:?}@{budget:.0e} {b:.3}{}", if inside { "" } else { " (out)" }));
    }

    // mean-norm ratio between the two budgets
    let mut ratio_range = (f64::INFINITY, f64::NEG_INFINITY);
    for s in ok.iter().filter(|s| s.budget == 1_000_000) {
        let big = ok
            .iter()
            .find(|o| o.budget == 100_000_000 && o.n == s.n && o.construction == s.construction)
            .expect("matching cell");
        for ratio in [
            s.mean_norm_h.unwrap() / big.mean_norm_h.unwrap(),
            s.mean_norm_s.unwrap() / big.mean_norm_s.unwrap(),
        ] {
            ratio_range = (ratio_range.0.min(ratio), ratio_range.1.max(ratio));
            pass &= (9.5..=10.5).contains(&ratio);
        }
    }
    notes.push(format!("ratio in [{:.3}, {:.3}]", ratio_range.0, ratio_range.1));
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 300.0;
    notes.push(format!("{secs:.1} s"));
    Ok((pass, notes.join("; ")))
}

fn weyl_inequality() -> Check {
    let cfg = config(
        "sites = 2\nhopping = 0.1\nonsite = 0.2\n\
         parameter_sets = [[0.1, 0.2], [0.2, 0.1], [0.1, 0.8]]\nkrylov_orders = [15]\n\
         budgets = [1e6, 1e8, 1e10]\nconstruction = \"toeplitz\"\nseed = 4\ntrials = 1000\n",
    );
    let run = run_singular_spectrum(&cfg)?;
    let mut bad_trials = std::collections::BTreeSet::new();
    let mut trials = std::collections::BTreeSet::new();
    let mut worst_excess = f64::NEG_INFINITY;
    for r in &run.records {
        trials.insert((r.param_set, r.budget, r.trial));
        worst_excess = worst_excess.max(r.deviation() - r.norm_s);
        if !r.weyl_holds() {
            bad_trials.insert((r.param_set, r.budget, r.trial));
        }
    }
    Ok((
        bad_trials.is_empty() && !trials.is_empty(),
        format!(
            "{} of {} trials violate; max(|dλ| - ‖ΔS‖) = {worst_excess:.2e}",
            bad_trials.len(),
            trials.len()
        ),
    ))
}

fn perturbation_ensemble() -> Result<qksd_core::harness::EnsembleRun, Box<dyn std::error::Error>> {
    let cfg = config(
        "sites = 2\nhopping = 0.1\nonsite = 0.2\n\
         parameter_sets = [[0.1, 0.2], [0.2, 0.1], [0.1, 0.8]]\nkrylov_orders = [5, 9, 15]\n\
         budgets = [1e6, 1e8, 1e10]\nconstruction = \"both\"\nseed = 5\ntrials = 1000\n",
    );
    Ok(run_ensemble(&cfg)?)
}

fn eigenangle_check(run: &qksd_core::harness::EnsembleRun) -> Check {
    let qualifying: Vec<_> = run.records.iter().filter(|r| r.angle_bound_qualifies()).collect();
    let violated = qualifying
        .iter()
        .filter(|r| r.angle_error.unwrap_or(f64::INFINITY) > r.angle_error_bound.unwrap() + 1e-9)
        .count();
    Ok((
        violated == 0 && !qualifying.is_empty(),
        format!("{violated} violations among {} qualifying of {} trials", qualifying.len(), run.records.len()),
    ))
}

fn energy_check(run: &qksd_core::harness::EnsembleRun) -> Check {
    let qualifying: Vec<_> = run.records.iter().filter(|r| r.energy_bound_qualifies()).collect();
    let violated = qualifying
        .iter()
        .filter(|r| r.energy_error.unwrap_or(f64::INFINITY) > r.energy_error_bound.unwrap() + 1e-9)
        .count();
    Ok((
        violated == 0 && !qualifying.is_empty(),
        format!("{violated} violations among {} qualifying of {} trials", qualifying.len(), run.records.len()),
    ))
}

fn optimal_threshold() -> Check {
    let cfg = config(
        "sites = 2\nhopping = 0.1\nonsite = 0.2\n\
         parameter_sets = [[0.1, 0.2], [0.2, 0.1], [0.1, 0.8]]\nkrylov_orders = [15]\n\
         budgets = [1e8, 1e10]\nconstruction = \"toeplitz\"\nseed = 6\ntrials = 1000\n",
    );
    let run = run_threshold_sweep(&cfg)?;
    let mut cells: BTreeMap<(usize, u64), Option<f64>> = BTreeMap::new();
    for s in &run.summaries {
        // every row of a cell carries the same marked/min pair
        cells.insert((s.param_set, s.budget), s.marked_ratio());
    }
    let good = cells.values().filter(|r| r.is_some_and(|r| r <= 3.0)).count();
    let frac = good as f64 / cells.len() as f64;
    let worst = cells.values().filter_map(|r| *r).fold(0.0f64, f64::max);
    Ok((
        frac >= 0.9,
        format!("{good}/{} cells within factor 3 (worst ratio {worst:.3})", cells.len()),
    ))
}

/// Moves 10% of the mass of `plan` onto a random distribution over its configurations.
fn perturb(plan: &ShotPlan, rng: &mut ChaCha8Rng) -> ShotPlan {
    let keys: Vec<(usize, usize, Part)> = plan.configs().iter().map(|c| (c.row, c.col, c.part)).collect();
    let raw: Vec<f64> = keys.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let norm: f64 = raw.iter().sum();
    let budget = plan.budget() as f64;
    let ideal: Vec<f64> = plan
        .configs()
        .iter()
        .zip(&raw)
        .map(|(c, w)| 0.9 * c.total() as f64 + 0.1 * budget * w / norm)
        .collect();
    let totals = qksd_core::sampling::largest_remainder(plan.budget(), &ideal);
    ShotPlan::from_config_totals(plan.target(), plan.order(), plan.weights(), keys.into_iter().zip(totals).collect())
        .expect("perturbed plan")
}

fn allocation_minimax() -> Check {
    let h = build_hubbard_1d(2, 0.2, 0.1)?;
    let partition = sorted_insertion_partition(&h)?;
    let betas = partition.betas();
    let v_h = partition.beta_norm();
    let budget = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_margin = f64::INFINITY;
    let mut cases = 0;
    for n in [3usize, 5, 9, 15, 25] {
        let plans = [
            (allocate_toeplitz(budget, n, true, &betas)?, v_h),
            (allocate_toeplitz(budget, n, false, &betas)?, 1.0),
            (allocate_nontoeplitz(budget, n, &betas)?, v_h),
        ];
        for (plan, v) in &plans {
            let optimum = variance_statistic(plan, *v);
            for _ in 0..200 {
                let other = perturb(plan, &mut rng);
                assert_eq!(other.total(), plan.total());
                worst_margin = worst_margin.min(variance_statistic(&other, *v) - optimum);
                cases += 1;
            }
        }
    }
    let labels = [PlanTarget::HToeplitz, PlanTarget::SToeplitz, PlanTarget::HNonToeplitz];
    Ok((
        worst_margin >= -1e-12,
        format!("{cases} perturbations over {labels:?}; min(v_perturbed - v_opt) = {worst_margin:.3e}"),
    ))
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn noise_model_agreement() -> Check {
    let shots = 10_000u64;
    let trials = 10_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_mean_z: f64 = 0.0;
    let mut worst_var_z: f64 = 0.0;
    for truth in [-0.9, -0.35, 0.0, 0.5, 0.97] {
        let mut draw = |mode| -> Result<Vec<f64>, qksd_core::QksdError> {
            (0..trials).map(|_| estimate_part(truth, shots, mode, &mut rng).map(|e| e.value)).collect()
        };
        let (mb, vb) = moments(&draw(NoiseMode::Binomial)?);
        let (mg, vg) = moments(&draw(NoiseMode::Gaussian)?);
        let t = trials as f64;
        let mean_se = (vb / t + vg / t).sqrt();
        let var_se = ((vb * vb + vg * vg) * 2.0 / (t - 1.0)).sqrt();
        worst_mean_z = worst_mean_z.max((mb - mg).abs() / mean_se);
        worst_var_z = worst_var_z.max((vb - vg).abs() / var_se);
    }
    Ok((
        worst_mean_z <= 3.0 && worst_var_z <= 3.0,
        format!("max |Δmean| = {worst_mean_z:.2} SE, max |Δvar| = {worst_var_z:.2} SE"),
    ))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir()?;
    let ensemble = "sites = 2\nhopping = 0.1\nonsite = 0.2\n\
         parameter_sets = [[0.1, 0.2], [0.1, 0.8]]\nkrylov_orders = [5, 9]\n\
         budgets = [1e6, 1e8]\nconstruction = \"both\"\nseed = 10\ntrials = 40\n";
    let single = "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [9]\n\
         budgets = [1e6, 1e8]\nconstruction = \"toeplitz\"\nseed = 10\ntrials = 40\n";
    let drivers = [
        (Driver::ErrorNorms, ensemble),
        (Driver::SingularSpectrum, single),
        (Driver::ThresholdSweep, single),
        (Driver::OptimalThreshold, ensemble),
        (Driver::PerturbationBound, ensemble),
    ];
    let mut mismatched = Vec::new();
    for (driver, text) in drivers {
        let cfg = config(text);
        let mut outputs = Vec::new();
        for workers in [1usize, 3] {
            let out = dir.path().join(format!("{}-{workers}.csv", driver.name()));
            let written = run_driver(driver, &cfg, &out, workers)?;
            outputs.push((std::fs::read(&written.trials_path)?, std::fs::read(&written.summary_path)?));
        }
        if outputs[0] != outputs[1] {
            mismatched.push(driver.name());
        }
    }
    Ok((
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "5 drivers byte-identical with 1 and 3 workers".to_string()
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let ensemble = perturbation_ensemble();
    let shared = |f: fn(&qksd_core::harness::EnsembleRun) -> Check| -> Check {
        match &ensemble {
            Ok(run) => f(run),
            Err(e) => Err(e.to_string().into()),
        }
    };
    let results: Vec<(&str, Check)> = vec![
        ("1 exactness stack", exactness_stack()),
        ("2 two-site ground energy", two_site_oracle()),
        ("3 error-norm bounds", norm_bounds()),
        ("4 overlap eigenvalue perturbation", weyl_inequality()),
        ("5 eigenangle bound", shared(eigenangle_check)),
        ("6 optimal threshold", optimal_threshold()),
        ("7 energy perturbation bound", shared(energy_check)),
        ("8 allocation minimax", allocation_minimax()),
        ("9 binomial/gaussian agreement", noise_model_agreement()),
        ("10 determinism", determinism()),
    ];
    let mut failures = 0;
    for (name, result) in results {
        let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!pass);
        println!("{} criterion {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
