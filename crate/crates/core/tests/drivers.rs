use std::path::Path;

use qksd_core::harness::drivers::{
    ERROR_NORM_SUMMARY_COLUMNS, ERROR_NORM_TRIAL_COLUMNS, PERTURBATION_TRIAL_COLUMNS,
    SPECTRUM_TRIAL_COLUMNS, SWEEP_SUMMARY_COLUMNS,
};
use qksd_core::harness::{
    run_driver, run_ensemble, run_singular_spectrum, run_threshold_sweep, Driver, ExperimentConfig,
};
use qksd_core::krylov::Construction;
use qksd_core::linalg::hermitian_eigenvalues;
use qksd_core::QksdError;

const SMALL: &str = "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [5, 9]\n\
                     budgets = [1e6]\nconstruction = \"both\"\nseed = 3\ntrials = 25\n";

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

fn read_table(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let (comment, body) = text.split_once('\n').unwrap();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (comment.to_string(), header, rows)
}

#[test]
fn ensemble_layout_follows_config_order() {
    let cfg = config(SMALL);
    let run = run_ensemble(&cfg).unwrap();
    assert_eq!(run.summaries.len(), 4);
    assert_eq!(run.records.len(), 4 * 25);
    let order: Vec<(Construction, usize)> =
        run.summaries.iter().map(|s| (s.construction, s.n)).collect();
    assert_eq!(
        order,
        vec![
            (Construction::Toeplitz, 5),
            (Construction::Toeplitz, 9),
            (Construction::NonToeplitz, 5),
            (Construction::NonToeplitz, 9),
        ]
    );
    for (i, r) in run.records.iter().take(25).enumerate() {
        assert_eq!(r.trial, i as u64);
    }
    for s in &run.summaries {
        assert_eq!(s.m_h.unwrap() + s.m_s.unwrap(), 1_000_000);
        assert!(s.slope_h.is_some());
    }
}

#[test]
fn infeasible_cells_are_skipped_with_reason() {
    // 30 shots split between H and S cannot cover n = 9 in either construction
    let cfg = config(
        "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [3, 9]\nbudgets = [30]\n\
         construction = \"toeplitz\"\ntrials = 3\n",
    );
    let run = run_ensemble(&cfg).unwrap();
    let skipped: Vec<_> = run.summaries.iter().filter(|s| !s.is_ok()).collect();
    assert_eq!(skipped.len(), 1);
    assert_eq!(skipped[0].n, 9);
    assert!(skipped[0].skipped.as_deref().unwrap().contains("budget"));
    assert!(run.records.iter().all(|r| r.n == 3));
}

#[test]
fn all_cells_infeasible_is_an_error() {
    let cfg = config(
        "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [9]\nbudgets = [20]\ntrials = 3\n",
    );
    assert!(matches!(run_ensemble(&cfg), Err(QksdError::InfeasibleBudget { .. })));
}

#[test]
fn noiseless_spectrum_matches_exact() {
    let cfg = config(
        "sites = 2\nhopping = 0.1\nonsite = 0.8\nkrylov_orders = [7]\nbudgets = [1e4]\n\
         construction = \"toeplitz\"\nmode = \"noiseless\"\ntrials = 3\n",
    );
    let run = run_singular_spectrum(&cfg).unwrap();
    assert_eq!(run.records.len(), 3 * 7);
    for r in &run.records {
        assert!(r.deviation() <= 1e-12);
        assert!(r.exact <= 7.0 + 1e-12);
        assert!(r.weyl_holds());
    }
    // descending order
    for w in run.summaries.windows(2) {
        assert!(w[0].exact >= w[1].exact);
    }
}

#[test]
fn spectrum_driver_reports_exact_overlap_eigenvalues() {
    let cfg = config(
        "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [5]\nbudgets = [1e6]\n\
         construction = \"toeplitz\"\ntrials = 4\n",
    );
    let system = qksd_core::harness::PreparedSystem::prepare(&cfg, 0, &[5]).unwrap();
    let mut expected = hermitian_eigenvalues(&system.problem(5).toeplitz.s);
    expected.reverse();
    let run = run_singular_spectrum(&cfg).unwrap();
    for s in &run.summaries {
        assert!((s.exact - expected[s.index - 1]).abs() < 1e-12);
        assert_eq!(s.weyl_fraction, 1.0);
    }
}

#[test]
fn ideal_sweep_is_nonincreasing() {
    let cfg = config(
        "sites = 3\nhopping = 0.2\nonsite = 0.4\nn_up = 2\nn_down = 1\nkrylov_orders = [9]\n\
         budgets = [1e8]\nconstruction = \"toeplitz\"\ntrials = 5\n",
    );
    let run = run_threshold_sweep(&cfg).unwrap();
    let ideal: Vec<f64> = run.summaries.iter().filter_map(|s| s.ideal_rel_error).collect();
    assert!(ideal.len() >= 2);
    for w in ideal.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{ideal:?}");
    }
    let marked = run.summaries.iter().filter(|s| s.frac_marked > 0.0).count();
    assert!(marked >= 1);
}

#[test]
fn csv_files_are_schema_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(SMALL);
    let out = dir.path().join("norms.csv");
    let written = run_driver(Driver::ErrorNorms, &cfg, &out, 1).unwrap();
    assert_eq!(written.summary_path, dir.path().join("norms.summary.csv"));

    let (comment, header, rows) = read_table(&written.trials_path);
    assert_eq!(
        comment,
        format!("# config_hash={},seed=3,version={}", cfg.hash(), qksd_core::harness::VERSION)
    );
    assert_eq!(header, ERROR_NORM_TRIAL_COLUMNS);
    assert_eq!(rows.len(), written.rows);
    assert!(rows.iter().flatten().all(|v| !v.is_empty()));

    let (_, header, rows) = read_table(&written.summary_path);
    assert_eq!(header, ERROR_NORM_SUMMARY_COLUMNS);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[header.iter().position(|c| c == "status").unwrap()] == "ok"));

    let out = dir.path().join("bound.csv");
    let written = run_driver(Driver::PerturbationBound, &cfg, &out, 2).unwrap();
    let (_, header, rows) = read_table(&written.trials_path);
    assert_eq!(header, PERTURBATION_TRIAL_COLUMNS);
    let flags: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            matches!(
                c.as_str(),
                "small_perturbation" | "gap_condition" | "delta_h_within" | "delta_s_within"
                    | "chi_le_eta" | "matched_n_eps" | "angle_bound_satisfied" | "energy_bound_satisfied"
            )
        })
        .map(|(i, _)| i)
        .collect();
    assert_eq!(flags.len(), 8);
    for row in &rows {
        for &i in &flags {
            assert!(["holds", "violated", "unknown"].contains(&row[i].as_str()), "{}", row[i]);
        }
    }

    let single = config(
        "sites = 2\nhopping = 0.2\nonsite = 0.1\nkrylov_orders = [5]\nbudgets = [1e6]\n\
         construction = \"toeplitz\"\ntrials = 2\n",
    );
    let out = dir.path().join("spectrum.csv");
    let written = run_driver(Driver::SingularSpectrum, &single, &out, 1).unwrap();
    assert_eq!(read_table(&written.trials_path).1, SPECTRUM_TRIAL_COLUMNS);
    let out = dir.path().join("sweep.csv");
    let written = run_driver(Driver::ThresholdSweep, &single, &out, 1).unwrap();
    assert_eq!(read_table(&written.summary_path).1, SWEEP_SUMMARY_COLUMNS);
}

#[test]
fn seed_changes_samples_but_not_exact_values() {
    let a = run_ensemble(&config(SMALL)).unwrap();
    let b = run_ensemble(&config(&SMALL.replace("seed = 3", "seed = 4"))).unwrap();
    assert_ne!(a.records[0].norm_h, b.records[0].norm_h);
    assert_eq!(a.records[0].e0_krylov, b.records[0].e0_krylov);
    assert_eq!(a.records[0].bound_h, b.records[0].bound_h);
}
