use std::fs;
use std::path::Path;
use std::process::Command;

use ssp_bench::aggregate::read_column;
use ssp_bench::config::{Algorithm, ExperimentConfig};
use ssp_bench::runner::{
    aggregate_dir, aggregate_path, episodes_path, hash_tree, read_manifest, report, run_experiment, sha256_file,
    MANIFEST,
};
use ssp_core::confidence::ConfidenceMode;
use ssp_core::env::Scenario;

fn config(out: &Path, algorithms: Vec<Algorithm>, k: u64, reps: u64) -> ExperimentConfig {
    ExperimentConfig {
        scenario: Scenario::GridworldSandpit {
            beta: 0.5,
            rows: 3,
            cols: 4,
            p_f: 0.05,
        },
        algorithms,
        k,
        repetitions: reps,
        base_seed: 7,
        delta: 0.1,
        confidence_mode: ConfidenceMode::HoeffdingExperimental,
        output_dir: out.to_path_buf(),
        penalty_j: None,
        stochastic_costs: false,
        plot: false,
    }
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    hash_tree(dir)
        .unwrap()
        .into_iter()
        .map(|f| (f.path.clone(), fs::read(dir.join(&f.path)).unwrap()))
        .chain(std::iter::once((
            MANIFEST.to_string(),
            fs::read(dir.join(MANIFEST)).unwrap(),
        )))
        .collect()
}

#[test]
fn layout_of_a_small_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), vec![Algorithm::Ucssp], 10, 2);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.manifest.failed.is_empty());
    let names: Vec<String> = out.manifest.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(
        names,
        vec![
            "aggregate/ucssp.csv",
            "runs/ucssp/seed_7_attempts.csv",
            "runs/ucssp/seed_7_episodes.csv",
            "runs/ucssp/seed_7_summary.json",
            "runs/ucssp/seed_8_attempts.csv",
            "runs/ucssp/seed_8_episodes.csv",
            "runs/ucssp/seed_8_summary.json",
        ]
    );
    for seed in [7, 8] {
        assert_eq!(
            read_column(&episodes_path(tmp.path(), Algorithm::Ucssp, seed), "k")
                .unwrap()
                .len(),
            10
        );
    }
    assert_eq!(
        read_column(&aggregate_path(tmp.path(), Algorithm::Ucssp), "mean")
            .unwrap()
            .len(),
        10
    );
    let manifest = read_manifest(tmp.path()).unwrap();
    assert_eq!(manifest, out.manifest);
    assert_eq!(manifest.config, cfg);
    assert!((manifest.oracle.v_star.unwrap() - manifest.comparators["ucssp"]).abs() < 1e-9);
}

#[test]
fn manifest_hashes_match_the_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(
        tmp.path(),
        vec![Algorithm::Ucssp, Algorithm::UcrlSspPivot],
        5,
        2,
    ))
    .unwrap();
    assert_eq!(out.manifest.files.len(), 2 * (1 + 2 * 3));
    for f in &out.manifest.files {
        assert_eq!(f.sha256, sha256_file(&tmp.path().join(&f.path)).unwrap(), "{}", f.path);
        assert_eq!(f.sha256.len(), 64);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let algs = vec![Algorithm::Ucssp, Algorithm::UcrlSspNoPivot];
    run_experiment(&config(a.path(), algs.clone(), 20, 3)).unwrap();
    let mut cfg_b = config(b.path(), algs, 20, 3);
    run_experiment(&cfg_b).unwrap();
    // Only the output directory differs between the two manifests.
    let strip = |dir: &Path| {
        let mut m = read_manifest(dir).unwrap();
        m.config.output_dir = "x".into();
        m
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    let (la, lb) = (listing(a.path()), listing(b.path()));
    assert_eq!(la.len(), lb.len());
    for ((pa, ba), (pb, bb)) in la.iter().zip(&lb).filter(|((p, _), _)| p != MANIFEST) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{pa} differs");
    }
    cfg_b.base_seed += 1;
    run_experiment(&cfg_b).unwrap();
    assert_ne!(
        fs::read(aggregate_path(a.path(), Algorithm::Ucssp)).unwrap(),
        fs::read(aggregate_path(b.path(), Algorithm::Ucssp)).unwrap()
    );
}

/// One-pass mean and variance, kept apart from the library's two-pass code.
fn welford(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in xs {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    (mean, if n > 1 { m2 / (n - 1) as f64 } else { 0.0 }, n)
}

#[test]
fn aggregate_matches_an_independent_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), vec![Algorithm::Ucssp], 40, 5);
    run_experiment(&cfg).unwrap();
    let runs: Vec<Vec<f64>> = cfg
        .seeds()
        .map(|s| read_column(&episodes_path(tmp.path(), Algorithm::Ucssp, s), "cum_regret").unwrap())
        .collect();
    let agg_path = aggregate_path(tmp.path(), Algorithm::Ucssp);
    let col = |c: &str| read_column(&agg_path, c).unwrap();
    let (mean, se, lo, hi, nm) = (
        col("mean"),
        col("stderr"),
        col("min"),
        col("max"),
        col("normalized_mean"),
    );
    let v_star = read_manifest(tmp.path()).unwrap().comparators["ucssp"];
    for k in 0..40 {
        let (m, var, n) = welford(runs.iter().map(|r| r[k]));
        let scale = 1.0 + m.abs();
        assert!((mean[k] - m).abs() <= 1e-9 * scale, "k={k}");
        assert!((se[k] - (var / n as f64).sqrt()).abs() <= 1e-9 * scale, "k={k}");
        assert!(lo[k] <= mean[k] && mean[k] <= hi[k]);
        assert!((nm[k] - m / v_star).abs() <= 1e-9 * scale);
    }
    // Re-aggregation reproduces the same file.
    let before = fs::read(&agg_path).unwrap();
    aggregate_dir(tmp.path()).unwrap();
    assert_eq!(before, fs::read(&agg_path).unwrap());
}

#[test]
fn report_with_plots_refreshes_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(
        tmp.path(),
        vec![Algorithm::Ucssp, Algorithm::UcrlSspPivot],
        30,
        2,
    ))
    .unwrap();
    let rows = report(tmp.path(), true).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].algorithm, "ucssp");
    assert_eq!(rows[0].episodes, 30);
    assert!(rows.iter().all(|r| r.final_regret.is_finite()));
    let manifest = read_manifest(tmp.path()).unwrap();
    let names: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    assert!(names.contains(&"plots/regret.svg"));
    assert!(names.contains(&"plots/regret_normalized.svg"));
    assert!(fs::read_to_string(tmp.path().join("plots/regret.svg"))
        .unwrap()
        .contains("ucrl_ssp+pivot"));
}

#[test]
fn dead_end_scenario_with_a_penalty() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), vec![Algorithm::UcsspPenalty], 5, 2);
    cfg.scenario = Scenario::ToyDeadEnd { c_min: 1.0, c_max: 3.0 };
    cfg.penalty_j = Some(4.0);
    let out = run_experiment(&cfg).unwrap();
    assert!(out.manifest.failed.is_empty());
    assert_eq!(out.manifest.oracle.comparator, "none");
    assert!(out.manifest.comparators["ucssp_J"] <= 4.0);
    assert_eq!(out.aggregates[0].n_runs, 2);
}

#[test]
fn cli_runs_reports_and_prints_oracles() {
    let exe = env!("CARGO_BIN_EXE_ssp-bench");
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("exp");
    let cfg_path = tmp.path().join("cfg.json");
    let cfg = config(&out_dir, vec![Algorithm::Ucssp], 8, 2);
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();

    let run = Command::new(exe)
        .args(["run", "--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out_dir.join(MANIFEST).exists());

    let rep = Command::new(exe)
        .args(["report", "--plot", "--dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(rep.status.success());
    assert!(String::from_utf8_lossy(&rep.stdout).contains("ucssp"));
    assert!(out_dir.join("plots/regret.svg").exists());

    let agg = Command::new(exe)
        .args(["aggregate", "--dir"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(agg.status.success());

    let oracle = Command::new(exe)
        .args(["oracle", "--scenario", "gridworld-sandpit", "--beta", "0.5"])
        .output()
        .unwrap();
    assert!(oracle.status.success());
    let o: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
    assert_eq!(o["comparator"], "exact");
    assert!(o["v_star"].as_f64().unwrap() > 0.0);

    let bad = Command::new(exe)
        .args(["oracle", "--scenario", "nope"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let missing = Command::new(exe)
        .args(["aggregate", "--dir"])
        .arg(tmp.path().join("none"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
}
