use ssp_bench::config::{Algorithm, ExperimentConfig};
use ssp_bench::runner::{resolve_output_dir, run_experiment, MANIFEST, OUTPUT_ENV};
use ssp_core::confidence::ConfidenceMode;
use ssp_core::env::Scenario;

// Kept alone in its own binary: it mutates the process environment.
#[test]
fn relative_output_dirs_follow_the_env_override() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig {
        scenario: Scenario::GridworldUniform {
            rows: 3,
            cols: 4,
            p_f: 0.05,
        },
        algorithms: vec![Algorithm::Ucrl2],
        k: 4,
        repetitions: 1,
        base_seed: 0,
        delta: 0.1,
        confidence_mode: ConfidenceMode::HoeffdingExperimental,
        output_dir: "nested/exp".into(),
        penalty_j: None,
        stochastic_costs: false,
        plot: true,
    };
    std::env::set_var(OUTPUT_ENV, root.path());
    assert_eq!(resolve_output_dir(&cfg), root.path().join("nested/exp"));
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.dir, root.path().join("nested/exp"));
    assert!(out.dir.join(MANIFEST).exists());
    assert!(out.dir.join("plots/regret.svg").exists());

    let abs = tempfile::tempdir().unwrap();
    cfg.output_dir = abs.path().to_path_buf();
    assert_eq!(resolve_output_dir(&cfg), abs.path());
    std::env::remove_var(OUTPUT_ENV);
    cfg.output_dir = "nested/exp".into();
    assert_eq!(resolve_output_dir(&cfg), std::path::PathBuf::from("nested/exp"));
}
