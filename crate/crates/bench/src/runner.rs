//! Runs an experiment and manages its output directory.
//!
//! Layout under the run directory:
//!
//! ```text
//! manifest.json
//! runs/<algorithm>/seed_<seed>_episodes.csv
//! runs/<algorithm>/seed_<seed>_attempts.csv
//! runs/<algorithm>/seed_<seed>_summary.json
//! aggregate/<algorithm>.csv
//! plots/regret.svg, plots/regret_normalized.svg
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ssp_core::agent::{oracle_value, run_ucssp_with, AgentConfig, Variant};
use ssp_core::baselines::{run_ucrl2, run_ucrl_ssp_style, SspPlanning, Ucrl2Config, UcrlSspConfig};
use ssp_core::chain::{chain_of, expected_hitting_times};
use ssp_core::record::RunRecord;
use ssp_core::solve::{
    almost_sure_set, exact_value_iteration, proper_policy_oracle, ssp_diameter, DEFAULT_MAX_ITER, DEFAULT_TOL,
    ORACLE_PERTURBATION,
};
use ssp_core::SspInstance;

use crate::aggregate::{aggregate, read_regret_series, sublinearity_check, AggregateSeries, SublinearityVerdict};
use crate::config::{Algorithm, ExperimentConfig};
use crate::plot::{line_chart, Curve};
use crate::{BenchError, Result};

/// Overrides the root of relative output directories.
pub const OUTPUT_ENV: &str = "SSP_LAB_OUT";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// `"exact"` (value iteration) or `"proper"` (best proper policy).
    pub comparator: String,
    pub v_star: Option<f64>,
    pub diameter: Option<f64>,
    pub expected_hitting_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub algorithm: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub oracle: OracleSummary,
    /// Regret comparator `V*(s0)` per algorithm.
    pub comparators: BTreeMap<String, f64>,
    pub failed: Vec<FailedRun>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub aggregates: Vec<AggregateSeries>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// `V*(s0)`, the SSP diameter and the hitting time of the optimal policy.
/// Uses the best proper policy when costs vanish; when some state cannot
/// reach the goal no policy is proper and only `"none"` is reported.
pub fn oracle_summary(inst: &SspInstance) -> Result<OracleSummary> {
    let communicating = almost_sure_set(inst).iter().all(|&g| g);
    if !communicating {
        return Ok(OracleSummary {
            comparator: "none".into(),
            v_star: None,
            diameter: None,
            expected_hitting_time: None,
        });
    }
    let exact = inst.cost_bounds().0 > 0.0;
    let (v, pol) = if exact {
        exact_value_iteration(inst, DEFAULT_TOL, DEFAULT_MAX_ITER)?
    } else {
        proper_policy_oracle(inst, ORACLE_PERTURBATION, DEFAULT_TOL, DEFAULT_MAX_ITER)?
    };
    let s0 = inst.start();
    let etau = expected_hitting_times(&chain_of(inst, &pol)).ok().map(|t| t[s0]);
    Ok(OracleSummary {
        comparator: if exact { "exact" } else { "proper" }.into(),
        v_star: finite(v[s0]),
        diameter: finite(ssp_diameter(inst)),
        expected_hitting_time: etau.and_then(finite),
    })
}

fn zero_costs(inst: &SspInstance) -> bool {
    !(inst.cost_bounds().0 > 0.0)
}

/// Comparator used for the regret of `alg`.
pub fn comparator(cfg: &ExperimentConfig, inst: &SspInstance, alg: Algorithm) -> Result<f64> {
    let variant = match alg {
        Algorithm::UcsspPenalty => Variant::FinitePenalty {
            j: cfg.penalty_j.unwrap_or(f64::NAN),
        },
        Algorithm::UcsspPerturbed => Variant::Perturbed,
        a if a.is_ucrl_ssp() && zero_costs(inst) => Variant::Perturbed,
        _ => Variant::Standard,
    };
    Ok(oracle_value(inst, variant)?)
}

/// One run of `alg` with `seed`.
pub fn run_one(
    cfg: &ExperimentConfig,
    inst: &SspInstance,
    alg: Algorithm,
    seed: u64,
    v_star: f64,
) -> ssp_core::Result<RunRecord> {
    let agent = |variant| AgentConfig {
        delta: cfg.delta,
        mode: cfg.confidence_mode,
        variant,
        seed,
        stochastic_costs: cfg.stochastic_costs,
        ..AgentConfig::default()
    };
    let ucrl_ssp = |use_pivot_horizon, planning| {
        let (n, a) = (inst.n_states() as f64, inst.n_actions() as f64);
        UcrlSspConfig {
            delta: cfg.delta,
            seed,
            use_pivot_horizon,
            cost_floor: if zero_costs(inst) {
                n * n * a / cfg.k as f64
            } else {
                0.0
            },
            planning,
            ..UcrlSspConfig::default()
        }
    };
    match alg {
        Algorithm::Ucssp => run_ucssp_with(inst, &agent(Variant::Standard), cfg.k, Some(v_star), &mut ()),
        Algorithm::UcsspPenalty => {
            let j = cfg.penalty_j.unwrap_or(f64::NAN);
            run_ucssp_with(inst, &agent(Variant::FinitePenalty { j }), cfg.k, Some(v_star), &mut ())
        }
        Algorithm::UcsspPerturbed => run_ucssp_with(inst, &agent(Variant::Perturbed), cfg.k, Some(v_star), &mut ()),
        Algorithm::Ucrl2 => {
            let u = Ucrl2Config {
                delta: cfg.delta,
                mode: cfg.confidence_mode,
                seed,
                ..Ucrl2Config::default()
            };
            run_ucrl2(inst, &u, cfg.k)
        }
        Algorithm::UcrlSspPivot => run_ucrl_ssp_style(inst, &ucrl_ssp(true, SspPlanning::Extended), cfg.k),
        Algorithm::UcrlSspNoPivot => run_ucrl_ssp_style(inst, &ucrl_ssp(false, SspPlanning::Extended), cfg.k),
        Algorithm::UcrlSspKernelPivot => run_ucrl_ssp_style(inst, &ucrl_ssp(true, SspPlanning::KernelThenVi), cfg.k),
        Algorithm::UcrlSspKernelNoPivot => run_ucrl_ssp_style(inst, &ucrl_ssp(false, SspPlanning::KernelThenVi), cfg.k),
    }
}

pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(root) if cfg.output_dir.is_relative() => PathBuf::from(root).join(&cfg.output_dir),
        _ => cfg.output_dir.clone(),
    }
}

fn run_path(dir: &Path, alg: &str, seed: u64, kind: &str) -> PathBuf {
    dir.join("runs").join(alg).join(format!("seed_{seed}_{kind}"))
}

pub fn episodes_path(dir: &Path, alg: Algorithm, seed: u64) -> PathBuf {
    run_path(dir, alg.name(), seed, "episodes.csv")
}

pub fn attempts_path(dir: &Path, alg: Algorithm, seed: u64) -> PathBuf {
    run_path(dir, alg.name(), seed, "attempts.csv")
}

pub fn aggregate_path(dir: &Path, alg: Algorithm) -> PathBuf {
    dir.join("aggregate").join(format!("{}.csv", alg.name()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Writes the episode CSV, attempt CSV and JSON summary of one run.
pub fn write_run(dir: &Path, alg: Algorithm, rec: &RunRecord) -> Result<()> {
    rec.write_episodes_csv(create(&episodes_path(dir, alg, rec.seed))?)?;
    rec.write_attempts_csv(create(&attempts_path(dir, alg, rec.seed))?)?;
    let summary = rec.summary_json()?;
    fs::write(run_path(dir, alg.name(), rec.seed, "summary.json"), summary + "\n")?;
    Ok(())
}

fn write_aggregate(dir: &Path, alg: Algorithm, agg: &AggregateSeries) -> Result<()> {
    agg.write_csv(create(&aggregate_path(dir, alg))?)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path != root.join(MANIFEST) {
            out.push(path);
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Lists every file under `dir` except the manifest, sorted, with hashes.
pub fn hash_tree(dir: &Path) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let mut entries = files
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap_or(p);
            let path = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            Ok(FileEntry {
                path,
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| BenchError::Layout {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn write_manifest(dir: &Path, manifest: &mut Manifest) -> Result<()> {
    manifest.files = hash_tree(dir)?;
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(manifest)? + "\n")?;
    Ok(())
}

/// Executes every (algorithm, seed) pair in parallel, then writes runs,
/// aggregates, optional plots and the manifest. Failed runs are listed in
/// the manifest rather than aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let inst = cfg.validate()?;
    let dir = resolve_output_dir(cfg);
    fs::create_dir_all(&dir)?;
    let oracle = oracle_summary(&inst)?;
    let mut comparators = BTreeMap::new();
    for &alg in &cfg.algorithms {
        comparators.insert(alg.name().to_string(), comparator(cfg, &inst, alg)?);
    }

    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds().map(move |s| (a, s)))
        .collect();
    let results: Vec<(Algorithm, u64, std::result::Result<RunRecord, String>)> = jobs
        .par_iter()
        .map(|&(alg, seed)| {
            let v_star = comparators[alg.name()];
            (
                alg,
                seed,
                run_one(cfg, &inst, alg, seed, v_star).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut failed = Vec::new();
    let mut curves: BTreeMap<Algorithm, Vec<Vec<f64>>> = BTreeMap::new();
    for (alg, seed, res) in results {
        match res {
            Ok(rec) => {
                write_run(&dir, alg, &rec)?;
                curves.entry(alg).or_default().push(rec.regret_series());
            }
            Err(error) => failed.push(FailedRun {
                algorithm: alg.name().to_string(),
                seed,
                error,
            }),
        }
    }
    let mut aggregates = Vec::new();
    for &alg in &cfg.algorithms {
        if let Some(runs) = curves.get(&alg) {
            let agg = aggregate(alg.name(), comparators[alg.name()], runs)?;
            write_aggregate(&dir, alg, &agg)?;
            aggregates.push(agg);
        }
    }
    if cfg.plot {
        write_plots(&dir, &aggregates)?;
    }
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        oracle,
        comparators,
        failed,
        files: Vec::new(),
    };
    write_manifest(&dir, &mut manifest)?;
    Ok(RunOutcome {
        dir,
        manifest,
        aggregates,
    })
}

/// Recomputes the aggregates of a run directory from its episode CSVs.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<AggregateSeries>> {
    let mut manifest = read_manifest(dir)?;
    let cfg = &manifest.config;
    let mut out = Vec::new();
    for &alg in &cfg.algorithms {
        let mut runs = Vec::new();
        for seed in cfg.seeds() {
            let path = episodes_path(dir, alg, seed);
            if path.exists() {
                runs.push(read_regret_series(&path)?);
            }
        }
        if runs.is_empty() {
            continue;
        }
        let v_star = manifest.comparators.get(alg.name()).copied().unwrap_or(f64::NAN);
        let agg = aggregate(alg.name(), v_star, &runs)?;
        write_aggregate(dir, alg, &agg)?;
        out.push(agg);
    }
    write_manifest(dir, &mut manifest)?;
    Ok(out)
}

pub fn write_plots(dir: &Path, aggregates: &[AggregateSeries]) -> Result<Vec<PathBuf>> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let normalized: Vec<(Vec<f64>, Vec<f64>)> = aggregates
        .iter()
        .map(|a| (a.normalized_mean(), a.normalized_stderr()))
        .collect();
    let raw: Vec<Curve<'_>> = aggregates
        .iter()
        .map(|a| Curve {
            label: &a.algorithm,
            values: &a.mean,
            band: Some(&a.stderr),
        })
        .collect();
    let norm: Vec<Curve<'_>> = aggregates
        .iter()
        .zip(&normalized)
        .map(|(a, (m, s))| Curve {
            label: &a.algorithm,
            values: m,
            band: Some(s),
        })
        .collect();
    let files = [
        (
            plots.join("regret.svg"),
            line_chart("Cumulative regret", "mean regret", &raw),
        ),
        (
            plots.join("regret_normalized.svg"),
            line_chart("Normalised cumulative regret", "regret / V*(s0)", &norm),
        ),
    ];
    let mut written = Vec::new();
    for (path, svg) in files {
        fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub n_runs: usize,
    pub episodes: usize,
    pub final_regret: f64,
    pub stderr: f64,
    pub normalized: f64,
    pub verdict: SublinearityVerdict,
}

/// Summary rows over the recomputed aggregates, optionally with plots.
pub fn report(dir: &Path, plot: bool) -> Result<Vec<ReportRow>> {
    let aggregates = aggregate_dir(dir)?;
    if plot {
        write_plots(dir, &aggregates)?;
        let mut manifest = read_manifest(dir)?;
        write_manifest(dir, &mut manifest)?;
    }
    aggregates
        .iter()
        .map(|a| {
            Ok(ReportRow {
                algorithm: a.algorithm.clone(),
                n_runs: a.n_runs,
                episodes: a.len(),
                final_regret: a.final_mean().unwrap_or(f64::NAN),
                stderr: a.stderr.last().copied().unwrap_or(f64::NAN),
                normalized: a.normalized_mean().last().copied().unwrap_or(f64::NAN),
                verdict: sublinearity_check(&a.mean, 0.1, 0.1)?,
            })
        })
        .collect()
}
