//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssp_core::confidence::ConfidenceMode;
use ssp_core::env::Scenario;
use ssp_core::solve::almost_sure_set;
use ssp_core::SspInstance;

use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ucssp")]
    Ucssp,
    #[serde(rename = "ucssp_J")]
    UcsspPenalty,
    #[serde(rename = "ucssp_eta")]
    UcsspPerturbed,
    #[serde(rename = "ucrl2")]
    Ucrl2,
    #[serde(rename = "ucrl_ssp+pivot")]
    UcrlSspPivot,
    #[serde(rename = "ucrl_ssp-pivot")]
    UcrlSspNoPivot,
    #[serde(rename = "ucrl_ssp_kernel+pivot")]
    UcrlSspKernelPivot,
    #[serde(rename = "ucrl_ssp_kernel-pivot")]
    UcrlSspKernelNoPivot,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Ucssp,
        Algorithm::UcsspPenalty,
        Algorithm::UcsspPerturbed,
        Algorithm::Ucrl2,
        Algorithm::UcrlSspPivot,
        Algorithm::UcrlSspNoPivot,
        Algorithm::UcrlSspKernelPivot,
        Algorithm::UcrlSspKernelNoPivot,
    ];

    /// Name used in run records, file names and configs.
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ucssp => "ucssp",
            Algorithm::UcsspPenalty => "ucssp_J",
            Algorithm::UcsspPerturbed => "ucssp_eta",
            Algorithm::Ucrl2 => "ucrl2",
            Algorithm::UcrlSspPivot => "ucrl_ssp+pivot",
            Algorithm::UcrlSspNoPivot => "ucrl_ssp-pivot",
            Algorithm::UcrlSspKernelPivot => "ucrl_ssp_kernel+pivot",
            Algorithm::UcrlSspKernelNoPivot => "ucrl_ssp_kernel-pivot",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn is_ucrl_ssp(self) -> bool {
        matches!(
            self,
            Algorithm::UcrlSspPivot
                | Algorithm::UcrlSspNoPivot
                | Algorithm::UcrlSspKernelPivot
                | Algorithm::UcrlSspKernelNoPivot
        )
    }
}

fn default_delta() -> f64 {
    0.1
}

fn default_mode() -> ConfidenceMode {
    ConfidenceMode::HoeffdingExperimental
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithms: Vec<Algorithm>,
    /// Episodes per run.
    pub k: u64,
    pub repetitions: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Radii used by the UC-SSP variants and UCRL2. The SSP-style baseline
    /// always uses Bernstein sets.
    #[serde(default = "default_mode")]
    pub confidence_mode: ConfidenceMode,
    pub output_dir: PathBuf,
    /// Penalty `J` of `ucssp_J`.
    #[serde(default)]
    pub penalty_j: Option<f64>,
    #[serde(default)]
    pub stochastic_costs: bool,
    /// Also render SVG charts of the aggregates.
    #[serde(default)]
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the config and builds its instance.
    pub fn validate(&self) -> Result<SspInstance> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms listed".into());
        }
        let unique: BTreeSet<_> = self.algorithms.iter().collect();
        if unique.len() != self.algorithms.len() {
            return bad("algorithms are listed more than once".into());
        }
        let inst = self.scenario.build()?;
        let (c_min, _) = inst.cost_bounds();
        let communicating = almost_sure_set(&inst).iter().all(|&g| g);
        for &alg in &self.algorithms {
            let name = alg.name();
            match alg {
                Algorithm::Ucssp if !(c_min > 0.0) => return bad(format!("{name} needs positive costs")),
                Algorithm::Ucssp if !communicating => {
                    return bad(format!("{name} needs every state to reach the goal"))
                }
                Algorithm::UcsspPenalty => {
                    if !(c_min > 0.0) {
                        return bad(format!("{name} needs positive costs"));
                    }
                    match self.penalty_j {
                        Some(j) if j > 0.0 && j.is_finite() => {}
                        _ => return bad(format!("{name} needs a positive penalty_j")),
                    }
                }
                Algorithm::Ucrl2 if !inst.has_uniform_costs() => return bad(format!("{name} needs uniform costs")),
                Algorithm::Ucrl2 if !self.confidence_mode.is_l1() => {
                    return bad(format!("{name} needs an L1 confidence mode"))
                }
                Algorithm::Ucrl2 if !communicating => {
                    return bad(format!("{name} needs every state to reach the goal"))
                }
                a if a.is_ucrl_ssp() && !communicating => {
                    return bad(format!("{name} needs every state to reach the goal"))
                }
                _ => {}
            }
            if self.stochastic_costs
                && !matches!(
                    alg,
                    Algorithm::Ucssp | Algorithm::UcsspPenalty | Algorithm::UcsspPerturbed
                )
            {
                return bad(format!("{name} does not support stochastic costs"));
            }
        }
        Ok(inst)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repetitions).map(|r| self.base_seed + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn parses_with_defaults() {
        let cfg = config(
            r#"{"scenario": {"name": "gridworld-sandpit", "beta": 0.1},
                "algorithms": ["ucssp", "ucrl_ssp+pivot"], "k": 10, "repetitions": 2,
                "output_dir": "out"}"#,
        );
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.confidence_mode, ConfidenceMode::HoeffdingExperimental);
        assert_eq!(cfg.base_seed, 0);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.seeds().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::from_name(a.name()), Some(a));
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.name()));
        }
    }

    #[test]
    fn rejects_invalid_combinations() {
        let base = r#""k": 10, "repetitions": 1, "output_dir": "out""#;
        let cases = [
            r#""scenario": {"name": "gridworld-sandpit", "beta": 0.1}, "algorithms": ["ucrl2"]"#,
            r#""scenario": {"name": "gridworld-zero", "beta": 0.4}, "algorithms": ["ucssp"]"#,
            r#""scenario": {"name": "toy-dead-end", "c_min": 1, "c_max": 3}, "algorithms": ["ucssp_J"]"#,
            r#""scenario": {"name": "toy-dead-end", "c_min": 1, "c_max": 3}, "algorithms": ["ucssp"]"#,
            r#""scenario": {"name": "gridworld-uniform"}, "algorithms": []"#,
            r#""scenario": {"name": "gridworld-uniform"}, "algorithms": ["ucssp", "ucssp"]"#,
        ];
        for case in cases {
            let cfg = config(&format!("{{{case}, {base}}}"));
            assert!(matches!(cfg.validate(), Err(BenchError::Config(_))), "{case}");
        }
        let mut ok = config(&format!(
            r#"{{"scenario": {{"name": "toy-dead-end", "c_min": 1, "c_max": 3}}, "algorithms": ["ucssp_J"], "penalty_j": 4, {base}}}"#
        ));
        assert!(ok.validate().is_ok());
        ok.repetitions = 0;
        assert!(ok.validate().is_err());
    }
}
