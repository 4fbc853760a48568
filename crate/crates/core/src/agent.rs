//! The two-phase optimistic SSP learner and its variants.
//!
//! Each episode starts with a cost-minimising attempt from `s0` capped at its
//! pivot horizon. If the goal is not reached, unit-cost attempts follow from
//! wherever the agent stands until one of them reaches the goal. Visit counts
//! are frozen during an attempt and folded in between attempts.
//!
//! Variants:
//! - finite penalty: plans with values capped at `J`, runs the first attempt
//!   for a fixed length and falls back on a reset action of cost `J`;
//! - perturbed: adds `k^{-1/3}` to the optimistic costs of the first attempt,
//!   for instances with zero costs.

use serde::{Deserialize, Serialize};

use crate::chain::expected_hitting_times;
use crate::confidence::{ConfidenceMode, ConfidenceModel, TransitionCounts};
use crate::env::{with_reset_action, Environment};
use crate::planner::{evi_ssp, EviParams, OperatorMode, PlanResult, DEFAULT_H_MAX};
use crate::record::{compute_diagnostics, AttemptLog, Diagnostics, EpisodeLog, RunRecord};
use crate::solve::{
    almost_sure_set, exact_value_iteration, proper_policy_oracle, truncated_value_iteration, DEFAULT_MAX_ITER,
    DEFAULT_TOL, ORACLE_PERTURBATION,
};
use crate::{Error, Result, SspInstance, StationaryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Standard,
    FinitePenalty { j: f64 },
    Perturbed,
}

impl Variant {
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            Variant::Standard => "ucssp",
            Variant::FinitePenalty { .. } => "ucssp_J",
            Variant::Perturbed => "ucssp_eta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub delta: f64,
    pub mode: ConfidenceMode,
    pub variant: Variant,
    pub h_max: u64,
    pub seed: u64,
    pub use_pivot_horizon: bool,
    pub stochastic_costs: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            mode: ConfidenceMode::HoeffdingExperimental,
            variant: Variant::Standard,
            h_max: DEFAULT_H_MAX,
            seed: 0,
            use_pivot_horizon: true,
            stochastic_costs: false,
        }
    }
}

/// First-attempt length of the finite-penalty variant,
/// `ceil(6 (J / c_min) log(2 sqrt(k)))`.
pub fn finite_penalty_horizon(j: f64, c_min: f64, k: u64) -> u64 {
    let h = 6.0 * (j / c_min) * (2.0 * (k as f64).sqrt()).ln();
    (h.ceil() as u64).max(1)
}

/// Cost perturbation of the first attempt of episode `k`.
pub fn perturbation(k: u64) -> f64 {
    (k as f64).powf(-1.0 / 3.0)
}

/// Everything a planning call saw, for external checks.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub k: u64,
    pub j: u64,
    pub t: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub start_state: usize,
    pub costs: &'a [f64],
    pub mode: OperatorMode,
}

pub trait PlanObserver {
    fn on_plan(&mut self, ctx: &PlanContext<'_>, model: &ConfidenceModel, plan: &PlanResult);
}

impl PlanObserver for () {
    fn on_plan(&mut self, _: &PlanContext<'_>, _: &ConfidenceModel, _: &PlanResult) {}
}

/// Comparator `V*(s0)` for a variant: exact value iteration, the capped
/// operator, or the best proper policy under zero costs.
pub fn oracle_value(inst: &SspInstance, variant: Variant) -> Result<f64> {
    let s0 = inst.start();
    Ok(match variant {
        Variant::Standard => exact_value_iteration(inst, DEFAULT_TOL, DEFAULT_MAX_ITER)?.0[s0],
        Variant::FinitePenalty { j } => truncated_value_iteration(inst, j, DEFAULT_TOL)?.values[s0],
        Variant::Perturbed => proper_policy_oracle(inst, ORACLE_PERTURBATION, DEFAULT_TOL, DEFAULT_MAX_ITER)?.0[s0],
    })
}

pub fn run_ucssp(inst: &SspInstance, cfg: &AgentConfig, k: u64) -> Result<RunRecord> {
    run_ucssp_with(inst, cfg, k, None, &mut ())
}

pub fn run_ucssp_finite_penalty(inst: &SspInstance, cfg: &AgentConfig, j: f64, k: u64) -> Result<RunRecord> {
    let cfg = AgentConfig {
        variant: Variant::FinitePenalty { j },
        ..*cfg
    };
    run_ucssp_with(inst, &cfg, k, None, &mut ())
}

pub fn run_ucssp_perturbed(inst: &SspInstance, cfg: &AgentConfig, k: u64) -> Result<RunRecord> {
    let cfg = AgentConfig {
        variant: Variant::Perturbed,
        ..*cfg
    };
    run_ucssp_with(inst, &cfg, k, None, &mut ())
}

struct Attempt {
    steps: u64,
    cost: f64,
    reached: bool,
    state: usize,
}

struct Learner {
    env: Environment,
    model: ConfidenceModel,
    nu: TransitionCounts,
    t: u64,
}

impl Learner {
    /// Runs `policy` for at most `horizon` steps from `state`.
    fn attempt(&mut self, policy: &StationaryPolicy, mut state: usize, horizon: u64) -> Result<Attempt> {
        let goal = self.env.n_states();
        let mut out = Attempt {
            steps: 0,
            cost: 0.0,
            reached: false,
            state,
        };
        while out.steps < horizon {
            let a = policy.action(state);
            let (next, c) = self.env.step(a)?;
            self.nu.record(state, a, next);
            if self.model.stochastic_costs() {
                self.model.update_cost_bounds(state, a, c)?;
            }
            out.steps += 1;
            out.cost += c;
            self.t += 1;
            if next == goal {
                out.reached = true;
                break;
            }
            state = next;
        }
        out.state = state;
        self.model.fold(&mut self.nu);
        Ok(out)
    }
}

/// Runs `k_total` episodes. `oracle` overrides the comparator value; the
/// observer sees every planning call.
pub fn run_ucssp_with(
    inst: &SspInstance,
    cfg: &AgentConfig,
    k_total: u64,
    oracle: Option<f64>,
    observer: &mut dyn PlanObserver,
) -> Result<RunRecord> {
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {}",
            cfg.delta
        )));
    }
    if cfg.h_max < 2 {
        return Err(Error::InvalidParameter("h_max must be at least 2".into()));
    }
    let (c_min, _) = inst.cost_bounds();
    match cfg.variant {
        Variant::Standard => {
            if !(c_min > 0.0) {
                return Err(Error::Precondition("the standard learner needs c_min > 0".into()));
            }
            if let Some(s) = almost_sure_set(inst).iter().position(|&g| !g) {
                return Err(Error::Precondition(format!(
                    "instance is not SSP-communicating (state {s} cannot reach the goal)"
                )));
            }
        }
        Variant::FinitePenalty { j } => {
            if !(c_min > 0.0) {
                return Err(Error::Precondition("the finite-penalty learner needs c_min > 0".into()));
            }
            if !(j > 0.0) {
                return Err(Error::InvalidParameter(format!("penalty J must be positive, got {j}")));
            }
        }
        Variant::Perturbed => {}
    }
    let v_star = match oracle {
        Some(v) => v,
        None => oracle_value(inst, cfg.variant)?,
    };

    let (env_inst, reset_action) = match cfg.variant {
        Variant::FinitePenalty { j } => (with_reset_action(inst, j)?, Some(inst.n_actions())),
        _ => (inst.clone(), None),
    };
    let (n, n_actions) = (env_inst.n_states(), env_inst.n_actions());
    let (_, c_max) = env_inst.cost_bounds();
    let env = if cfg.stochastic_costs {
        Environment::with_cost_noise(env_inst, cfg.seed)?
    } else {
        Environment::new(env_inst, cfg.seed)
    };
    let mut model = ConfidenceModel::new(n, n_actions, cfg.mode, cfg.delta)?;
    if cfg.stochastic_costs {
        let (lo, hi) = env.cost_bounds();
        model = model.with_stochastic_costs(lo, hi);
    }
    let mut learner = Learner {
        env,
        model,
        nu: TransitionCounts::new(n, n_actions),
        t: 1,
    };
    let mut unit_costs = vec![1.0; n * n_actions];
    let disable_reset = |costs: &mut [f64]| {
        if let Some(r) = reset_action {
            for s in 0..n {
                costs[s * n_actions + r] = f64::INFINITY;
            }
        }
    };
    disable_reset(&mut unit_costs);

    let mut record = RunRecord {
        algorithm: cfg.variant.algorithm_name().to_string(),
        seed: cfg.seed,
        v_star,
        c_max,
        episodes: Vec::with_capacity(k_total as usize),
        attempts: Vec::new(),
        diagnostics: Diagnostics::default(),
    };
    let mut g: u64 = 0;

    for k in 1..=k_total {
        let s0 = learner.env.reset();
        let mut costs = match learner.env.known_costs() {
            Some(c) => c.to_vec(),
            None => learner.model.optimistic_costs(),
        };
        disable_reset(&mut costs);
        let t0 = learner.t;
        let (epsilon, mode) = match cfg.variant {
            Variant::Standard => (c_min / (2.0 * t0 as f64), OperatorMode::Plain),
            Variant::FinitePenalty { j } => (c_min / (2.0 * t0 as f64), OperatorMode::Truncated(j)),
            Variant::Perturbed => (c_max / t0 as f64, OperatorMode::Perturbed(perturbation(k))),
        };
        let gamma = 1.0 / (k as f64).sqrt();
        let params = EviParams {
            h_max: cfg.h_max,
            ..EviParams::new(epsilon, gamma, mode)
        };
        let plan = evi_ssp(&learner.model, &costs, &params)?;
        observer.on_plan(
            &PlanContext {
                k,
                j: 0,
                t: t0,
                epsilon,
                gamma,
                start_state: s0,
                costs: &costs,
                mode,
            },
            &learner.model,
            &plan,
        );
        let (horizon, capped) = match cfg.variant {
            Variant::FinitePenalty { j } => (finite_penalty_horizon(j, c_min, k), false),
            _ if cfg.use_pivot_horizon => (plan.pivot.h, plan.pivot.capped),
            _ => (cfg.h_max, true),
        };
        let etau = etau_from(&plan, s0);
        let first = learner.attempt(&plan.policy, s0, horizon)?;
        record.attempts.push(AttemptLog {
            k,
            j: 0,
            t_start: t0,
            horizon,
            horizon_capped: capped,
            steps: first.steps,
            cost: first.cost,
            reached_goal: first.reached,
            start_state: s0,
            vtilde_start: plan.v_tilde[s0],
            etau,
            epsilon,
            gamma,
            residual: plan.residual,
            first_action: plan.policy.action(s0),
        });
        let mut episode = EpisodeLog {
            k,
            cost: first.cost,
            len: first.steps,
            phase1_steps: first.steps,
            phase2_steps: 0,
            n_phase2_attempts: 0,
            h_k0: horizon,
            vtilde_s0: plan.v_tilde[s0],
            etau_s0: etau,
            phase1_cost: first.cost,
            cum_regret: 0.0,
        };

        let mut state = first.state;
        let mut reached = first.reached;
        if !reached {
            if let Some(r) = reset_action {
                let (next, c) = learner.env.step(r)?;
                learner.nu.record(state, r, next);
                if learner.model.stochastic_costs() {
                    learner.model.update_cost_bounds(state, r, c)?;
                }
                learner.model.fold(&mut learner.nu);
                learner.t += 1;
                episode.cost += c;
                episode.len += 1;
                episode.phase2_steps += 1;
                reached = true;
            }
        }
        let mut j = 0;
        while !reached {
            j += 1;
            g += 1;
            let tj = learner.t;
            let epsilon = 1.0 / (2.0 * tj as f64);
            let gamma = 1.0 / (g as f64).sqrt();
            let params = EviParams {
                h_max: cfg.h_max,
                ..EviParams::new(epsilon, gamma, OperatorMode::Plain)
            };
            let plan = evi_ssp(&learner.model, &unit_costs, &params)?;
            observer.on_plan(
                &PlanContext {
                    k,
                    j,
                    t: tj,
                    epsilon,
                    gamma,
                    start_state: state,
                    costs: &unit_costs,
                    mode: OperatorMode::Plain,
                },
                &learner.model,
                &plan,
            );
            let (horizon, capped) = if cfg.use_pivot_horizon {
                (plan.pivot.h, plan.pivot.capped)
            } else {
                (cfg.h_max, true)
            };
            let att = learner.attempt(&plan.policy, state, horizon)?;
            record.attempts.push(AttemptLog {
                k,
                j,
                t_start: tj,
                horizon,
                horizon_capped: capped,
                steps: att.steps,
                cost: att.cost,
                reached_goal: att.reached,
                start_state: state,
                vtilde_start: plan.v_tilde[state],
                etau: etau_from(&plan, state),
                epsilon,
                gamma,
                residual: plan.residual,
                first_action: plan.policy.action(state),
            });
            episode.cost += att.cost;
            episode.len += att.steps;
            episode.phase2_steps += att.steps;
            episode.n_phase2_attempts += 1;
            state = att.state;
            reached = att.reached;
        }
        record.episodes.push(episode);
    }
    compute_diagnostics(&mut record, v_star);
    Ok(record)
}

fn etau_from(plan: &PlanResult, s: usize) -> f64 {
    expected_hitting_times(&plan.q_tilde)
        .map(|v| v[s])
        .unwrap_or(f64::INFINITY)
}
