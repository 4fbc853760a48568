//! Infinite-horizon baselines.
//!
//! [`build_m_infinity`] turns an SSP into an average-reward MDP whose goal
//! teleports back to `s0` with reward 1. [`run_ucrl2`] learns on that MDP
//! with doubling epochs; [`run_ucrl_ssp_style`] keeps the doubling epochs but
//! plans with extended SSP value iteration on Bernstein sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agent::{oracle_value, Variant};
use crate::chain::chain_of;
use crate::confidence::{inner_min_l1, ConfidenceMode, ConfidenceModel, TransitionCounts};
use crate::env::Environment;
use crate::planner::{evi_ssp, pivot_horizon, EviParams, OperatorMode, PivotHorizon, DEFAULT_H_MAX};
use crate::record::{compute_diagnostics, AttemptLog, Diagnostics, EpisodeLog, RunRecord};
use crate::{solve, Error, Result, SspInstance, StationaryPolicy};

/// The reward-based reduction: states `0..=n_states` with the goal an
/// ordinary state (index `n_states`) that moves to `s0` under every action.
#[derive(Debug, Clone, PartialEq)]
pub struct MInfinity {
    pub n_states: usize,
    pub n_actions: usize,
    pub start: usize,
    /// `kernel[(s * n_actions + a) * n_states + y]`.
    pub kernel: Vec<f64>,
    pub reward: Vec<f64>,
}

impl MInfinity {
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.kernel[i..i + self.n_states]
    }

    pub fn goal(&self) -> usize {
        self.n_states - 1
    }
}

pub fn build_m_infinity(inst: &SspInstance) -> MInfinity {
    let n = inst.n_states() + 1;
    let a = inst.n_actions();
    let mut kernel = Vec::with_capacity(n * a * n);
    for s in 0..inst.n_states() {
        for b in 0..a {
            kernel.extend_from_slice(inst.row(s, b));
        }
    }
    for _ in 0..a {
        let mut row = vec![0.0; n];
        row[inst.start()] = 1.0;
        kernel.extend(row);
    }
    let mut reward = vec![0.0; n];
    reward[n - 1] = 1.0;
    MInfinity {
        n_states: n,
        n_actions: a,
        start: inst.start(),
        kernel,
        reward,
    }
}

/// Transition matrix of `pol` on `m` (the goal row is the same for every
/// action).
fn policy_matrix(m: &MInfinity, pol: &StationaryPolicy) -> DMatrix<f64> {
    let n = m.n_states;
    DMatrix::from_fn(n, n, |s, y| {
        let a = if s == m.goal() { 0 } else { pol.action(s) };
        m.row(s, a)[y]
    })
}

/// Long-run average of `reward` from `m.start` under `pol`, computed from
/// the closed classes of the chain, their stationary laws and the absorption
/// probabilities into them.
pub fn long_run_average(m: &MInfinity, pol: &StationaryPolicy, reward: &[f64]) -> f64 {
    let n = m.n_states;
    let p = policy_matrix(m, pol);
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![i];
        row[i] = true;
        while let Some(x) = stack.pop() {
            for y in 0..n {
                if p[(x, y)] > 0.0 && !row[y] {
                    row[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    let recurrent: Vec<bool> = (0..n).map(|i| (0..n).all(|j| !reach[i][j] || reach[j][i])).collect();
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if recurrent[i] && class_of[i] == usize::MAX {
            let members: Vec<usize> = (0..n).filter(|&j| reach[i][j]).collect();
            for &j in &members {
                class_of[j] = classes.len();
            }
            classes.push(members);
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !recurrent[i]).collect();

    let mut total = 0.0;
    for (c, members) in classes.iter().enumerate() {
        // Stationary law on the class: pi (P_C - I) = 0, sum pi = 1.
        let k = members.len();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (r, &x) in members.iter().enumerate() {
            for (col, &y) in members.iter().enumerate() {
                a[(col, r)] = p[(x, y)] - if x == y { 1.0 } else { 0.0 };
            }
        }
        for col in 0..k {
            a[(k - 1, col)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(k);
        rhs[k - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&rhs)
            .expect("irreducible class has a unique stationary law");
        let class_reward: f64 = members.iter().zip(pi.iter()).map(|(&x, w)| w * reward[x]).sum();

        let absorb = if recurrent[m.start] {
            if class_of[m.start] == c {
                1.0
            } else {
                0.0
            }
        } else {
            // h = P_TT h + P_TC 1 over transient states.
            let t = transient.len();
            let mut lhs = DMatrix::<f64>::identity(t, t);
            let mut b = DVector::<f64>::zeros(t);
            for (r, &x) in transient.iter().enumerate() {
                for (col, &y) in transient.iter().enumerate() {
                    lhs[(r, col)] -= p[(x, y)];
                }
                b[r] = members.iter().map(|&y| p[(x, y)]).sum();
            }
            let h = lhs.lu().solve(&b).expect("transient block is invertible");
            let pos = transient
                .iter()
                .position(|&x| x == m.start)
                .expect("start is transient");
            h[pos]
        };
        total += absorb * class_reward;
    }
    total
}

/// Gain of `pol` in `m`: long-run frequency of goal visits from `s0`.
pub fn stationary_gain(m: &MInfinity, pol: &StationaryPolicy) -> f64 {
    long_run_average(m, pol, &m.reward)
}

/// Long-run average cost of `pol` on `inst`'s reduction (the goal step is
/// free).
pub fn average_cost(inst: &SspInstance, pol: &StationaryPolicy) -> f64 {
    let m = build_m_infinity(inst);
    let mut cost: Vec<f64> = (0..inst.n_states()).map(|s| inst.cost(s, pol.action(s))).collect();
    cost.push(0.0);
    long_run_average(&m, pol, &cost)
}

/// Diameter of the reduction: worst pairwise minimal expected travel time.
/// Only evaluated for at most `max_states` states; `None` above that.
pub fn m_infinity_diameter(m: &MInfinity, max_states: usize) -> Option<f64> {
    let n = m.n_states;
    if n > max_states {
        return None;
    }
    let mut worst: f64 = 0.0;
    for target in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != target).collect();
        let index = |y: usize| others.iter().position(|&x| x == y).unwrap_or(n - 1);
        let kernel = others
            .iter()
            .map(|&s| {
                (0..m.n_actions)
                    .map(|a| {
                        let mut row = vec![0.0; n];
                        for (y, &p) in m.row(s, a).iter().enumerate() {
                            row[index(y)] += p;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let inst = SspInstance::new(
            n - 1,
            m.n_actions,
            0,
            (1.0, 1.0),
            vec![vec![1.0; m.n_actions]; n - 1],
            kernel,
        )
        .expect("shapes follow from m");
        worst = worst.max(solve::ssp_diameter(&inst));
    }
    Some(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ucrl2Config {
    pub delta: f64,
    pub mode: ConfidenceMode,
    pub seed: u64,
    /// Self-loop weight of the aperiodicity transform, in `(0, 1]`.
    pub alpha: f64,
    pub max_sweeps: u64,
}

impl Default for Ucrl2Config {
    fn default() -> Self {
        Self {
            delta: 0.1,
            mode: ConfidenceMode::HoeffdingExperimental,
            seed: 0,
            alpha: 0.5,
            max_sweeps: 1_000_000,
        }
    }
}

/// Result of average-reward extended value iteration.
#[derive(Debug, Clone)]
pub struct GainPlan {
    pub policy: StationaryPolicy,
    pub gain: f64,
    /// `span(u_{m+1} - u_m)` at termination.
    pub span: f64,
    pub sweeps: u64,
}

/// Extended value iteration on the reduction with known rewards and a known
/// goal row, stopped on the span of successive differences.
pub fn gain_evi(model: &ConfidenceModel, start: usize, tol: f64, alpha: f64, max_sweeps: u64) -> Result<GainPlan> {
    let n = model.n_states();
    let a_n = model.n_actions();
    let w = n + 1;
    let mut p_hat = vec![0.0; n * a_n * w];
    let mut beta = vec![0.0; n * a_n];
    for s in 0..n {
        for a in 0..a_n {
            let i = s * a_n + a;
            model.p_hat_into(s, a, &mut p_hat[i * w..(i + 1) * w]);
            beta[i] = model.radius_l1(s, a)?;
        }
    }
    let mut u = vec![0.0_f64; w];
    let mut next = vec![0.0; w];
    let mut order: Vec<usize> = Vec::with_capacity(w);
    let mut row = vec![0.0; w];
    let mut argmax = vec![0; n];
    for sweep in 1..=max_sweeps {
        order.clear();
        order.extend(0..w);
        order.sort_by(|&i, &j| u[j].total_cmp(&u[i]).then(i.cmp(&j)));
        for s in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for a in 0..a_n {
                let i = s * a_n + a;
                inner_min_l1(&p_hat[i * w..(i + 1) * w], beta[i], &order, &mut row);
                let x: f64 = row.iter().zip(&u).map(|(p, v)| p * v).sum();
                if x > best.1 {
                    best = (a, x);
                }
            }
            next[s] = (1.0 - alpha) * u[s] + alpha * best.1;
            argmax[s] = best.0;
        }
        next[n] = (1.0 - alpha) * u[n] + alpha * (1.0 + u[start]);
        let (lo, hi) = next
            .iter()
            .zip(&u)
            .map(|(x, y)| x - y)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), d| (l.min(d), h.max(d)));
        if hi - lo < tol {
            return Ok(GainPlan {
                policy: StationaryPolicy::new(argmax, a_n)?,
                gain: 0.5 * (lo + hi) / alpha,
                span: hi - lo,
                sweeps: sweep,
            });
        }
        // Keep iterates bounded; the span is shift invariant.
        let shift = next[n];
        for (x, y) in u.iter_mut().zip(&next) {
            *x = y - shift;
        }
    }
    Err(Error::NonContraction {
        state: 0,
        sweeps: max_sweeps,
    })
}

fn baseline_record(algorithm: &str, seed: u64, v_star: f64, c_max: f64) -> RunRecord {
    RunRecord {
        algorithm: algorithm.to_string(),
        seed,
        v_star,
        c_max,
        episodes: Vec::new(),
        attempts: Vec::new(),
        diagnostics: Diagnostics::default(),
    }
}

fn episode_log(k: u64, cost: f64, len: u64, vtilde: f64) -> EpisodeLog {
    EpisodeLog {
        k,
        cost,
        len,
        phase1_steps: len,
        phase2_steps: 0,
        n_phase2_attempts: 0,
        h_k0: 0,
        vtilde_s0: vtilde,
        etau_s0: f64::NAN,
        phase1_cost: cost,
        cum_regret: 0.0,
    }
}

/// UCRL2 on the reduction of a uniform-cost instance. Epochs end when the
/// in-epoch count of the played pair reaches its count at epoch start.
/// Each epoch is logged as an attempt with `j` the epoch index.
pub fn run_ucrl2(inst: &SspInstance, cfg: &Ucrl2Config, k_total: u64) -> Result<RunRecord> {
    if !inst.has_uniform_costs() {
        return Err(Error::Precondition("UCRL2 baseline needs uniform costs".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1], got {}",
            cfg.alpha
        )));
    }
    let v_star = oracle_value(inst, Variant::Standard)?;
    let (n, a_n) = (inst.n_states(), inst.n_actions());
    let s0 = inst.start();
    let mut env = Environment::new(inst.clone(), cfg.seed);
    let mut model = ConfidenceModel::new(n, a_n, cfg.mode, cfg.delta)?;
    let mut nu = TransitionCounts::new(n, a_n);
    let mut record = baseline_record("ucrl2", cfg.seed, v_star, inst.cost_bounds().1);

    let mut t: u64 = 1;
    let mut k: u64 = 1;
    let mut state = Some(env.reset());
    let (mut ep_cost, mut ep_len) = (0.0, 0u64);
    let mut epoch = 0;
    while k <= k_total {
        epoch += 1;
        let tol = 1.0 / (t as f64).sqrt();
        let plan = gain_evi(&model, s0, tol, cfg.alpha, cfg.max_sweeps)?;
        let mut log = AttemptLog {
            k,
            j: epoch,
            t_start: t,
            horizon: 0,
            horizon_capped: false,
            steps: 0,
            cost: 0.0,
            reached_goal: false,
            start_state: state.unwrap_or(n),
            vtilde_start: plan.gain,
            etau: f64::NAN,
            epsilon: tol,
            gamma: 0.0,
            residual: plan.span,
            first_action: plan.policy.action(s0),
        };
        loop {
            let Some(s) = state else {
                // Goal step of the reduction: teleport back to s0.
                record.episodes.push(episode_log(k, ep_cost, ep_len, plan.gain));
                (ep_cost, ep_len) = (0.0, 0);
                k += 1;
                t += 1;
                if k > k_total {
                    break;
                }
                state = Some(env.reset());
                continue;
            };
            let a = plan.policy.action(s);
            let (next, c) = env.step(a)?;
            nu.record(s, a, next);
            t += 1;
            ep_cost += c;
            ep_len += 1;
            log.steps += 1;
            log.cost += c;
            state = (next < n).then_some(next);
            if state.is_none() {
                log.reached_goal = true;
            }
            if nu.n(s, a) >= model.counts().n(s, a).max(1) {
                break;
            }
        }
        model.fold(&mut nu);
        record.attempts.push(log);
    }
    compute_diagnostics(&mut record, v_star);
    Ok(record)
}

/// How the SSP-style baseline turns its confidence sets into a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SspPlanning {
    /// Extended value iteration over the per-element boxes.
    #[default]
    Extended,
    /// Value iteration on the single kernel from [`shrunk_kernel_instance`].
    KernelThenVi,
}

/// Lowers every non-goal entry of `p_hat` by its Bernstein radius (floored
/// at 0) and moves the freed mass to the goal.
pub fn shrunk_kernel_instance(model: &ConfidenceModel, costs: &[f64]) -> Result<SspInstance> {
    let (n, a_n) = (model.n_states(), model.n_actions());
    if costs.len() != n * a_n {
        return Err(Error::Dimension(format!(
            "expected {} costs, got {}",
            n * a_n,
            costs.len()
        )));
    }
    let mut p_hat = vec![0.0; n + 1];
    let mut radii = vec![0.0; n + 1];
    let mut kernel = Vec::with_capacity(n);
    for s in 0..n {
        let mut rows = Vec::with_capacity(a_n);
        for a in 0..a_n {
            model.p_hat_into(s, a, &mut p_hat);
            model.radii_bernstein_into(s, a, &p_hat, &mut radii);
            let mut row: Vec<f64> = (0..n).map(|y| (p_hat[y] - radii[y]).max(0.0)).collect();
            let kept: f64 = row.iter().sum();
            row.push((1.0 - kept).max(0.0));
            rows.push(row);
        }
        kernel.push(rows);
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let table = costs.chunks(a_n).map(<[f64]>::to_vec).collect();
    SspInstance::new(n, a_n, 0, (lo, hi), table, kernel)
}

struct SspPlan {
    v: Vec<f64>,
    policy: StationaryPolicy,
    pivot: PivotHorizon,
    residual: f64,
}

fn plan_ssp(model: &ConfidenceModel, costs: &[f64], cfg: &UcrlSspConfig, epsilon: f64, gamma: f64) -> Result<SspPlan> {
    match cfg.planning {
        SspPlanning::Extended => {
            let params = EviParams {
                h_max: cfg.h_max,
                ..EviParams::new(epsilon, gamma, OperatorMode::Plain)
            };
            let plan = evi_ssp(model, costs, &params)?;
            Ok(SspPlan {
                v: plan.v_tilde.0,
                policy: plan.policy,
                pivot: plan.pivot,
                residual: plan.residual,
            })
        }
        SspPlanning::KernelThenVi => {
            let shrunk = shrunk_kernel_instance(model, costs)?;
            let (v, policy) = solve::exact_value_iteration(&shrunk, epsilon, solve::DEFAULT_MAX_ITER)?;
            let pivot = pivot_horizon(&chain_of(&shrunk, &policy), gamma, cfg.h_max)?;
            let residual = solve::bellman_residual(&shrunk, &v, None);
            Ok(SspPlan {
                v: v.0,
                policy,
                pivot,
                residual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcrlSspConfig {
    pub delta: f64,
    pub seed: u64,
    pub use_pivot_horizon: bool,
    /// Costs below this are raised to it for planning.
    pub cost_floor: f64,
    /// End the epoch whenever the goal is reached.
    pub replan_at_goal: bool,
    pub h_max: u64,
    pub planning: SspPlanning,
}

impl Default for UcrlSspConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            seed: 0,
            use_pivot_horizon: true,
            cost_floor: 0.0,
            replan_at_goal: false,
            h_max: DEFAULT_H_MAX,
            planning: SspPlanning::Extended,
        }
    }
}

/// Doubling-epoch learner planning with extended SSP value iteration on
/// Bernstein sets and costs `max(c, cost_floor)`. With the pivot horizon on,
/// an epoch also ends after `H` steps.
pub fn run_ucrl_ssp_style(inst: &SspInstance, cfg: &UcrlSspConfig, k_total: u64) -> Result<RunRecord> {
    let (n, a_n) = (inst.n_states(), inst.n_actions());
    let costs: Vec<f64> = inst.cost_table().iter().map(|&c| c.max(cfg.cost_floor)).collect();
    let c_min_eff = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(c_min_eff > 0.0) {
        return Err(Error::Precondition("planning costs need a positive floor".into()));
    }
    let v_star = if inst.cost_bounds().0 > 0.0 {
        oracle_value(inst, Variant::Standard)?
    } else {
        oracle_value(inst, Variant::Perturbed)?
    };
    let name = match (cfg.planning, cfg.use_pivot_horizon) {
        (SspPlanning::Extended, true) => "ucrl_ssp+pivot",
        (SspPlanning::Extended, false) => "ucrl_ssp-pivot",
        (SspPlanning::KernelThenVi, true) => "ucrl_ssp_kernel+pivot",
        (SspPlanning::KernelThenVi, false) => "ucrl_ssp_kernel-pivot",
    };
    let s0 = inst.start();
    let mut env = Environment::new(inst.clone(), cfg.seed);
    let mut model = ConfidenceModel::new(n, a_n, ConfidenceMode::Bernstein, cfg.delta)?;
    let mut nu = TransitionCounts::new(n, a_n);
    let mut record = baseline_record(name, cfg.seed, v_star, inst.cost_bounds().1);

    let mut t: u64 = 1;
    let mut k: u64 = 1;
    let mut state = env.reset();
    let (mut ep_cost, mut ep_len) = (0.0, 0u64);
    let mut epoch = 0;
    'run: while k <= k_total {
        epoch += 1;
        let epsilon = c_min_eff / (2.0 * t as f64);
        let gamma = 1.0 / (k as f64).sqrt();
        let plan = plan_ssp(&model, &costs, cfg, epsilon, gamma)?;
        let horizon = if cfg.use_pivot_horizon { plan.pivot.h } else { u64::MAX };
        let mut log = AttemptLog {
            k,
            j: epoch,
            t_start: t,
            horizon: if cfg.use_pivot_horizon { horizon } else { 0 },
            horizon_capped: plan.pivot.capped,
            steps: 0,
            cost: 0.0,
            reached_goal: false,
            start_state: state,
            vtilde_start: plan.v[state],
            etau: f64::NAN,
            epsilon,
            gamma,
            residual: plan.residual,
            first_action: plan.policy.action(state),
        };
        let vtilde_s0 = plan.v[s0];
        loop {
            let a = plan.policy.action(state);
            let (next, c) = env.step(a)?;
            nu.record(state, a, next);
            t += 1;
            ep_cost += c;
            ep_len += 1;
            log.steps += 1;
            log.cost += c;
            let doubled = nu.n(state, a) >= model.counts().n(state, a).max(1);
            if next == n {
                log.reached_goal = true;
                record.episodes.push(episode_log(k, ep_cost, ep_len, vtilde_s0));
                (ep_cost, ep_len) = (0.0, 0);
                k += 1;
                state = env.reset();
                if k > k_total {
                    model.fold(&mut nu);
                    record.attempts.push(log);
                    break 'run;
                }
                if cfg.replan_at_goal {
                    break;
                }
            } else {
                state = next;
            }
            if doubled || log.steps >= horizon {
                break;
            }
        }
        model.fold(&mut nu);
        record.attempts.push(log);
    }
    compute_diagnostics(&mut record, v_star);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_of, expected_hitting_times};
    use crate::env::{make_gridworld, make_sspcom_toy, make_two_state_toy, GridScenario};

    fn uniform_toy() -> SspInstance {
        make_two_state_toy(1.0, 1.0).unwrap()
    }

    #[test]
    fn reduction_of_the_toy() {
        let m = build_m_infinity(&uniform_toy());
        assert_eq!(m.n_states, 2);
        assert_eq!(m.row(1, 0), &[1.0, 0.0]);
        assert_eq!(m.row(1, 1), &[1.0, 0.0]);
        assert_eq!(m.row(0, 1), &[0.0, 1.0]);
        assert_eq!(m.reward, vec![0.0, 1.0]);
        assert!((stationary_gain(&m, &StationaryPolicy::constant(1, 1)) - 0.5).abs() < 1e-12);
        assert_eq!(stationary_gain(&m, &StationaryPolicy::constant(1, 0)), 0.0);
    }

    #[test]
    fn average_cost_dichotomy() {
        let inst = make_two_state_toy(1.0, 3.0).unwrap();
        assert!((average_cost(&inst, &StationaryPolicy::constant(1, 0)) - 1.0).abs() < 1e-12);
        assert!((average_cost(&inst, &StationaryPolicy::constant(1, 1)) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn gridworld_gain() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let (_, pol) = solve::exact_value_iteration(&inst, 1e-10, 1_000_000).unwrap();
        let etau = expected_hitting_times(&chain_of(&inst, &pol)).unwrap()[0];
        let gain = stationary_gain(&build_m_infinity(&inst), &pol);
        assert!((gain - 1.0 / (1.0 + etau)).abs() < 1e-10);
        assert!((gain - 0.1587).abs() < 0.002);
    }

    #[test]
    fn reduction_diameter() {
        let m = build_m_infinity(&make_sspcom_toy());
        // s1 is unreachable from s0 in the reduction.
        assert_eq!(m_infinity_diameter(&m, 20), Some(f64::INFINITY));
        let m = build_m_infinity(&uniform_toy());
        assert_eq!(m_infinity_diameter(&m, 20), Some(1.0));
        assert_eq!(m_infinity_diameter(&m, 1), None);
    }

    fn chain_single_action() -> SspInstance {
        let mut kernel = vec![vec![vec![0.0; 4]; 1]; 3];
        for s in 0..3 {
            kernel[s][0][s + 1] = 1.0;
        }
        SspInstance::new(3, 1, 0, (1.0, 1.0), vec![vec![1.0]; 3], kernel).unwrap()
    }

    #[test]
    fn single_action_chain_has_zero_regret() {
        let inst = chain_single_action();
        let r = run_ucrl2(&inst, &Ucrl2Config::default(), 25).unwrap();
        assert_eq!(r.episodes.len(), 25);
        assert_eq!(r.diagnostics.final_regret, 0.0);
        for (pivot, planning) in [true, false]
            .into_iter()
            .flat_map(|p| [SspPlanning::Extended, SspPlanning::KernelThenVi].map(|m| (p, m)))
        {
            let cfg = UcrlSspConfig {
                use_pivot_horizon: pivot,
                planning,
                ..Default::default()
            };
            let r = run_ucrl_ssp_style(&inst, &cfg, 25).unwrap();
            assert_eq!(r.episodes.len(), 25);
            assert_eq!(r.diagnostics.final_regret, 0.0);
        }
    }

    #[test]
    fn ucrl2_rejects_non_uniform_costs() {
        let inst = make_two_state_toy(1.0, 3.0).unwrap();
        assert!(matches!(
            run_ucrl2(&inst, &Ucrl2Config::default(), 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn ucrl2_epochs_respect_doubling() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let r = run_ucrl2(
            &inst,
            &Ucrl2Config {
                seed: 3,
                ..Default::default()
            },
            100,
        )
        .unwrap();
        assert_eq!(r.episodes.len(), 100);
        for a in &r.attempts {
            assert!(a.residual < a.epsilon);
        }
        let steps: u64 = r.attempts.iter().map(|a| a.steps).sum();
        assert_eq!(steps, r.diagnostics.t_k);
    }

    #[test]
    fn ucrl_ssp_style_runs() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        for pivot in [true, false] {
            let cfg = UcrlSspConfig {
                use_pivot_horizon: pivot,
                seed: 5,
                ..Default::default()
            };
            let r = run_ucrl_ssp_style(&inst, &cfg, 50).unwrap();
            assert_eq!(r.episodes.len(), 50);
            let steps: u64 = r.attempts.iter().map(|a| a.steps).sum();
            assert_eq!(steps, r.diagnostics.t_k);
            if pivot {
                assert!(r.attempts.iter().all(|a| a.steps <= a.horizon));
            }
        }
        let zero = make_gridworld(3, 4, 0.05, GridScenario::ZeroRegion { beta: 0.5 }).unwrap();
        assert!(run_ucrl_ssp_style(&zero, &UcrlSspConfig::default(), 1).is_err());
        let floored = UcrlSspConfig {
            cost_floor: 11.0 * 11.0 * 4.0 / 3000.0,
            ..Default::default()
        };
        assert!(run_ucrl_ssp_style(&zero, &floored, 5).is_ok());
    }

    #[test]
    fn shrunk_kernel_moves_mass_to_goal() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let mut model = ConfidenceModel::new(11, 4, ConfidenceMode::Bernstein, 0.1).unwrap();
        let mut env = Environment::new(inst.clone(), 3);
        let mut nu = TransitionCounts::new(11, 4);
        let mut s = env.reset();
        for t in 0..5000 {
            let a = t % 4;
            let (next, _) = env.step(a).unwrap();
            nu.record(s, a, next);
            s = if next == 11 { env.reset() } else { next };
        }
        model.fold(&mut nu);
        let shrunk = shrunk_kernel_instance(&model, inst.cost_table()).unwrap();
        for s in 0..11 {
            for a in 0..4 {
                let p_hat = model.p_hat(s, a);
                let row = shrunk.row(s, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row[..11].iter().zip(&p_hat).all(|(q, p)| *q <= *p + 1e-15));
                assert!(row[11] >= p_hat[11]);
            }
        }
        assert!(model.n_plus(0, 0) > 0);
    }
}
