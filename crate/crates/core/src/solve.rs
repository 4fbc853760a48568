//! Exact planning oracles on a known instance.

use crate::chain::{chain_of, evaluate_policy};
use crate::{Error, Result, SspInstance, StationaryPolicy, ValueVector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: u64 = 1_000_000;
/// Values above this are treated as divergent when computing the diameter.
pub const DIVERGENCE_CEILING: f64 = 1e9;
/// Perturbation used by the proper-policy oracle for zero-cost instances.
pub const ORACLE_PERTURBATION: f64 = 1e-10;

/// `c(s,a) + offset + sum_y p(y|s,a) v(y)` with the goal valued at zero.
#[inline]
pub(crate) fn q_value(inst: &SspInstance, s: usize, a: usize, v: &[f64], offset: f64) -> f64 {
    let row = inst.row(s, a);
    let n = inst.n_states();
    inst.cost(s, a) + offset + row[..n].iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
}

/// Lowest-index argmin of `q_value` at `s`.
fn greedy_at(inst: &SspInstance, s: usize, v: &[f64], offset: f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for a in 0..inst.n_actions() {
        let q = q_value(inst, s, a, v, offset);
        if q < best.1 {
            best = (a, q);
        }
    }
    best
}

/// Greedy policy w.r.t. `v` under the Bellman operator, lowest action on ties.
pub fn greedy_policy(inst: &SspInstance, v: &[f64], offset: f64) -> StationaryPolicy {
    let actions = (0..inst.n_states()).map(|s| greedy_at(inst, s, v, offset).0).collect();
    StationaryPolicy::new(actions, inst.n_actions()).expect("greedy actions are in range")
}

/// `sup_s |L v(s) - v(s)|` under the (optionally capped) Bellman operator.
pub fn bellman_residual(inst: &SspInstance, v: &[f64], cap: Option<f64>) -> f64 {
    (0..inst.n_states())
        .map(|s| {
            let mut lv = greedy_at(inst, s, v, 0.0).1;
            if let Some(j) = cap {
                lv = lv.min(j);
            }
            (lv - v[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Runs `v <- min{cap, L v}` from `init` until successive iterates differ by
/// at most `tol` in sup-norm; returns the last iterate.
fn iterate(
    inst: &SspInstance,
    init: Vec<f64>,
    offset: f64,
    cap: Option<f64>,
    tol: f64,
    max_iter: u64,
) -> Result<Vec<f64>> {
    let n = inst.n_states();
    let mut v = init;
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        let mut worst = (0, 0.0_f64);
        for (s, out) in next.iter_mut().enumerate() {
            let mut x = greedy_at(inst, s, &v, offset).1;
            if let Some(j) = cap {
                x = x.min(j);
            }
            let d = (x - v[s]).abs();
            if d > worst.1 || d.is_nan() {
                worst = (s, d);
            }
            *out = x;
        }
        std::mem::swap(&mut v, &mut next);
        if worst.1 <= tol {
            return Ok(v);
        }
        if !worst.1.is_finite() {
            return Err(Error::Divergence {
                state: worst.0,
                iterations: max_iter,
                residual: worst.1,
            });
        }
    }
    let state = (0..n)
        .max_by(|&a, &b| (next[a] - v[a]).abs().total_cmp(&(next[b] - v[b]).abs()))
        .unwrap_or(0);
    Err(Error::Divergence {
        state,
        iterations: max_iter,
        residual: (next[state] - v[state]).abs(),
    })
}

/// Value iteration with the optimal Bellman operator from `V = 0`.
///
/// The returned `V` satisfies `||L V - V||_inf <= tol`; the policy is greedy
/// with respect to the returned `V`. States that cannot reach the goal almost
/// surely are reported up front as divergent when costs are positive.
pub fn exact_value_iteration(inst: &SspInstance, tol: f64, max_iter: u64) -> Result<(ValueVector, StationaryPolicy)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (c_min, _) = inst.cost_bounds();
    if c_min > 0.0 {
        let good = almost_sure_set(inst);
        if let Some(state) = good.iter().position(|&g| !g) {
            return Err(Error::Divergence {
                state,
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
    }
    let v = iterate(inst, vec![0.0; inst.n_states()], 0.0, None, tol, max_iter)?;
    let pol = greedy_policy(inst, &v, 0.0);
    Ok((ValueVector(v), pol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSolution {
    pub values: ValueVector,
    pub policy: StationaryPolicy,
    /// States whose value sits at the cap.
    pub capped: Vec<bool>,
    /// `J = 0`: every value is zero and the operator carries no information.
    pub degenerate_cap: bool,
}

/// Fixed point of the finite-penalty operator
/// `L_J V(s) = min{ J, min_a [c(s,a) + p(.|s,a) V] }`, iterated from zero.
pub fn truncated_value_iteration(inst: &SspInstance, cap: f64, tol: f64) -> Result<TruncatedSolution> {
    if !(cap >= 0.0) || !cap.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty J must be nonnegative, got {cap}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let v = iterate(inst, vec![0.0; inst.n_states()], 0.0, Some(cap), tol, DEFAULT_MAX_ITER)?;
    let policy = greedy_policy(inst, &v, 0.0);
    let capped = v.iter().map(|&x| x >= cap).collect();
    Ok(TruncatedSolution {
        values: ValueVector(v),
        policy,
        capped,
        degenerate_cap: cap == 0.0,
    })
}

/// Best proper policy and its value under the raw costs, for instances that
/// may contain zero-cost cycles. Plans on costs `c + eta` (value iteration
/// started from the value of a proper policy, so iterates decrease to the
/// unique fixed point), then evaluates the resulting policy on `c`.
pub fn proper_policy_oracle(
    inst: &SspInstance,
    eta: f64,
    tol: f64,
    max_iter: u64,
) -> Result<(ValueVector, StationaryPolicy)> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation must be positive, got {eta}"
        )));
    }
    let (d, hit_policy) = min_hitting_time(inst);
    if let Some(state) = d.iter().position(|x| !x.is_finite()) {
        return Err(Error::Divergence {
            state,
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let start = evaluate_policy(inst, &hit_policy, eta)?;
    let v = iterate(inst, start.0, eta, None, tol, max_iter)?;
    let pol = greedy_policy(inst, &v, eta);
    let raw = evaluate_policy(inst, &pol, 0.0)?;
    Ok((raw, pol))
}

/// States from which some policy reaches the goal with probability one.
///
/// Repeatedly prunes states that cannot reach the goal with positive
/// probability while only using actions whose support stays in the set.
pub fn almost_sure_set(inst: &SspInstance) -> Vec<bool> {
    let n = inst.n_states();
    let mut good = vec![true; n];
    loop {
        let allowed =
            |s: usize, a: usize, good: &[bool]| inst.row(s, a)[..n].iter().zip(good).all(|(&p, &g)| p == 0.0 || g);
        let mut reach = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if reach[s] || !good[s] {
                    continue;
                }
                let ok = (0..inst.n_actions()).any(|a| {
                    if !allowed(s, a, &good) {
                        return false;
                    }
                    let row = inst.row(s, a);
                    row[n] > 0.0 || (0..n).any(|y| reach[y] && row[y] > 0.0)
                });
                if ok {
                    reach[s] = true;
                    changed = true;
                }
            }
        }
        if reach == good {
            return good;
        }
        good = reach;
    }
}

/// `min_pi E[tau_pi(s)]` per state (infinite outside the almost-sure set)
/// and a policy attaining it on the almost-sure set.
pub fn min_hitting_time(inst: &SspInstance) -> (ValueVector, StationaryPolicy) {
    let n = inst.n_states();
    let good = almost_sure_set(inst);
    let allowed: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            (0..inst.n_actions())
                .filter(|&a| good[s] && inst.row(s, a)[..n].iter().zip(&good).all(|(&p, &g)| p == 0.0 || g))
                .collect()
        })
        .collect();
    let step = |v: &[f64], s: usize| -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for &a in &allowed[s] {
            let row = inst.row(s, a);
            let x = 1.0 + row[..n].iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
            if x < best.1 {
                best = (a, x);
            }
        }
        best
    };
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..DEFAULT_MAX_ITER {
        let mut diff = 0.0_f64;
        for s in 0..n {
            next[s] = if good[s] { step(&v, s).1 } else { 0.0 };
            diff = diff.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if diff <= DEFAULT_TOL || v.iter().any(|&x| x > DIVERGENCE_CEILING) {
            break;
        }
    }
    let actions: Vec<usize> = (0..n).map(|s| if good[s] { step(&v, s).0 } else { 0 }).collect();
    for s in 0..n {
        if !good[s] || v[s] > DIVERGENCE_CEILING {
            v[s] = f64::INFINITY;
        }
    }
    (
        ValueVector(v),
        StationaryPolicy::new(actions, inst.n_actions()).expect("actions in range"),
    )
}

/// SSP-diameter `D = max_s min_pi E[tau_pi(s)]`; infinite when some state
/// cannot reach the goal almost surely.
pub fn ssp_diameter(inst: &SspInstance) -> f64 {
    let (v, _) = min_hitting_time(inst);
    v.iter().fold(0.0, |m: f64, &x| m.max(x))
}

/// `E[tau_pi*(s0)]` of an optimal policy, via the fundamental matrix.
pub fn optimal_hitting_time(inst: &SspInstance, pol: &StationaryPolicy) -> Result<f64> {
    let chain = chain_of(inst, pol);
    Ok(crate::chain::expected_hitting_times(&chain)?[inst.start()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env;

    fn chain3(n_actions: usize) -> SspInstance {
        // 0 -> 1 -> 2 -> goal under action 0; other actions self-loop.
        let n = 3;
        let mut kernel = vec![vec![vec![0.0; n + 1]; n_actions]; n];
        for s in 0..n {
            kernel[s][0][s + 1] = 1.0;
            for a in 1..n_actions {
                kernel[s][a][s] = 1.0;
            }
        }
        SspInstance::new(n, n_actions, 0, (1.0, 1.0), vec![vec![1.0; n_actions]; n], kernel).unwrap()
    }

    #[test]
    fn deterministic_chain_values() {
        let (v, pol) = exact_value_iteration(&chain3(2), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(v.0, vec![3.0, 2.0, 1.0]);
        assert_eq!(pol.actions(), &[0, 0, 0]);
    }

    #[test]
    fn two_state_toy_prefers_direct_exit() {
        let inst = env::make_two_state_toy(1.0, 3.0).unwrap();
        let (v, pol) = exact_value_iteration(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-9);
        assert_eq!(pol.action(0), 1);
    }

    #[test]
    fn non_communicating_positive_costs_diverge() {
        let inst = SspInstance::new(1, 1, 0, (1.0, 1.0), vec![vec![1.0]], vec![vec![vec![1.0, 0.0]]]).unwrap();
        assert!(matches!(
            exact_value_iteration(&inst, DEFAULT_TOL, 100),
            Err(Error::Divergence { state: 0, .. })
        ));
    }

    #[test]
    fn truncated_caps_dead_end() {
        let inst = env::make_dead_end_toy(1.0, 3.0).unwrap();
        let sol = truncated_value_iteration(&inst, 5.0, DEFAULT_TOL).unwrap();
        assert_eq!(sol.values[1], 5.0);
        assert!(sol.capped[1]);
        assert!((sol.values[0] - 3.0).abs() < 1e-9);
        assert!(sol.values.iter().all(|&x| x <= 5.0));
    }

    #[test]
    fn truncated_matches_exact_when_cap_is_loose() {
        let inst = env::make_gridworld(3, 4, 0.05, env::GridScenario::Sandpit { beta: 0.5 }).unwrap();
        let (v, _) = exact_value_iteration(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let sol = truncated_value_iteration(&inst, v.sup_norm() + 1.0, DEFAULT_TOL).unwrap();
        for (a, b) in v.iter().zip(sol.values.iter()) {
            assert!((a - b).abs() <= 2.0 * DEFAULT_TOL);
        }
    }

    #[test]
    fn zero_cap_is_degenerate() {
        let inst = env::make_two_state_toy(1.0, 3.0).unwrap();
        let sol = truncated_value_iteration(&inst, 0.0, DEFAULT_TOL).unwrap();
        assert!(sol.degenerate_cap);
        assert!(sol.values.iter().all(|&x| x == 0.0));
        assert!(truncated_value_iteration(&inst, -1.0, DEFAULT_TOL).is_err());
    }

    #[test]
    fn greedy_policy_is_consistent() {
        let inst = env::make_gridworld(3, 4, 0.05, env::GridScenario::Uniform).unwrap();
        let (v, pol) = exact_value_iteration(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(greedy_policy(&inst, &v, 0.0), pol);
        assert!(bellman_residual(&inst, &v, None) <= DEFAULT_TOL);
    }

    #[test]
    fn diameter_of_chain() {
        assert!((ssp_diameter(&chain3(2)) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn proper_oracle_avoids_zero_cost_loops() {
        let inst = env::make_gridworld(3, 4, 0.05, env::GridScenario::ZeroRegion { beta: 0.4 }).unwrap();
        let (v, pol) = proper_policy_oracle(&inst, ORACLE_PERTURBATION, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(chain_of(&inst, &pol).is_proper());
        assert!(v[inst.start()] > 0.0);
    }
}
