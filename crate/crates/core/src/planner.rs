//! Extended value iteration over a confidence set and the pivot horizon.

use serde::{Deserialize, Serialize};

use crate::chain::AbsorbingChain;
use crate::confidence::{ascending_order, inner_min_box, inner_min_l1, ConfidenceModel};
use crate::{Error, Result, StationaryPolicy, ValueVector};

pub const DEFAULT_H_MAX: u64 = 1_000_000;
pub const DEFAULT_MAX_SWEEPS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum OperatorMode {
    Plain,
    /// Values capped at `J`.
    Truncated(f64),
    /// Every cost increased by `eta`.
    Perturbed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EviParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub mode: OperatorMode,
    pub h_max: u64,
    pub max_sweeps: u64,
}

impl EviParams {
    pub fn new(epsilon: f64, gamma: f64, mode: OperatorMode) -> Self {
        Self {
            epsilon,
            gamma,
            mode,
            h_max: DEFAULT_H_MAX,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotHorizon {
    pub h: u64,
    /// The cap was hit before the tail dropped below `gamma`.
    pub capped: bool,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub v_tilde: ValueVector,
    pub policy: StationaryPolicy,
    /// Optimistic row of `(s, policy(s))` over `S'`, per state.
    pub p_tilde: Vec<Vec<f64>>,
    pub q_tilde: AbsorbingChain,
    pub pivot: PivotHorizon,
    pub sweeps: u64,
    /// `max_s (L v_tilde - v_tilde)(s)` from the final sweep.
    pub residual: f64,
}

/// `H = min{ n > 1 : max_s (Q^{n-1} 1)(s) <= gamma }`, capped at `h_max`.
pub fn pivot_horizon(q: &AbsorbingChain, gamma: f64, h_max: u64) -> Result<PivotHorizon> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    if h_max < 2 {
        return Err(Error::InvalidParameter("h_max must be at least 2".into()));
    }
    let n = q.n_states();
    if gamma < 1.0 && q.improper_state().is_some() {
        return Ok(PivotHorizon { h: h_max, capped: true });
    }
    let mut v = vec![1.0; n];
    let mut next = vec![0.0; n];
    for h in 2..=h_max {
        q.apply(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
        if v.iter().fold(0.0_f64, |m, &x| m.max(x)) <= gamma {
            return Ok(PivotHorizon { h, capped: false });
        }
    }
    Ok(PivotHorizon { h: h_max, capped: true })
}

/// Frozen view of a confidence model: empirical rows, radii and costs.
struct Snapshot {
    n: usize,
    a: usize,
    l1: bool,
    p_hat: Vec<f64>,
    beta: Vec<f64>,
    radii: Vec<f64>,
    costs: Vec<f64>,
    cap: Option<f64>,
}

impl Snapshot {
    fn new(model: &ConfidenceModel, costs: &[f64], mode: OperatorMode) -> Result<Self> {
        let (n, a) = (model.n_states(), model.n_actions());
        let w = n + 1;
        if costs.len() != n * a {
            return Err(Error::Dimension(format!("cost table must have {} entries", n * a)));
        }
        if costs.iter().any(|c| c.is_nan() || *c < 0.0) {
            return Err(Error::InvalidParameter("planning costs must be nonnegative".into()));
        }
        let (offset, cap) = match mode {
            OperatorMode::Plain => (0.0, None),
            OperatorMode::Truncated(j) => {
                if !(j > 0.0) {
                    return Err(Error::InvalidParameter(format!("penalty J must be positive, got {j}")));
                }
                (0.0, Some(j))
            }
            OperatorMode::Perturbed(eta) => {
                if !(eta >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "perturbation must be nonnegative, got {eta}"
                    )));
                }
                (eta, None)
            }
        };
        let l1 = model.mode().is_l1();
        let mut p_hat = vec![0.0; n * a * w];
        let mut beta = vec![0.0; n * a];
        let mut radii = if l1 { Vec::new() } else { vec![0.0; n * a * w] };
        for s in 0..n {
            for b in 0..a {
                let i = s * a + b;
                let row = &mut p_hat[i * w..(i + 1) * w];
                model.p_hat_into(s, b, row);
                if l1 {
                    beta[i] = model.radius_l1(s, b)?;
                } else {
                    model.radii_bernstein_into(s, b, row, &mut radii[i * w..(i + 1) * w]);
                }
            }
        }
        Ok(Self {
            n,
            a,
            l1,
            p_hat,
            beta,
            radii,
            costs: costs.iter().map(|c| c + offset).collect(),
            cap,
        })
    }

    fn optimistic_row(&self, s: usize, b: usize, order: &[usize], out: &mut [f64]) -> Result<()> {
        let w = self.n + 1;
        let i = s * self.a + b;
        let p_hat = &self.p_hat[i * w..(i + 1) * w];
        if self.l1 {
            inner_min_l1(p_hat, self.beta[i], order, out);
            Ok(())
        } else {
            inner_min_box(p_hat, &self.radii[i * w..(i + 1) * w], order, out)
        }
    }

    /// One application of the extended operator to `v` (length `S'`, goal
    /// last and zero). Writes `L v` and the lowest-index argmin per state.
    fn sweep(
        &self,
        v: &[f64],
        order: &mut Vec<usize>,
        row: &mut [f64],
        out: &mut [f64],
        argmin: &mut [usize],
    ) -> Result<()> {
        ascending_order(v, order);
        for s in 0..self.n {
            let mut best = (0, f64::INFINITY);
            for b in 0..self.a {
                let c = self.costs[s * self.a + b];
                if c == f64::INFINITY {
                    continue;
                }
                self.optimistic_row(s, b, order, row)?;
                let q = c + row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
                if q < best.1 {
                    best = (b, q);
                }
            }
            out[s] = match self.cap {
                Some(j) => best.1.min(j),
                None => best.1,
            };
            argmin[s] = best.0;
        }
        Ok(())
    }
}

/// One application of the extended Bellman operator to `v` (non-goal
/// entries only). Returns `L v` and its greedy policy.
pub fn extended_operator(
    model: &ConfidenceModel,
    costs: &[f64],
    mode: OperatorMode,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let snap = Snapshot::new(model, costs, mode)?;
    if v.len() != snap.n {
        return Err(Error::Dimension("value vector has the wrong length".into()));
    }
    let mut ext = v.to_vec();
    ext.push(0.0);
    let mut order = Vec::new();
    let mut row = vec![0.0; snap.n + 1];
    let mut out = vec![0.0; snap.n + 1];
    let mut argmin = vec![0; snap.n];
    snap.sweep(&ext, &mut order, &mut row, &mut out, &mut argmin)?;
    out.truncate(snap.n);
    Ok((out, argmin))
}

/// Extended value iteration from `v = 0`, stopped once successive iterates
/// differ by at most `epsilon`. Costs equal to `+inf` disable an action.
pub fn evi_ssp(model: &ConfidenceModel, costs: &[f64], params: &EviParams) -> Result<PlanResult> {
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let snap = Snapshot::new(model, costs, params.mode)?;
    let (n, w) = (snap.n, snap.n + 1);
    let mut v = vec![0.0_f64; w];
    let mut next = vec![0.0; w];
    let mut order = Vec::with_capacity(w);
    let mut row = vec![0.0; w];
    let mut argmin = vec![0; n];
    let mut sweeps = 0;
    let residual = loop {
        if sweeps >= params.max_sweeps {
            let state = (0..n)
                .max_by(|&i, &j| (next[i] - v[i]).abs().total_cmp(&(next[j] - v[j]).abs()))
                .unwrap_or(0);
            return Err(Error::NonContraction {
                state,
                sweeps: params.max_sweeps,
            });
        }
        snap.sweep(&v, &mut order, &mut row, &mut next, &mut argmin)?;
        sweeps += 1;
        let mut diff = 0.0_f64;
        let mut residual = f64::NEG_INFINITY;
        for s in 0..n {
            let d = next[s] - v[s];
            diff = diff.max(d.abs());
            residual = residual.max(d);
        }
        if !diff.is_finite() {
            return Err(Error::NonContraction { state: 0, sweeps });
        }
        if diff <= params.epsilon {
            break residual;
        }
        std::mem::swap(&mut v, &mut next);
    };

    // `v` is the returned iterate and `argmin` is greedy with respect to it.
    ascending_order(&v, &mut order);
    let mut p_tilde = Vec::with_capacity(n);
    let mut q = vec![0.0; n * n];
    let mut r = vec![0.0; n];
    for s in 0..n {
        snap.optimistic_row(s, argmin[s], &order, &mut row)?;
        q[s * n..(s + 1) * n].copy_from_slice(&row[..n]);
        r[s] = row[n];
        p_tilde.push(row.clone());
    }
    let q_tilde = AbsorbingChain::from_flat(n, q, r)?;
    let pivot = pivot_horizon(&q_tilde, params.gamma, params.h_max)?;
    v.truncate(n);
    Ok(PlanResult {
        v_tilde: ValueVector(v),
        policy: StationaryPolicy::new(argmin, snap.a)?,
        p_tilde,
        q_tilde,
        pivot,
        sweeps,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::hitting_tail;
    use crate::confidence::{ConfidenceMode, TransitionCounts};
    use crate::env::{make_gridworld, make_two_state_toy, sample_row, stream_rng, GridScenario};
    use crate::solve::{exact_value_iteration, DEFAULT_MAX_ITER, DEFAULT_TOL};
    use crate::SspInstance;
    use proptest::prelude::*;

    fn chain3() -> SspInstance {
        let mut kernel = vec![vec![vec![0.0; 4]; 1]; 3];
        for s in 0..3 {
            kernel[s][0][s + 1] = 1.0;
        }
        SspInstance::new(3, 1, 0, (1.0, 1.0), vec![vec![1.0]; 3], kernel).unwrap()
    }

    #[test]
    fn pivot_horizon_examples() {
        let zero = AbsorbingChain::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            pivot_horizon(&zero, 0.3, 100).unwrap(),
            PivotHorizon { h: 2, capped: false }
        );
        let det = AbsorbingChain::new(
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        assert_eq!(pivot_horizon(&det, 0.5, 100).unwrap().h, 4);
        let geo = AbsorbingChain::new(vec![vec![0.5]], vec![0.5]).unwrap();
        assert_eq!(pivot_horizon(&geo, 0.1, 100).unwrap().h, 5);
        assert_eq!(pivot_horizon(&geo, 1.0, 100).unwrap().h, 2);
        let stuck = AbsorbingChain::new(vec![vec![1.0]], vec![0.0]).unwrap();
        assert_eq!(
            pivot_horizon(&stuck, 0.5, 50).unwrap(),
            PivotHorizon { h: 50, capped: true }
        );
        assert_eq!(
            pivot_horizon(&geo, 1e-9, 10).unwrap(),
            PivotHorizon { h: 10, capped: true }
        );
        assert!(pivot_horizon(&geo, 0.0, 10).is_err());
    }

    #[test]
    fn near_exact_model_recovers_chain_values() {
        let inst = chain3();
        let mut m = ConfidenceModel::new(3, 1, ConfidenceMode::HoeffdingExperimental, 0.1).unwrap();
        let mut nu = TransitionCounts::new(3, 1);
        for s in 0..3 {
            for _ in 0..1_000_000 {
                nu.record(s, 0, s + 1);
            }
        }
        m.fold(&mut nu);
        let plan = evi_ssp(&m, inst.cost_table(), &EviParams::new(1e-9, 0.5, OperatorMode::Plain)).unwrap();
        // Optimism can only move mass toward the goal; the radius is ~0.01.
        for (got, want) in plan.v_tilde.iter().zip([3.0, 2.0, 1.0]) {
            assert!(*got <= want + 1e-9 && *got > want - 0.1, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_radius_box_reproduces_exact_vi() {
        let inst = make_two_state_toy(1.0, 3.0).unwrap();
        let mut m = ConfidenceModel::new(1, 2, ConfidenceMode::HoeffdingExperimental, 0.1).unwrap();
        let mut nu = TransitionCounts::new(1, 2);
        for _ in 0..200_000 {
            nu.record(0, 0, 0);
            nu.record(0, 1, 1);
        }
        m.fold(&mut nu);
        let plan = evi_ssp(&m, inst.cost_table(), &EviParams::new(1e-6, 0.5, OperatorMode::Plain)).unwrap();
        assert_eq!(plan.policy.action(0), 1);
        assert!((plan.v_tilde[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn unvisited_model_is_fully_optimistic() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let m = ConfidenceModel::new(11, 4, ConfidenceMode::HoeffdingTheoretical, 0.1).unwrap();
        let plan = evi_ssp(&m, inst.cost_table(), &EviParams::new(0.01, 0.5, OperatorMode::Plain)).unwrap();
        assert!(plan.v_tilde.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert_eq!(plan.pivot.h, 2);
    }

    #[test]
    fn truncated_and_perturbed_modes() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let m = sampled_model(&inst, 2000, 5);
        let t = evi_ssp(
            &m,
            inst.cost_table(),
            &EviParams::new(1e-6, 0.5, OperatorMode::Truncated(2.5)),
        )
        .unwrap();
        assert!(t.v_tilde.iter().all(|&x| x <= 2.5));
        let p = evi_ssp(
            &m,
            inst.cost_table(),
            &EviParams::new(1e-6, 0.5, OperatorMode::Perturbed(0.5)),
        )
        .unwrap();
        let plain = evi_ssp(&m, inst.cost_table(), &EviParams::new(1e-6, 0.5, OperatorMode::Plain)).unwrap();
        assert!(p.v_tilde[0] > plain.v_tilde[0]);
        assert!(evi_ssp(
            &m,
            inst.cost_table(),
            &EviParams::new(1e-6, 0.5, OperatorMode::Truncated(0.0))
        )
        .is_err());
        assert!(evi_ssp(&m, inst.cost_table(), &EviParams::new(0.0, 0.5, OperatorMode::Plain)).is_err());
    }

    #[test]
    fn sweep_cap_reports_non_contraction() {
        let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
        let m = sampled_model(&inst, 500, 1);
        let mut params = EviParams::new(1e-12, 0.5, OperatorMode::Plain);
        params.max_sweeps = 3;
        assert!(matches!(
            evi_ssp(&m, inst.cost_table(), &params),
            Err(Error::NonContraction { .. })
        ));
    }

    /// Model built from `steps` uniformly random transitions per pair.
    fn sampled_model(inst: &SspInstance, steps: usize, seed: u64) -> ConfidenceModel {
        sampled_model_mode(inst, steps, seed, ConfidenceMode::HoeffdingExperimental)
    }

    fn sampled_model_mode(inst: &SspInstance, steps: usize, seed: u64, mode: ConfidenceMode) -> ConfidenceModel {
        let mut rng = stream_rng(seed, 0);
        let mut m = ConfidenceModel::new(inst.n_states(), inst.n_actions(), mode, 0.1).unwrap();
        let mut nu = TransitionCounts::new(inst.n_states(), inst.n_actions());
        for s in 0..inst.n_states() {
            for a in 0..inst.n_actions() {
                for _ in 0..steps {
                    nu.record(s, a, sample_row(inst.row(s, a), &mut rng));
                }
            }
        }
        m.fold(&mut nu);
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn evi_contract_and_monotone_iterates(steps in 0usize..60, seed in 0u64..1000, bern in any::<bool>()) {
            let inst = make_gridworld(3, 4, 0.05, GridScenario::Sandpit { beta: 0.5 }).unwrap();
            let mode = if bern { ConfidenceMode::Bernstein } else { ConfidenceMode::HoeffdingExperimental };
            let m = sampled_model_mode(&inst, steps, seed, mode);
            let eps = 1e-4;
            let plan = evi_ssp(&m, inst.cost_table(), &EviParams::new(eps, 0.3, OperatorMode::Plain)).unwrap();
            let (lv, greedy) = extended_operator(&m, inst.cost_table(), OperatorMode::Plain, &plan.v_tilde).unwrap();
            for s in 0..inst.n_states() {
                prop_assert!(lv[s] <= plan.v_tilde[s] + eps + 1e-12);
            }
            prop_assert_eq!(greedy.as_slice(), plan.policy.actions());
            prop_assert!(plan.v_tilde.iter().all(|&x| x >= 0.0));
            prop_assert!(plan.pivot.h >= 2);

            // Iterates from zero never decrease.
            let mut v = vec![0.0; inst.n_states()];
            for _ in 0..30 {
                let (next, _) = extended_operator(&m, inst.cost_table(), OperatorMode::Plain, &v).unwrap();
                prop_assert!(next.iter().zip(&v).all(|(a, b)| *a >= *b - 1e-12));
                v = next;
            }

            // Tail semantics of the pivot horizon.
            if !plan.pivot.capped {
                for s in 0..inst.n_states() {
                    prop_assert!(hitting_tail(&plan.q_tilde, s, plan.pivot.h - 1) <= 0.3 + 1e-12);
                }
            }

            // Optimism when the true kernel is plausible.
            if m.contains_kernel(&inst) {
                let (v_star, _) = exact_value_iteration(&inst, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
                for s in 0..inst.n_states() {
                    prop_assert!(plan.v_tilde[s] <= v_star[s] + eps);
                }
            }
        }
    }
}
