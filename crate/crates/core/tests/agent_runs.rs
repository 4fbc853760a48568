use ssp_core::agent::{
    finite_penalty_horizon, oracle_value, run_ucssp, run_ucssp_finite_penalty, run_ucssp_perturbed, AgentConfig,
    Variant,
};
use ssp_core::env::{make_dead_end_toy, make_gridworld, GridScenario};
use ssp_core::record::RunRecord;

fn check_bookkeeping(rec: &RunRecord, k: u64) {
    assert_eq!(rec.episodes.len() as u64, k);
    assert!(rec.diagnostics.decomposition_holds);
    let steps: u64 = rec.attempts.iter().map(|a| a.steps).sum();
    let extra: u64 = rec.episodes.iter().map(|e| e.len).sum::<u64>() - steps;
    // Only the finite-penalty reset step is not part of an attempt.
    assert!(extra <= k);
    for (i, e) in rec.episodes.iter().enumerate() {
        assert_eq!(e.k, i as u64 + 1);
        assert_eq!(e.len, e.phase1_steps + e.phase2_steps);
    }
    for w in rec.attempts.windows(2) {
        assert!(w[1].t_start >= w[0].t_start + w[0].steps);
    }
}

#[test]
fn uniform_gridworld_run_is_consistent() {
    let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
    let rec = run_ucssp(
        &inst,
        &AgentConfig {
            seed: 3,
            ..AgentConfig::default()
        },
        200,
    )
    .unwrap();
    check_bookkeeping(&rec, 200);
    assert_eq!(rec.algorithm, "ucssp");
    for a in rec.attempts.iter().filter(|a| a.j == 0) {
        assert!(a.steps <= a.horizon);
        assert!(a.reached_goal || a.steps == a.horizon);
    }
    // Every episode ends at the goal.
    for k in 1..=200 {
        assert!(rec.attempts.iter().rfind(|a| a.k == k).unwrap().reached_goal);
    }
}

#[test]
fn stochastic_costs_run() {
    let inst = make_gridworld(3, 4, 0.05, GridScenario::Sandpit { beta: 0.5 }).unwrap();
    let cfg = AgentConfig {
        seed: 1,
        stochastic_costs: true,
        ..AgentConfig::default()
    };
    let rec = run_ucssp(&inst, &cfg, 100).unwrap();
    check_bookkeeping(&rec, 100);
    for e in &rec.episodes {
        assert!(e.cost >= 0.5 * e.len as f64 - 1e-9 && e.cost <= e.len as f64 + 1e-9);
    }
}

#[test]
fn finite_penalty_episodes_are_bounded() {
    let inst = make_dead_end_toy(1.0, 3.0).unwrap();
    let j = 4.0;
    assert!(oracle_value(&inst, Variant::FinitePenalty { j }).unwrap() <= j);
    let rec = run_ucssp_finite_penalty(&inst, &AgentConfig::default(), j, 300).unwrap();
    check_bookkeeping(&rec, 300);
    assert_eq!(rec.algorithm, "ucssp_J");
    for e in &rec.episodes {
        assert!(e.len <= finite_penalty_horizon(j, 1.0, e.k) + 1, "episode {}", e.k);
    }
}

#[test]
fn standard_learner_rejects_dead_ends() {
    let inst = make_dead_end_toy(1.0, 3.0).unwrap();
    assert!(run_ucssp(&inst, &AgentConfig::default(), 1).is_err());
}

#[test]
fn perturbed_learner_handles_zero_costs() {
    let inst = make_gridworld(3, 4, 0.05, GridScenario::ZeroRegion { beta: 0.4 }).unwrap();
    assert!(run_ucssp(&inst, &AgentConfig::default(), 1).is_err());
    let rec = run_ucssp_perturbed(&inst, &AgentConfig::default(), 100).unwrap();
    check_bookkeeping(&rec, 100);
    assert_eq!(rec.algorithm, "ucssp_eta");
}

#[test]
fn runs_are_reproducible() {
    let inst = make_gridworld(3, 4, 0.05, GridScenario::Uniform).unwrap();
    let cfg = AgentConfig {
        seed: 9,
        ..AgentConfig::default()
    };
    let a = run_ucssp(&inst, &cfg, 50).unwrap();
    let b = run_ucssp(&inst, &cfg, 50).unwrap();
    assert_eq!(a, b);
    let c = run_ucssp(&inst, &AgentConfig { seed: 10, ..cfg }, 50).unwrap();
    assert_ne!(a.episodes, c.episodes);
}
