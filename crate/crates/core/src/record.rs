//! Run traces, regret diagnostics and their CSV/JSON forms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One environmental episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub k: u64,
    pub cost: f64,
    pub len: u64,
    pub phase1_steps: u64,
    pub phase2_steps: u64,
    pub n_phase2_attempts: u64,
    /// Horizon of the first attempt (0 for learners without one).
    pub h_k0: u64,
    pub vtilde_s0: f64,
    /// Optimistic expected hitting time from `s0` at the first plan.
    pub etau_s0: f64,
    /// Cost accumulated during the first attempt only.
    pub phase1_cost: f64,
    pub cum_regret: f64,
}

/// One attempt (or, for epoch-based baselines, one epoch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub k: u64,
    /// 0 for the first attempt of an episode, `>= 1` afterwards.
    pub j: u64,
    pub t_start: u64,
    pub horizon: u64,
    pub horizon_capped: bool,
    pub steps: u64,
    pub cost: f64,
    pub reached_goal: bool,
    pub start_state: usize,
    pub vtilde_start: f64,
    pub etau: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub residual: f64,
    pub first_action: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub final_regret: f64,
    /// Truncated regret: first-attempt costs minus `K V*(s0)`.
    pub w_k: f64,
    /// Largest first-attempt horizon.
    pub omega_k: u64,
    /// Failed first attempts.
    pub f_k: u64,
    /// Attempts after the first, over all episodes.
    pub g_k: u64,
    pub t_k1: u64,
    pub t_k2: u64,
    pub t_k: u64,
    /// `final_regret <= w_k + c_max t_k2` on the realised trace.
    pub decomposition_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    pub v_star: f64,
    pub c_max: f64,
    pub episodes: Vec<EpisodeLog>,
    pub attempts: Vec<AttemptLog>,
    pub diagnostics: Diagnostics,
}

/// Fills `cum_regret` and the diagnostics from the logged episodes.
pub fn compute_diagnostics(record: &mut RunRecord, v_star: f64) {
    record.v_star = v_star;
    let mut cum = 0.0;
    let mut d = Diagnostics::default();
    let mut phase1_total = 0.0;
    for ep in &mut record.episodes {
        cum += ep.cost - v_star;
        ep.cum_regret = cum;
        phase1_total += ep.phase1_cost;
        d.omega_k = d.omega_k.max(ep.h_k0);
        if ep.phase2_steps > 0 || ep.n_phase2_attempts > 0 {
            d.f_k += 1;
        }
        d.g_k += ep.n_phase2_attempts;
        d.t_k1 += ep.phase1_steps;
        d.t_k2 += ep.phase2_steps;
    }
    let k = record.episodes.len() as f64;
    d.final_regret = cum;
    d.w_k = phase1_total - k * v_star;
    d.t_k = d.t_k1 + d.t_k2;
    // Relative slack for floating-point summation order.
    let slack = 1e-9 * (1.0 + phase1_total.abs() + record.c_max * d.t_k2 as f64);
    d.decomposition_holds = d.final_regret <= d.w_k + record.c_max * d.t_k2 as f64 + slack;
    record.diagnostics = d;
}

/// JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_regret: f64,
    #[serde(rename = "W_K")]
    pub w_k: f64,
    #[serde(rename = "Omega_K")]
    pub omega_k: u64,
    #[serde(rename = "F_K")]
    pub f_k: u64,
    #[serde(rename = "G_K")]
    pub g_k: u64,
    #[serde(rename = "T_K2")]
    pub t_k2: u64,
    #[serde(rename = "T_K")]
    pub t_k: u64,
}

pub const EPISODE_COLUMNS: [&str; 10] = [
    "k",
    "episode_cost",
    "episode_len",
    "phase1_steps",
    "phase2_steps",
    "n_phase2_attempts",
    "H_k0",
    "vtilde_s0",
    "cum_regret",
    "algorithm",
];
pub const ATTEMPT_COLUMNS: [&str; 7] = ["k", "j", "H", "steps", "reached_goal", "start_state", "algorithm"];

// Headers are written explicitly so empty traces still carry them.
fn headerless<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

#[derive(Serialize)]
struct EpisodeRow<'a> {
    k: u64,
    episode_cost: f64,
    episode_len: u64,
    phase1_steps: u64,
    phase2_steps: u64,
    n_phase2_attempts: u64,
    h_k0: u64,
    vtilde_s0: f64,
    cum_regret: f64,
    algorithm: &'a str,
}

#[derive(Serialize)]
struct AttemptRow<'a> {
    k: u64,
    j: u64,
    h: u64,
    steps: u64,
    reached_goal: bool,
    start_state: usize,
    algorithm: &'a str,
}

impl RunRecord {
    pub fn summary(&self) -> RunSummary {
        let d = &self.diagnostics;
        RunSummary {
            final_regret: d.final_regret,
            w_k: d.w_k,
            omega_k: d.omega_k,
            f_k: d.f_k,
            g_k: d.g_k,
            t_k2: d.t_k2,
            t_k: d.t_k,
        }
    }

    /// Per-episode regret series `Delta(k)`.
    pub fn regret_series(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.cum_regret).collect()
    }

    pub fn write_episodes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = headerless(w);
        out.write_record(EPISODE_COLUMNS)?;
        for e in &self.episodes {
            out.serialize(EpisodeRow {
                k: e.k,
                episode_cost: e.cost,
                episode_len: e.len,
                phase1_steps: e.phase1_steps,
                phase2_steps: e.phase2_steps,
                n_phase2_attempts: e.n_phase2_attempts,
                h_k0: e.h_k0,
                vtilde_s0: e.vtilde_s0,
                cum_regret: e.cum_regret,
                algorithm: &self.algorithm,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_attempts_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = headerless(w);
        out.write_record(ATTEMPT_COLUMNS)?;
        for a in &self.attempts {
            out.serialize(AttemptRow {
                k: a.k,
                j: a.j,
                h: a.horizon,
                steps: a.steps,
                reached_goal: a.reached_goal,
                start_state: a.start_state,
                algorithm: &self.algorithm,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(k: u64, cost: f64, p1: u64, p2: u64, g: u64, h: u64, p1_cost: f64) -> EpisodeLog {
        EpisodeLog {
            k,
            cost,
            len: p1 + p2,
            phase1_steps: p1,
            phase2_steps: p2,
            n_phase2_attempts: g,
            h_k0: h,
            vtilde_s0: 0.0,
            etau_s0: 0.0,
            phase1_cost: p1_cost,
            cum_regret: 0.0,
        }
    }

    fn record(episodes: Vec<EpisodeLog>) -> RunRecord {
        RunRecord {
            algorithm: "ucssp".into(),
            seed: 0,
            v_star: 0.0,
            c_max: 2.0,
            episodes,
            attempts: vec![],
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn hand_computed_two_episode_trace() {
        // Episode 1: 3 first-attempt steps costing 4, then 2 attempts of 5
        // steps costing 6. Episode 2: 2 steps costing 2.5, no failure.
        let mut r = record(vec![
            episode(1, 10.0, 3, 5, 2, 4, 4.0),
            episode(2, 2.5, 2, 0, 0, 6, 2.5),
        ]);
        compute_diagnostics(&mut r, 2.0);
        let d = &r.diagnostics;
        assert_eq!(r.episodes[0].cum_regret, 8.0);
        assert_eq!(r.episodes[1].cum_regret, 8.5);
        assert_eq!(d.final_regret, 8.5);
        assert_eq!(d.w_k, 2.5);
        assert_eq!((d.omega_k, d.f_k, d.g_k), (6, 1, 2));
        assert_eq!((d.t_k1, d.t_k2, d.t_k), (5, 5, 10));
        assert!(d.decomposition_holds);
    }

    #[test]
    fn no_failures_means_equality() {
        let mut r = record(vec![episode(1, 3.0, 3, 0, 0, 5, 3.0), episode(2, 1.0, 1, 0, 0, 5, 1.0)]);
        compute_diagnostics(&mut r, 1.5);
        let d = &r.diagnostics;
        assert_eq!((d.f_k, d.g_k, d.t_k2), (0, 0, 0));
        assert_eq!(d.final_regret, d.w_k);
        assert!(d.decomposition_holds);
    }

    #[test]
    fn csv_columns() {
        let mut r = record(vec![episode(1, 3.0, 3, 0, 0, 5, 3.0)]);
        compute_diagnostics(&mut r, 1.0);
        let mut buf = Vec::new();
        r.write_episodes_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "k,episode_cost,episode_len,phase1_steps,phase2_steps,n_phase2_attempts,H_k0,vtilde_s0,cum_regret,algorithm\n"
        ));
        let mut buf = Vec::new();
        r.write_attempts_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("k,j,H,steps,reached_goal,start_state,algorithm\n"));
        let json: serde_json::Value = serde_json::from_str(&r.summary_json().unwrap()).unwrap();
        for key in ["final_regret", "W_K", "Omega_K", "F_K", "G_K", "T_K2", "T_K"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
