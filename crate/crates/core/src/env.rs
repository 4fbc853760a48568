//! Concrete instances and the sample-only environment.
//!
//! Gridworld cells are addressed `(row, col)` with row 0 at the top and
//! "right" incrementing the column. The start is `(0, 0)` and the goal is the
//! bottom-right cell; non-goal cells are numbered row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SspInstance};

/// RNG stream for next-state draws.
pub const TRANSITION_STREAM: u64 = 0;
/// RNG stream for sampled costs.
pub const COST_STREAM: u64 = 1;

/// Action order of the gridworld.
pub const GRID_ACTIONS: [&str; 4] = ["right", "down", "left", "up"];
const MOVES: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridScenario {
    /// Every cost is 1.
    Uniform,
    /// Cost `beta` everywhere except cell `(1,1)`, which costs 1.
    Sandpit { beta: f64 },
    /// Cost 0 on the top-left 2x2 block, `beta` elsewhere.
    ZeroRegion { beta: f64 },
}

/// Builds the `rows x cols` gridworld with failure probability `p_f`.
pub fn make_gridworld(rows: usize, cols: usize, p_f: f64, scenario: GridScenario) -> Result<SspInstance> {
    if rows * cols < 2 {
        return Err(Error::InvalidParameter("gridworld needs at least two cells".into()));
    }
    if !(0.0..1.0).contains(&p_f) {
        return Err(Error::InvalidParameter(format!("p_f must lie in [0, 1), got {p_f}")));
    }
    type CellCost = Box<dyn Fn(usize, usize) -> f64>;
    let (cell_cost, bounds): (CellCost, (f64, f64)) = match scenario {
        GridScenario::Uniform => (Box::new(|_, _| 1.0), (1.0, 1.0)),
        GridScenario::Sandpit { beta } => {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "sandpit beta must lie in (0, 1], got {beta}"
                )));
            }
            (
                Box::new(move |r, c| if (r, c) == (1, 1) { 1.0 } else { beta }),
                (beta, 1.0),
            )
        }
        GridScenario::ZeroRegion { beta } => {
            if !(beta > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "zero-region beta must be positive, got {beta}"
                )));
            }
            (
                Box::new(move |r, c| if r < 2 && c < 2 { 0.0 } else { beta }),
                (0.0, beta),
            )
        }
    };

    let n = rows * cols - 1;
    let goal_cell = n;
    // Cell index equals state index for every non-goal cell; the goal cell is
    // last in row-major order, which maps onto the implicit goal index.
    let mut kernel = vec![vec![vec![0.0; n + 1]; 4]; n];
    let mut costs = vec![vec![0.0; 4]; n];
    for s in 0..n {
        let (r, c) = (s / cols, s % cols);
        for a in 0..4 {
            costs[s][a] = cell_cost(r, c);
            for (d, &(dr, dc)) in MOVES.iter().enumerate() {
                let p = if d == a { 1.0 - p_f } else { p_f / 3.0 };
                if p == 0.0 {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                let dest = if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    s
                } else {
                    nr as usize * cols + nc as usize
                };
                kernel[s][a][dest.min(goal_cell)] += p;
            }
        }
    }
    let name = match scenario {
        GridScenario::Uniform => "gridworld-uniform",
        GridScenario::Sandpit { .. } => "gridworld-sandpit",
        GridScenario::ZeroRegion { .. } => "gridworld-zero",
    };
    Ok(SspInstance::new(n, 4, 0, bounds, costs, kernel)?
        .with_meta("scenario", name)
        .with_meta("start_cell", "(0,0)")
        .with_meta("goal_cell", format!("({},{})", rows - 1, cols - 1)))
}

/// One state, action 0 self-loops at cost `c_min`, action 1 exits at `c_max`.
pub fn make_two_state_toy(c_min: f64, c_max: f64) -> Result<SspInstance> {
    if !(c_min > 0.0 && c_min <= c_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < c_min <= c_max, got ({c_min}, {c_max})"
        )));
    }
    SspInstance::new(
        1,
        2,
        0,
        (c_min, c_max),
        vec![vec![c_min, c_max]],
        vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
    )
    .map(|i| i.with_meta("scenario", "toy-two-state"))
}

/// Three states. At `s0`, action 0 exits directly at cost `4 eta` and action 1
/// moves to `s1` at cost `eta`; `s1 -> s2 -> goal` cost `eta` per step. States
/// `s1` and `s2` have a single behaviour, duplicated over both actions.
pub fn make_offset_example(eta: f64) -> Result<SspInstance> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    let to = |y: usize| {
        let mut row = vec![0.0; 4];
        row[y] = 1.0;
        row
    };
    SspInstance::new(
        3,
        2,
        0,
        (eta, 4.0 * eta),
        vec![vec![4.0 * eta, eta], vec![eta, eta], vec![eta, eta]],
        vec![vec![to(3), to(1)], vec![to(2), to(2)], vec![to(3), to(3)]],
    )
    .map(|i| i.with_meta("scenario", "toy-offset"))
}

/// Two non-goal states with unit costs. `s0` self-loops (action 0) or exits
/// (action 1); `s1` can only move to `s0` and has no inbound edges.
pub fn make_sspcom_toy() -> SspInstance {
    SspInstance::new(
        2,
        2,
        0,
        (1.0, 1.0),
        vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        vec![
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
        ],
    )
    .expect("static shape")
    .with_meta("scenario", "toy-sspcom")
}

/// The two-state toy plus an absorbing non-goal state `d`: at `s0`, action 0
/// self-loops (`c_min`), action 1 exits (`c_max`), action 2 moves to `d`
/// (`c_min`); every action at `d` self-loops at `c_min`.
pub fn make_dead_end_toy(c_min: f64, c_max: f64) -> Result<SspInstance> {
    if !(c_min > 0.0 && c_min <= c_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < c_min <= c_max, got ({c_min}, {c_max})"
        )));
    }
    SspInstance::new(
        2,
        3,
        0,
        (c_min, c_max),
        vec![vec![c_min, c_max, c_min], vec![c_min; 3]],
        vec![
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 1.0, 0.0]; 3],
        ],
    )
    .map(|i| i.with_meta("scenario", "toy-dead-end"))
}

/// Appends a reset action that reaches the goal from every state with
/// probability one at cost `j`. The declared `c_max` grows to cover `j`.
pub fn with_reset_action(inst: &SspInstance, j: f64) -> Result<SspInstance> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::InvalidParameter(format!("penalty J must be positive, got {j}")));
    }
    let n = inst.n_states();
    let a = inst.n_actions();
    let (c_min, c_max) = inst.cost_bounds();
    let costs = (0..n)
        .map(|s| {
            let mut row = inst.costs_of(s).to_vec();
            row.push(j);
            row
        })
        .collect();
    let kernel = (0..n)
        .map(|s| {
            let mut rows: Vec<Vec<f64>> = (0..a).map(|b| inst.row(s, b).to_vec()).collect();
            let mut reset = vec![0.0; n + 1];
            reset[n] = 1.0;
            rows.push(reset);
            rows
        })
        .collect();
    let mut out = SspInstance::new(n, a + 1, inst.start(), (c_min, c_max.max(j)), costs, kernel)?;
    for (k, v) in inst.meta() {
        out = out.with_meta(k, v.clone());
    }
    Ok(out.with_meta("reset_action", (a).to_string()))
}

fn default_p_f() -> f64 {
    0.05
}
fn default_rows() -> usize {
    3
}
fn default_cols() -> usize {
    4
}

/// Named scenarios for configuration files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Scenario {
    #[serde(rename = "gridworld-uniform")]
    GridworldUniform {
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
        #[serde(default = "default_p_f")]
        p_f: f64,
    },
    #[serde(rename = "gridworld-sandpit")]
    GridworldSandpit {
        beta: f64,
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
        #[serde(default = "default_p_f")]
        p_f: f64,
    },
    #[serde(rename = "gridworld-zero")]
    GridworldZero {
        beta: f64,
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_cols")]
        cols: usize,
        #[serde(default = "default_p_f")]
        p_f: f64,
    },
    #[serde(rename = "toy-two-state")]
    ToyTwoState { c_min: f64, c_max: f64 },
    #[serde(rename = "toy-offset")]
    ToyOffset { eta: f64 },
    #[serde(rename = "toy-sspcom")]
    ToySspcom,
    #[serde(rename = "toy-dead-end")]
    ToyDeadEnd { c_min: f64, c_max: f64 },
}

/// Free parameters accepted by [`Scenario::from_name`]; unset fields take
/// the defaults used in the gridworld study.
#[derive(Debug, Clone, Default)]
pub struct ScenarioParams {
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub p_f: Option<f64>,
}

impl Scenario {
    pub const NAMES: [&'static str; 7] = [
        "gridworld-uniform",
        "gridworld-sandpit",
        "gridworld-zero",
        "toy-two-state",
        "toy-offset",
        "toy-sspcom",
        "toy-dead-end",
    ];

    pub fn from_name(name: &str, params: &ScenarioParams) -> Result<Self> {
        let p_f = params.p_f.unwrap_or(0.05);
        let beta = params.beta.unwrap_or(if name == "gridworld-zero" { 0.4 } else { 0.5 });
        let (c_min, c_max) = (params.c_min.unwrap_or(1.0), params.c_max.unwrap_or(3.0));
        Ok(match name {
            "gridworld-uniform" => Scenario::GridworldUniform { rows: 3, cols: 4, p_f },
            "gridworld-sandpit" => Scenario::GridworldSandpit {
                beta,
                rows: 3,
                cols: 4,
                p_f,
            },
            "gridworld-zero" => Scenario::GridworldZero {
                beta,
                rows: 3,
                cols: 4,
                p_f,
            },
            "toy-two-state" => Scenario::ToyTwoState { c_min, c_max },
            "toy-offset" => Scenario::ToyOffset {
                eta: params.eta.unwrap_or(1.0),
            },
            "toy-sspcom" => Scenario::ToySspcom,
            "toy-dead-end" => Scenario::ToyDeadEnd { c_min, c_max },
            other => return Err(Error::InvalidParameter(format!("unknown scenario {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::GridworldUniform { .. } => "gridworld-uniform",
            Scenario::GridworldSandpit { .. } => "gridworld-sandpit",
            Scenario::GridworldZero { .. } => "gridworld-zero",
            Scenario::ToyTwoState { .. } => "toy-two-state",
            Scenario::ToyOffset { .. } => "toy-offset",
            Scenario::ToySspcom => "toy-sspcom",
            Scenario::ToyDeadEnd { .. } => "toy-dead-end",
        }
    }

    pub fn build(&self) -> Result<SspInstance> {
        match *self {
            Scenario::GridworldUniform { rows, cols, p_f } => make_gridworld(rows, cols, p_f, GridScenario::Uniform),
            Scenario::GridworldSandpit { beta, rows, cols, p_f } => {
                make_gridworld(rows, cols, p_f, GridScenario::Sandpit { beta })
            }
            Scenario::GridworldZero { beta, rows, cols, p_f } => {
                make_gridworld(rows, cols, p_f, GridScenario::ZeroRegion { beta })
            }
            Scenario::ToyTwoState { c_min, c_max } => make_two_state_toy(c_min, c_max),
            Scenario::ToyOffset { eta } => make_offset_example(eta),
            Scenario::ToySspcom => Ok(make_sspcom_toy()),
            Scenario::ToyDeadEnd { c_min, c_max } => make_dead_end_toy(c_min, c_max),
        }
    }
}

/// A seeded RNG on one of the documented streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws an index from a probability row by inversion.
pub fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Sample-only access to an instance. Learners see dimensions, the start
/// state, the declared cost range and, when costs are deterministic, the
/// cost table; the kernel stays hidden.
#[derive(Debug, Clone)]
pub struct Environment {
    inst: SspInstance,
    state: Option<usize>,
    rng: ChaCha8Rng,
    cost_rng: Option<ChaCha8Rng>,
}

impl Environment {
    pub fn new(inst: SspInstance, seed: u64) -> Self {
        let start = inst.start();
        Self {
            inst,
            state: Some(start),
            rng: stream_rng(seed, TRANSITION_STREAM),
            cost_rng: None,
        }
    }

    /// Observed costs become Bernoulli draws on `{c_min, c_max}` with mean
    /// `c(s,a)`.
    pub fn with_cost_noise(inst: SspInstance, seed: u64) -> Result<Self> {
        let (c_min, c_max) = inst.cost_bounds();
        if !(c_max > c_min) {
            return Err(Error::Precondition("cost noise needs c_max > c_min".into()));
        }
        let mut env = Self::new(inst, seed);
        env.cost_rng = Some(stream_rng(seed, COST_STREAM));
        Ok(env)
    }

    pub fn n_states(&self) -> usize {
        self.inst.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.inst.n_actions()
    }

    pub fn start(&self) -> usize {
        self.inst.start()
    }

    pub fn cost_bounds(&self) -> (f64, f64) {
        self.inst.cost_bounds()
    }

    /// The cost table, unless costs are sampled.
    pub fn known_costs(&self) -> Option<&[f64]> {
        self.cost_rng.is_none().then(|| self.inst.cost_table())
    }

    pub fn stochastic_costs(&self) -> bool {
        self.cost_rng.is_some()
    }

    /// Current state, `None` at the goal.
    pub fn state(&self) -> Option<usize> {
        self.state
    }

    pub fn reset(&mut self) -> usize {
        let s = self.inst.start();
        self.state = Some(s);
        s
    }

    /// Plays `a`; returns the successor (`n_states` for the goal) and the
    /// observed cost.
    pub fn step(&mut self, a: usize) -> Result<(usize, f64)> {
        let s = self.state.ok_or(Error::StepAtGoal)?;
        if a >= self.inst.n_actions() {
            return Err(Error::InvalidParameter(format!("action {a} out of range")));
        }
        let next = sample_row(self.inst.row(s, a), &mut self.rng);
        let mean = self.inst.cost(s, a);
        let cost = match &mut self.cost_rng {
            None => mean,
            Some(rng) => {
                let (c_min, c_max) = self.inst.cost_bounds();
                let p_high = ((mean - c_min) / (c_max - c_min)).clamp(0.0, 1.0);
                if rng.gen::<f64>() < p_high {
                    c_max
                } else {
                    c_min
                }
            }
        };
        self.state = (next < self.inst.n_states()).then_some(next);
        Ok((next, cost))
    }
}
