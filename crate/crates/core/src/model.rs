//! SSP instances, stationary policies and instance validation.

use std::collections::BTreeMap;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::{solve, Error, Result};

/// Row-sum slack for probability rows and absorbing-chain rows.
pub const ROW_TOL: f64 = 1e-12;

/// A finite SSP: `n_states` non-goal states, `n_actions` actions, a kernel
/// over the non-goal states plus the implicit absorbing goal (index
/// `n_states`), per-pair costs and a start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct SspInstance {
    n_states: usize,
    n_actions: usize,
    start: usize,
    c_min: f64,
    c_max: f64,
    costs: Vec<f64>,
    kernel: Vec<f64>,
    meta: BTreeMap<String, String>,
}

/// Wire form of [`SspInstance`]: nested, row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDoc {
    n_states: usize,
    n_actions: usize,
    start: usize,
    c_min: f64,
    c_max: f64,
    costs: Vec<Vec<f64>>,
    kernel: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
}

impl TryFrom<InstanceDoc> for SspInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        let mut inst = SspInstance::new(
            doc.n_states,
            doc.n_actions,
            doc.start,
            (doc.c_min, doc.c_max),
            doc.costs,
            doc.kernel,
        )?;
        inst.meta = doc.meta;
        Ok(inst)
    }
}

impl From<SspInstance> for InstanceDoc {
    fn from(inst: SspInstance) -> Self {
        let costs = (0..inst.n_states).map(|s| inst.costs_of(s).to_vec()).collect();
        let kernel = (0..inst.n_states)
            .map(|s| (0..inst.n_actions).map(|a| inst.row(s, a).to_vec()).collect())
            .collect();
        InstanceDoc {
            n_states: inst.n_states,
            n_actions: inst.n_actions,
            start: inst.start,
            c_min: inst.c_min,
            c_max: inst.c_max,
            costs,
            kernel,
            meta: inst.meta,
        }
    }
}

impl SspInstance {
    /// Builds an instance from nested arrays. Only shapes are checked here;
    /// probability and cost invariants are reported by [`validate_instance`].
    pub fn new(
        n_states: usize,
        n_actions: usize,
        start: usize,
        (c_min, c_max): (f64, f64),
        costs: Vec<Vec<f64>>,
        kernel: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension("need at least one state and one action".into()));
        }
        if start >= n_states {
            return Err(Error::Dimension(format!(
                "start {start} is not a non-goal state (n_states = {n_states})"
            )));
        }
        if costs.len() != n_states || costs.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Dimension(format!("costs must be {n_states} x {n_actions}")));
        }
        if kernel.len() != n_states
            || kernel
                .iter()
                .any(|rows| rows.len() != n_actions || rows.iter().any(|r| r.len() != n_states + 1))
        {
            return Err(Error::Dimension(format!(
                "kernel must be {n_states} x {n_actions} x {}",
                n_states + 1
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            start,
            c_min,
            c_max,
            costs: costs.into_iter().flatten().collect(),
            kernel: kernel.into_iter().flatten().flatten().collect(),
            meta: BTreeMap::new(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Index used for the goal in successor rows.
    pub fn goal(&self) -> usize {
        self.n_states
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn cost_bounds(&self) -> (f64, f64) {
        (self.c_min, self.c_max)
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.costs[s * self.n_actions + a]
    }

    pub fn costs_of(&self, s: usize) -> &[f64] {
        &self.costs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Flat `S x A` cost table.
    pub fn cost_table(&self) -> &[f64] {
        &self.costs
    }

    /// `p(. | s, a)` over the non-goal states followed by the goal.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let w = self.n_states + 1;
        let base = (s * self.n_actions + a) * w;
        &self.kernel[base..base + w]
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    /// Same dynamics, new cost table and declared bounds.
    pub fn with_costs(&self, costs: Vec<f64>, bounds: (f64, f64)) -> Result<Self> {
        if costs.len() != self.n_states * self.n_actions {
            return Err(Error::Dimension("cost table has the wrong length".into()));
        }
        Ok(Self {
            costs,
            c_min: bounds.0,
            c_max: bounds.1,
            ..self.clone()
        })
    }

    /// Adds `offset` to every non-goal cost.
    pub fn offset_costs(&self, offset: f64) -> Self {
        let costs = self.costs.iter().map(|c| c + offset).collect();
        Self {
            costs,
            c_min: self.c_min + offset,
            c_max: self.c_max + offset,
            ..self.clone()
        }
    }

    /// True when every non-goal cost is the same value.
    pub fn has_uniform_costs(&self) -> bool {
        let c0 = self.costs[0];
        self.costs.iter().all(|&c| c == c0)
    }
}

/// Deterministic stationary policy: one action per non-goal state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationaryPolicy(Vec<usize>);

impl StationaryPolicy {
    pub fn new(actions: Vec<usize>, n_actions: usize) -> Result<Self> {
        if let Some((s, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
            return Err(Error::InvalidParameter(format!(
                "policy picks action {a} at state {s}, but only {n_actions} actions exist"
            )));
        }
        Ok(Self(actions))
    }

    /// Every state takes action `a`.
    pub fn constant(n_states: usize, a: usize) -> Self {
        Self(vec![a; n_states])
    }

    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One value per non-goal state; the goal value is implicitly zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValueVector(pub Vec<f64>);

impl ValueVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Deref for ValueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ValueVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowViolation {
    pub state: usize,
    pub action: usize,
    pub sum: f64,
    pub has_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostViolation {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub row_violations: Vec<RowViolation>,
    pub cost_violations: Vec<CostViolation>,
    /// Set when the declared bounds themselves are not `0 <= c_min <= c_max`.
    pub bad_cost_bounds: bool,
    pub ssp_communicating: bool,
    /// `max_s min_pi E[tau_pi(s)]`; `f64::INFINITY` when some state cannot
    /// reach the goal almost surely under any policy.
    pub ssp_diameter: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.row_violations.is_empty() && self.cost_violations.is_empty() && !self.bad_cost_bounds
    }
}

/// Reports every invariant violation of `inst` and computes its SSP-diameter.
pub fn validate_instance(inst: &SspInstance) -> ValidationReport {
    let mut row_violations = Vec::new();
    let mut cost_violations = Vec::new();
    let (c_min, c_max) = inst.cost_bounds();
    for s in 0..inst.n_states() {
        for a in 0..inst.n_actions() {
            let row = inst.row(s, a);
            let sum: f64 = row.iter().sum();
            let has_negative = row.iter().any(|&p| p < 0.0 || !p.is_finite());
            if has_negative || (sum - 1.0).abs() > ROW_TOL {
                row_violations.push(RowViolation {
                    state: s,
                    action: a,
                    sum,
                    has_negative,
                });
            }
            let c = inst.cost(s, a);
            if !(c >= c_min - ROW_TOL && c <= c_max + ROW_TOL) {
                cost_violations.push(CostViolation {
                    state: s,
                    action: a,
                    cost: c,
                });
            }
        }
    }
    let bad_cost_bounds = !(c_min >= 0.0 && c_min <= c_max);
    let ssp_diameter = if row_violations.is_empty() {
        solve::ssp_diameter(inst)
    } else {
        f64::INFINITY
    };
    ValidationReport {
        row_violations,
        cost_violations,
        bad_cost_bounds,
        ssp_communicating: ssp_diameter.is_finite(),
        ssp_diameter,
    }
}
