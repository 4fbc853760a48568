//! Visit counts, empirical kernels and confidence sets.
//!
//! Radii use `S' = n_states + 1` (the goal included) as the state count and
//! `N+ = max(1, N(s,a))` as the sample count.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SspInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// L1 ball, `sqrt(8 S log(2 A N+ / delta) / N+)`.
    HoeffdingTheoretical,
    /// L1 ball without constants, `sqrt(S L / N+)` with `L = log(S A N+ / delta)`.
    HoeffdingExperimental,
    /// Per-element box, `sqrt(p(1-p) L / N+) + L / N+`.
    Bernstein,
}

impl ConfidenceMode {
    pub fn is_l1(self) -> bool {
        !matches!(self, ConfidenceMode::Bernstein)
    }
}

pub fn radius_l1(mode: ConfidenceMode, n_states: usize, n_actions: usize, n_plus: u64, delta: f64) -> Result<f64> {
    let s = n_states as f64;
    let a = n_actions as f64;
    let n = n_plus.max(1) as f64;
    match mode {
        ConfidenceMode::HoeffdingTheoretical => Ok((8.0 * s * (2.0 * a * n / delta).ln() / n).sqrt()),
        ConfidenceMode::HoeffdingExperimental => Ok((s * (s * a * n / delta).ln() / n).sqrt()),
        ConfidenceMode::Bernstein => Err(Error::WrongMode("bernstein")),
    }
}

pub fn radius_bernstein(p_hat: f64, n_states: usize, n_actions: usize, n_plus: u64, delta: f64) -> f64 {
    let n = n_plus.max(1) as f64;
    let l = (n_states as f64 * n_actions as f64 * n / delta).ln();
    (p_hat * (1.0 - p_hat) * l / n).sqrt() + l / n
}

/// Cost radius `2 sqrt(log(6 S A N+ / delta) / N+)`.
pub fn radius_cost(n_states: usize, n_actions: usize, n_plus: u64, delta: f64) -> f64 {
    let n = n_plus.max(1) as f64;
    2.0 * ((6.0 * n_states as f64 * n_actions as f64 * n / delta).ln() / n).sqrt()
}

/// `N(s,a)` and `N(s,a,s')` over non-goal pairs and `S'` successors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    n_states: usize,
    n_actions: usize,
    sa: Vec<u64>,
    sas: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            sa: vec![0; n_states * n_actions],
            sas: vec![0; n_states * n_actions * (n_states + 1)],
        }
    }

    pub fn record(&mut self, s: usize, a: usize, next: usize) {
        let i = s * self.n_actions + a;
        self.sa[i] += 1;
        self.sas[i * (self.n_states + 1) + next] += 1;
    }

    pub fn n(&self, s: usize, a: usize) -> u64 {
        self.sa[s * self.n_actions + a]
    }

    pub fn n_next(&self, s: usize, a: usize, next: usize) -> u64 {
        self.sas[(s * self.n_actions + a) * (self.n_states + 1) + next]
    }

    pub fn next_counts(&self, s: usize, a: usize) -> &[u64] {
        let w = self.n_states + 1;
        let i = (s * self.n_actions + a) * w;
        &self.sas[i..i + w]
    }

    pub fn total(&self) -> u64 {
        self.sa.iter().sum()
    }

    pub fn add(&mut self, other: &TransitionCounts) {
        for (x, y) in self.sa.iter_mut().zip(&other.sa) {
            *x += y;
        }
        for (x, y) in self.sas.iter_mut().zip(&other.sas) {
            *x += y;
        }
    }

    pub fn clear(&mut self) {
        self.sa.iter_mut().for_each(|x| *x = 0);
        self.sas.iter_mut().for_each(|x| *x = 0);
    }
}

#[derive(Debug, Clone)]
struct CostStats {
    c_min: f64,
    c_max: f64,
    sum: Vec<f64>,
    count: Vec<u64>,
}

/// Counts plus the confidence mode; defines the set of plausible kernels
/// (and, with stochastic costs, plausible costs).
#[derive(Debug, Clone)]
pub struct ConfidenceModel {
    counts: TransitionCounts,
    mode: ConfidenceMode,
    delta: f64,
    costs: Option<CostStats>,
}

impl ConfidenceModel {
    pub fn new(n_states: usize, n_actions: usize, mode: ConfidenceMode, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            counts: TransitionCounts::new(n_states, n_actions),
            mode,
            delta,
            costs: None,
        })
    }

    /// Enables cost statistics clipped to `[c_min, c_max]`.
    pub fn with_stochastic_costs(mut self, c_min: f64, c_max: f64) -> Self {
        let m = self.n_states() * self.n_actions();
        self.costs = Some(CostStats {
            c_min,
            c_max,
            sum: vec![0.0; m],
            count: vec![0; m],
        });
        self
    }

    pub fn n_states(&self) -> usize {
        self.counts.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.counts.n_actions
    }

    pub fn mode(&self) -> ConfidenceMode {
        self.mode
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    /// Adds the attempt counts `nu` and clears them.
    pub fn fold(&mut self, nu: &mut TransitionCounts) {
        self.counts.add(nu);
        nu.clear();
    }

    pub fn n_plus(&self, s: usize, a: usize) -> u64 {
        self.counts.n(s, a).max(1)
    }

    /// Empirical row over `S'`; uniform when `(s,a)` was never visited.
    pub fn p_hat_into(&self, s: usize, a: usize, out: &mut [f64]) {
        let n = self.counts.n(s, a);
        if n == 0 {
            out.fill(1.0 / out.len() as f64);
        } else {
            for (o, &c) in out.iter_mut().zip(self.counts.next_counts(s, a)) {
                *o = c as f64 / n as f64;
            }
        }
    }

    pub fn p_hat(&self, s: usize, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_states() + 1];
        self.p_hat_into(s, a, &mut out);
        out
    }

    pub fn radius_l1(&self, s: usize, a: usize) -> Result<f64> {
        radius_l1(
            self.mode,
            self.n_states() + 1,
            self.n_actions(),
            self.n_plus(s, a),
            self.delta,
        )
    }

    /// Per-element radii of row `(s,a)` given its empirical row.
    pub fn radii_bernstein_into(&self, s: usize, a: usize, p_hat: &[f64], out: &mut [f64]) {
        let n_plus = self.n_plus(s, a);
        for (o, &p) in out.iter_mut().zip(p_hat) {
            *o = radius_bernstein(p, self.n_states() + 1, self.n_actions(), n_plus, self.delta);
        }
    }

    pub fn stochastic_costs(&self) -> bool {
        self.costs.is_some()
    }

    /// Records an observed cost and returns the updated interval.
    pub fn update_cost_bounds(&mut self, s: usize, a: usize, cost: f64) -> Result<(f64, f64)> {
        let na = self.n_actions();
        let stats = self
            .costs
            .as_mut()
            .ok_or(Error::Precondition("stochastic-cost mode is not enabled".into()))?;
        if !(cost >= stats.c_min && cost <= stats.c_max) {
            return Err(Error::CostOutOfRange {
                cost,
                c_min: stats.c_min,
                c_max: stats.c_max,
            });
        }
        stats.sum[s * na + a] += cost;
        stats.count[s * na + a] += 1;
        Ok(self.cost_interval(s, a))
    }

    /// `[c_hat - beta', c_hat + beta'] ∩ [c_min, c_max]`; the full range
    /// before the first observation or outside stochastic-cost mode.
    pub fn cost_interval(&self, s: usize, a: usize) -> (f64, f64) {
        let Some(stats) = &self.costs else {
            return (f64::NEG_INFINITY, f64::INFINITY);
        };
        let i = s * self.n_actions() + a;
        let n = stats.count[i];
        if n == 0 {
            return (stats.c_min, stats.c_max);
        }
        let mean = stats.sum[i] / n as f64;
        let beta = radius_cost(self.n_states() + 1, self.n_actions(), n, self.delta);
        (
            (mean - beta).clamp(stats.c_min, stats.c_max),
            (mean + beta).clamp(stats.c_min, stats.c_max),
        )
    }

    /// Optimistic cost table: lower ends of the cost intervals.
    pub fn optimistic_costs(&self) -> Vec<f64> {
        let (n, a) = (self.n_states(), self.n_actions());
        (0..n * a).map(|i| self.cost_interval(i / a, i % a).0).collect()
    }

    /// Whether every row of `inst`'s kernel lies in its confidence set.
    pub fn contains_kernel(&self, inst: &SspInstance) -> bool {
        let w = self.n_states() + 1;
        let mut p_hat = vec![0.0; w];
        let mut radii = vec![0.0; w];
        for s in 0..self.n_states() {
            for a in 0..self.n_actions() {
                self.p_hat_into(s, a, &mut p_hat);
                let p = inst.row(s, a);
                if self.mode.is_l1() {
                    let dist: f64 = p.iter().zip(&p_hat).map(|(x, y)| (x - y).abs()).sum();
                    if dist > self.radius_l1(s, a).expect("l1 mode") {
                        return false;
                    }
                } else {
                    self.radii_bernstein_into(s, a, &p_hat, &mut radii);
                    if p.iter().zip(&p_hat).zip(&radii).any(|((x, y), r)| (x - y).abs() > *r) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Ordering of successor indices by ascending value, ties to the lowest index.
pub fn ascending_order(v: &[f64], order: &mut Vec<usize>) {
    order.clear();
    order.extend(0..v.len());
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)));
}

/// Exact minimiser of `<p, v>` over the L1 ball of radius `beta` around
/// `p_hat` intersected with the simplex. `order` is `v` sorted ascending.
pub fn inner_min_l1(p_hat: &[f64], beta: f64, order: &[usize], out: &mut [f64]) {
    out.copy_from_slice(p_hat);
    let best = order[0];
    out[best] = (p_hat[best] + beta / 2.0).min(1.0);
    let mut excess = out[best] - p_hat[best];
    for &l in order.iter().rev() {
        if excess <= 0.0 {
            break;
        }
        if l == best {
            continue;
        }
        let take = out[l].min(excess);
        out[l] -= take;
        excess -= take;
    }
}

/// Exact minimiser of `<p, v>` over the box `[p_hat - r, p_hat + r] ∩ [0, 1]`
/// intersected with the simplex: start from the lower bounds and fill the
/// remaining mass from the lowest values upward.
pub fn inner_min_box(p_hat: &[f64], radii: &[f64], order: &[usize], out: &mut [f64]) -> Result<()> {
    let mut upper_sum = 0.0;
    let mut lower_sum = 0.0;
    for ((o, &p), &r) in out.iter_mut().zip(p_hat).zip(radii) {
        *o = (p - r).max(0.0);
        lower_sum += *o;
        upper_sum += (p + r).min(1.0);
    }
    if upper_sum < 1.0 - 1e-12 {
        return Err(Error::Infeasible(upper_sum));
    }
    let mut remaining = 1.0 - lower_sum;
    for &i in order {
        if remaining <= 0.0 {
            break;
        }
        let room = (p_hat[i] + radii[i]).min(1.0) - out[i];
        let add = room.min(remaining).max(0.0);
        out[i] += add;
        remaining -= add;
    }
    Ok(())
}

/// Radius description for [`inner_min`].
#[derive(Debug, Clone, Copy)]
pub enum Radii<'a> {
    L1(f64),
    PerElement(&'a [f64]),
}

/// Optimistic row minimising `<p, v>` over the confidence set around `p_hat`.
/// `v` covers `S'`, the goal included.
pub fn inner_min(p_hat: &[f64], radii: Radii<'_>, v: &[f64]) -> Result<Vec<f64>> {
    if p_hat.len() != v.len() {
        return Err(Error::Dimension("p_hat and v must have the same length".into()));
    }
    let mut order = Vec::with_capacity(v.len());
    ascending_order(v, &mut order);
    let mut out = vec![0.0; v.len()];
    match radii {
        Radii::L1(beta) => inner_min_l1(p_hat, beta, &order, &mut out),
        Radii::PerElement(r) => {
            if r.len() != v.len() {
                return Err(Error::Dimension("radii must cover every successor".into()));
            }
            inner_min_box(p_hat, r, &order, &mut out)?
        }
    }
    Ok(out)
}
