//! Absorbing Markov chains of stationary policies and the discrete
//! phase-type law of their hitting times.
//!
//! For a policy `pi` the transition matrix over `S ∪ {goal}` has the
//! canonical form `[[Q, R], [0, 1]]`. Everything here works on the
//! substochastic block `Q` and the exit vector `R`:
//!
//! - `P(tau(s) > n) = 1_s' Q^n 1`
//! - `E[tau] = (I - Q)^{-1} 1`
//! - `E[(tau)_r] = r! (I - Q)^{-r} Q^{r-1} 1` (factorial moments), converted
//!   to raw moments with Stirling numbers of the second kind.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::ROW_TOL;
use crate::{Error, Result, SspInstance, StationaryPolicy, ValueVector};

/// Highest moment order with exact `u64` Stirling numbers.
pub const MAX_MOMENT_ORDER: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingChain {
    n: usize,
    /// Row-major `n x n` transitions between non-goal states.
    q: Vec<f64>,
    /// Transition probabilities into the goal.
    r: Vec<f64>,
}

impl AbsorbingChain {
    pub fn new(q: Vec<Vec<f64>>, r: Vec<f64>) -> Result<Self> {
        let n = r.len();
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("q must be {n} x {n}")));
        }
        Self::from_flat(n, q.into_iter().flatten().collect(), r)
    }

    /// Builds a chain from a row-major `q` and exit vector `r`, checking
    /// nonnegativity and `q 1 + r = 1`.
    pub fn from_flat(n: usize, q: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if q.len() != n * n || r.len() != n {
            return Err(Error::Dimension(format!("q must be {n} x {n}")));
        }
        for s in 0..n {
            let row = &q[s * n..(s + 1) * n];
            if row.iter().any(|&p| p < 0.0) || r[s] < 0.0 {
                return Err(Error::InvalidParameter(format!("negative probability in row {s}")));
            }
            let sum = row.iter().sum::<f64>() + r[s];
            if (sum - 1.0).abs() > 1e3 * ROW_TOL {
                return Err(Error::InvalidParameter(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Self { n, q, r })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn q(&self, s: usize, y: usize) -> f64 {
        self.q[s * self.n + y]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n..(s + 1) * self.n]
    }

    pub fn exit(&self, s: usize) -> f64 {
        self.r[s]
    }

    /// `out = Q v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = self.q_row(s).iter().zip(v).map(|(p, x)| p * x).sum();
        }
    }

    /// `max_s (Q^n 1)_s`, i.e. `||Q^n||_inf` for a nonnegative matrix.
    pub fn power_norm(&self, n: u64) -> f64 {
        let v = self.tail_vector(n);
        v.iter().fold(0.0, |m: f64, x| m.max(*x))
    }

    /// `Q^n 1` by repeated products.
    pub fn tail_vector(&self, n: u64) -> Vec<f64> {
        let mut v = vec![1.0; self.n];
        let mut w = vec![0.0; self.n];
        for _ in 0..n {
            self.apply(&v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
        v
    }

    /// First state that cannot reach the goal, if any. A chain is proper
    /// (spectral radius of `Q` below one) iff every state has a path to a
    /// state with positive exit probability.
    pub fn improper_state(&self) -> Option<usize> {
        let mut reaches = vec![false; self.n];
        let mut frontier: Vec<usize> = (0..self.n).filter(|&s| self.r[s] > 0.0).collect();
        for &s in &frontier {
            reaches[s] = true;
        }
        while let Some(y) = frontier.pop() {
            for s in 0..self.n {
                if !reaches[s] && self.q(s, y) > 0.0 {
                    reaches[s] = true;
                    frontier.push(s);
                }
            }
        }
        reaches.iter().position(|&ok| !ok)
    }

    pub fn is_proper(&self) -> bool {
        self.improper_state().is_none()
    }

    /// LU factorisation of `I - Q`, refusing improper chains.
    pub fn fundamental(&self) -> Result<Fundamental> {
        if let Some(state) = self.improper_state() {
            return Err(Error::ImproperPolicy { state });
        }
        let m = DMatrix::from_fn(self.n, self.n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.q(i, j)
        });
        Ok(Fundamental { lu: m.lu() })
    }

    /// Solves `(I - Q) x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.fundamental()?.solve(rhs)
    }
}

/// Factorised `I - Q` of a proper chain.
pub struct Fundamental {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Fundamental {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = DVector::from_column_slice(rhs);
        let x = self.lu.solve(&b).ok_or(Error::ImproperPolicy { state: 0 })?;
        if let Some(state) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::ImproperPolicy { state });
        }
        Ok(x.iter().copied().collect())
    }
}

/// Canonical `(Q, R)` decomposition of `pol` in `inst`.
pub fn chain_of(inst: &SspInstance, pol: &StationaryPolicy) -> AbsorbingChain {
    let n = inst.n_states();
    let mut q = Vec::with_capacity(n * n);
    let mut r = Vec::with_capacity(n);
    for s in 0..n {
        let row = inst.row(s, pol.action(s));
        q.extend_from_slice(&row[..n]);
        r.push(row[n]);
    }
    AbsorbingChain { n, q, r }
}

/// `P(tau(start) > n) = 1_start' Q^n 1`.
pub fn hitting_tail(chain: &AbsorbingChain, start: usize, n: u64) -> f64 {
    chain.tail_vector(n)[start]
}

/// `E[tau(s)]` for every start state: `(I - Q)^{-1} 1`.
pub fn expected_hitting_times(chain: &AbsorbingChain) -> Result<ValueVector> {
    Ok(ValueVector(chain.solve(&vec![1.0; chain.n])?))
}

/// Value of `pol` under per-state costs `c_pi`: `(I - Q)^{-1} c_pi`.
pub fn evaluate_policy(inst: &SspInstance, pol: &StationaryPolicy, offset: f64) -> Result<ValueVector> {
    let chain = chain_of(inst, pol);
    let c: Vec<f64> = (0..inst.n_states())
        .map(|s| inst.cost(s, pol.action(s)) + offset)
        .collect();
    Ok(ValueVector(chain.solve(&c)?))
}

/// `r`-th factorial moment `E[tau (tau - 1) ... (tau - r + 1)]` from `start`.
pub fn ph_factorial_moment(chain: &AbsorbingChain, start: usize, r: u32) -> Result<f64> {
    if r == 0 {
        return Err(Error::UnsupportedOrder(r));
    }
    Ok(factorial_moments(chain, start, r)?[r as usize - 1])
}

/// Factorial moments of orders `1..=r`.
fn factorial_moments(chain: &AbsorbingChain, start: usize, r: u32) -> Result<Vec<f64>> {
    let fund = chain.fundamental()?;
    let mut out = Vec::with_capacity(r as usize);
    // w = Q^{j-1} 1
    let mut w = vec![1.0; chain.n];
    let mut scratch = vec![0.0; chain.n];
    let mut fact = 1.0;
    for j in 1..=r {
        if j > 1 {
            chain.apply(&w, &mut scratch);
            std::mem::swap(&mut w, &mut scratch);
        }
        fact *= j as f64;
        let mut x = w.clone();
        for _ in 0..j {
            x = fund.solve(&x)?;
        }
        out.push(fact * x[start]);
    }
    Ok(out)
}

/// Stirling numbers of the second kind `{n; k}` for `k = 0..=n`.
pub fn stirling2_row(n: u32) -> Vec<u64> {
    let n = n as usize;
    let mut row = vec![1u64];
    for i in 1..=n {
        let mut next = vec![0u64; i + 1];
        for k in 1..=i {
            let carry = if k < row.len() { k as u64 * row[k] } else { 0 };
            next[k] = carry + row[k - 1];
        }
        row = next;
    }
    row
}

/// `E[tau^r] = sum_j {r; j} E[(tau)_j]`.
pub fn ph_raw_moment(chain: &AbsorbingChain, start: usize, r: u32) -> Result<f64> {
    if r == 0 || r > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder(r));
    }
    let fm = factorial_moments(chain, start, r)?;
    let stirling = stirling2_row(r);
    Ok((1..=r as usize).map(|j| stirling[j] as f64 * fm[j - 1]).sum())
}
