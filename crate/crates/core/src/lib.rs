//! Tabular stochastic-shortest-path (SSP) toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the SSP instance, policies, value vectors and instance validation.
//! - [`solve`]: exact planning oracles (value iteration, the finite-penalty
//!   operator, the perturbed proper-policy oracle, the SSP-diameter).
//! - [`chain`]: absorbing Markov chains of stationary policies and the
//!   discrete phase-type analytics of their hitting times.
//! - [`env`]: concrete instances (gridworlds, toy MDPs) and the sample-only
//!   [`env::Environment`] learners interact with.
//! - [`confidence`] and [`planner`]: confidence sets over kernels (and
//!   costs), extended value iteration and the pivot horizon.
//! - [`agent`]: the two-phase optimistic SSP learner and its variants.
//! - [`baselines`]: the infinite-horizon reduction, UCRL2 and a
//!   doubling-epoch SSP-planning baseline.
//! - [`record`]: run traces, regret diagnostics and their CSV/JSON forms.
//!
//! The goal state is never stored: states are indexed `0..n_states` and the
//! index `n_states` denotes the goal wherever a successor index is expected.

pub mod agent;
pub mod baselines;
pub mod chain;
pub mod confidence;
pub mod env;
mod error;
pub mod model;
pub mod planner;
pub mod record;
pub mod solve;

pub use error::{Error, Result};
pub use model::{SspInstance, StationaryPolicy, ValidationReport, ValueVector};
