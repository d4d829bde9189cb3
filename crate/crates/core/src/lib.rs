//! Collaborative contextual bandits for abruptly changing environments.
//!
//! A pool of shared Bayesian linear models is maintained under a Dirichlet
//! process prior. Each user is served by one model at a time, chosen by a
//! collapsed Gibbs step over the user's recent observations; a per-user
//! change detector empties those observations when the user's behaviour
//! shifts, and arms are selected by Thompson sampling.
//!
//! Alongside the policy the crate provides per-user LinUCB, Thompson
//! sampling with and without detector restarts, an oracle LinUCB, synthetic
//! environment generators, regret and replay evaluators, and an experiment
//! runner.

pub mod bayes_linear;
pub mod change_detect;
pub mod dp_pool;
pub mod environment;
pub mod error;
pub mod evaluation;
pub mod policies;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
