//! Bandit policies behind one decision interface.
//!
//! The protocol for a user is strictly `choose` then `feedback` for the
//! chosen context; different users may be interleaved freely. Only CoDBand
//! and oracle-LinUCB share state across users.

mod baseline;
mod codband;
mod linucb;
mod thompson;

pub use baseline::{FixedLinear, RandomPolicy};
pub use codband::{Codband, CodbandConfig};
pub use linucb::{LinUcb, LinUcbConfig, OracleLinUcb};
pub use thompson::{ThompsonConfig, ThompsonSampling};

use crate::bayes_linear::{Context, Vector};
use crate::dp_pool::ModelKey;
use crate::environment::UserId;
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub arm_index: usize,
    pub model_key: Option<ModelKey>,
    pub sampled_theta: Option<Vector>,
}

impl Decision {
    pub fn arm(arm_index: usize) -> Self {
        Decision {
            arm_index,
            model_key: None,
            sampled_theta: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeedbackOutcome {
    /// The user's change detector fired on this observation.
    pub detected: bool,
    /// Model serving the user after the update, when the policy has one.
    pub model_key: Option<ModelKey>,
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Ground-truth model id of `user` for the upcoming round. Only the
    /// simulator calls this; policies other than the oracle ignore it.
    fn reveal_truth(&mut self, _user: UserId, _model_id: u64) {}

    fn choose(
        &mut self,
        user: UserId,
        candidates: &[Context],
        rng: &mut SimRng,
    ) -> Result<Decision>;

    fn feedback(
        &mut self,
        user: UserId,
        context: &Context,
        reward: f64,
        rng: &mut SimRng,
    ) -> Result<FeedbackOutcome>;
}

/// Index of the largest score, lowest index on ties. NaN never wins.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

pub(crate) fn check_candidates(candidates: &[Context], dim: usize) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::param("candidates", "empty candidate list"));
    }
    for c in candidates {
        Error::check_dim(dim, c.dim())?;
    }
    Ok(())
}

/// Names accepted by [`build_policy`].
pub const POLICY_NAMES: &[&str] = &[
    "codband",
    "linucb",
    "oracle-linucb",
    "restart-ts",
    "ts",
    "random",
];

/// Hyperparameters shared by every policy kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub dim: usize,
    pub ridge: f64,
    pub noise_sd: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: usize,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gibbs_every: usize,
}

pub fn build_policy(name: &str, h: &Hyper, rng: &mut SimRng) -> Result<Box<dyn Policy>> {
    let linucb = LinUcbConfig {
        dim: h.dim,
        ridge: h.ridge,
        noise_sd: h.noise_sd,
        delta1: h.delta1,
    };
    let ts = |restart| ThompsonConfig {
        dim: h.dim,
        ridge: h.ridge,
        noise_sd: h.noise_sd,
        delta1: h.delta1,
        delta2: h.delta2,
        tau: h.tau,
        restart,
    };
    Ok(match name {
        "codband" => Box::new(Codband::new(
            CodbandConfig {
                dim: h.dim,
                ridge: h.ridge,
                noise_sd: h.noise_sd,
                delta1: h.delta1,
                delta2: h.delta2,
                tau: h.tau,
                gamma_a: h.gamma_a,
                gamma_b: h.gamma_b,
                gibbs_every: h.gibbs_every,
            },
            rng,
        )?),
        "linucb" => Box::new(LinUcb::new(linucb)?),
        "oracle-linucb" => Box::new(OracleLinUcb::new(linucb)?),
        "restart-ts" => Box::new(ThompsonSampling::new(ts(true))?),
        "ts" => Box::new(ThompsonSampling::new(ts(false))?),
        "random" => Box::new(RandomPolicy::new()),
        other => {
            return Err(Error::Config(format!(
                "unknown policy `{other}` (expected one of {})",
                POLICY_NAMES.join(", ")
            )))
        }
    })
}
