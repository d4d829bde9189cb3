use std::collections::HashMap;

use crate::bayes_linear::{Context, Observation, SuffStats};
use crate::environment::UserId;
use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::{argmax, check_candidates, Decision, FeedbackOutcome, Policy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinUcbConfig {
    pub dim: usize,
    pub ridge: f64,
    pub noise_sd: f64,
    pub delta1: f64,
}

impl LinUcbConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        // Exercises the ridge/δ₁ checks once up front.
        SuffStats::new(self.dim).ridge_fit(self.ridge, self.noise_sd, self.delta1)?;
        Ok(())
    }
}

/// UCB choice `argmax xᵀθ̂ + CB(x)` on one set of statistics.
fn ucb_choose(
    stats: &SuffStats,
    config: &LinUcbConfig,
    candidates: &[Context],
) -> Result<Decision> {
    check_candidates(candidates, config.dim)?;
    let fit = stats.ridge_fit(config.ridge, config.noise_sd, config.delta1)?;
    let scores: Vec<f64> = candidates
        .iter()
        .map(|x| fit.predict(x) + fit.confidence_bound(x))
        .collect();
    Ok(Decision::arm(argmax(&scores)))
}

/// One LinUCB model per user, never reset.
#[derive(Debug, Clone)]
pub struct LinUcb {
    config: LinUcbConfig,
    users: HashMap<UserId, SuffStats>,
}

impl LinUcb {
    pub fn new(config: LinUcbConfig) -> Result<Self> {
        config.validate()?;
        Ok(LinUcb {
            config,
            users: HashMap::new(),
        })
    }

    pub fn stats(&self, user: UserId) -> Option<&SuffStats> {
        self.users.get(&user)
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &str {
        "linucb"
    }

    fn choose(
        &mut self,
        user: UserId,
        candidates: &[Context],
        _rng: &mut SimRng,
    ) -> Result<Decision> {
        let dim = self.config.dim;
        let stats = self
            .users
            .entry(user)
            .or_insert_with(|| SuffStats::new(dim));
        ucb_choose(stats, &self.config, candidates)
    }

    fn feedback(
        &mut self,
        user: UserId,
        context: &Context,
        reward: f64,
        _rng: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        let dim = self.config.dim;
        self.users
            .entry(user)
            .or_insert_with(|| SuffStats::new(dim))
            .push(&Observation::new(context.clone(), reward)?)?;
        Ok(FeedbackOutcome::default())
    }
}

/// LinUCB with one instance per ground-truth model id.
///
/// The simulator reveals each user's true model id before every round; all
/// users governed by the same model share one instance.
#[derive(Debug, Clone)]
pub struct OracleLinUcb {
    config: LinUcbConfig,
    instances: HashMap<u64, SuffStats>,
    truth: HashMap<UserId, u64>,
}

impl OracleLinUcb {
    pub fn new(config: LinUcbConfig) -> Result<Self> {
        config.validate()?;
        Ok(OracleLinUcb {
            config,
            instances: HashMap::new(),
            truth: HashMap::new(),
        })
    }

    pub fn instance(&self, model_id: u64) -> Option<&SuffStats> {
        self.instances.get(&model_id)
    }

    fn route(&self, user: UserId) -> Result<u64> {
        self.truth.get(&user).copied().ok_or_else(|| {
            Error::Unsupported(format!(
                "oracle-linucb needs the ground-truth model of user {user}"
            ))
        })
    }
}

impl Policy for OracleLinUcb {
    fn name(&self) -> &str {
        "oracle-linucb"
    }

    fn reveal_truth(&mut self, user: UserId, model_id: u64) {
        self.truth.insert(user, model_id);
    }

    fn choose(
        &mut self,
        user: UserId,
        candidates: &[Context],
        _rng: &mut SimRng,
    ) -> Result<Decision> {
        let id = self.route(user)?;
        let dim = self.config.dim;
        let stats = self
            .instances
            .entry(id)
            .or_insert_with(|| SuffStats::new(dim));
        ucb_choose(stats, &self.config, candidates)
    }

    fn feedback(
        &mut self,
        user: UserId,
        context: &Context,
        reward: f64,
        _rng: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        let id = self.route(user)?;
        let dim = self.config.dim;
        self.instances
            .entry(id)
            .or_insert_with(|| SuffStats::new(dim))
            .push(&Observation::new(context.clone(), reward)?)?;
        Ok(FeedbackOutcome::default())
    }
}
