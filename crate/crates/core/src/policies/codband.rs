//! Collaborative dynamic bandit.
//!
//! Per round for user `u`:
//!
//! 1. If `u` has no model for its current window, draw one from the CRP
//!    prior over the shared pool (possibly creating a model).
//! 2. Sample `θ̃` from that model's posterior and play `argmax xᵀθ̃`.
//! 3. On feedback: compute the badness bit against the ridge fit of the
//!    window *before* the new observation, append the observation, absorb it
//!    into the model, run one collapsed Gibbs reassignment of the whole
//!    window, refresh `α₀`, and on detection empty the window.

use std::collections::HashMap;

use crate::bayes_linear::{Context, Observation, ObservationSet};
use crate::change_detect::{DetectorConfig, DetectorState};
use crate::dp_pool::{ModelKey, ModelPool};
use crate::environment::UserId;
use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::{argmax, check_candidates, Decision, FeedbackOutcome, Policy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodbandConfig {
    pub dim: usize,
    pub ridge: f64,
    pub noise_sd: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: usize,
    pub gamma_a: f64,
    pub gamma_b: f64,
    /// Run the Gibbs reassignment every this many feedbacks of a user.
    pub gibbs_every: usize,
}

#[derive(Debug, Clone)]
struct UserState {
    window: ObservationSet,
    detector: DetectorState,
    model: Option<ModelKey>,
    feedbacks: usize,
}

#[derive(Debug, Clone)]
pub struct Codband {
    config: CodbandConfig,
    detector: DetectorConfig,
    pool: ModelPool,
    users: HashMap<UserId, UserState>,
}

impl Codband {
    /// Builds the policy and draws the initial `α₀ ~ Gamma(a, b)`.
    pub fn new(config: CodbandConfig, rng: &mut SimRng) -> Result<Self> {
        if config.gibbs_every == 0 {
            return Err(Error::param("gibbs_every", "must be at least 1"));
        }
        let detector = DetectorConfig::new(
            config.delta1,
            config.delta2,
            config.tau,
            config.ridge,
            config.noise_sd,
        )?;
        let pool = ModelPool::with_sampled_alpha(
            config.dim,
            config.ridge,
            config.noise_sd,
            config.gamma_a,
            config.gamma_b,
            rng,
        )?;
        Ok(Codband {
            config,
            detector,
            pool,
            users: HashMap::new(),
        })
    }

    pub fn pool(&self) -> &ModelPool {
        &self.pool
    }

    pub fn config(&self) -> &CodbandConfig {
        &self.config
    }

    /// Current observation window of `user`.
    pub fn window(&self, user: UserId) -> Option<&[Observation]> {
        self.users.get(&user).map(|s| s.window.observations())
    }

    pub fn model_of(&self, user: UserId) -> Option<ModelKey> {
        self.users.get(&user).and_then(|s| s.model)
    }

    pub fn detector_state(&self, user: UserId) -> Option<&DetectorState> {
        self.users.get(&user).map(|s| &s.detector)
    }

    fn user_mut(&mut self, user: UserId) -> &mut UserState {
        let dim = self.config.dim;
        self.users.entry(user).or_insert_with(|| UserState {
            window: ObservationSet::new(dim),
            detector: DetectorState::new(),
            model: None,
            feedbacks: 0,
        })
    }
}

impl Policy for Codband {
    fn name(&self) -> &str {
        "codband"
    }

    fn choose(
        &mut self,
        user: UserId,
        candidates: &[Context],
        rng: &mut SimRng,
    ) -> Result<Decision> {
        check_candidates(candidates, self.config.dim)?;
        // An empty window without a model means a new user or a fresh
        // detection; the assignment is committed once per window.
        let needs_model = {
            let state = self.user_mut(user);
            state.window.is_empty() && state.model.is_none()
        };
        let key = if needs_model {
            let key = self.pool.sample_prior_model(rng);
            self.user_mut(user).model = Some(key);
            key
        } else {
            self.users[&user].model.ok_or_else(|| {
                Error::StateCorruption(format!("user {user} holds data but no model"))
            })?
        };
        let model = self
            .pool
            .model(key)
            .ok_or_else(|| Error::StateCorruption(format!("model {key} missing from pool")))?;
        let theta = model.posterior.sample_theta(rng);
        let scores: Vec<f64> = candidates.iter().map(|x| x.dot(&theta)).collect();
        Ok(Decision {
            arm_index: argmax(&scores),
            model_key: Some(key),
            sampled_theta: Some(theta),
        })
    }

    fn feedback(
        &mut self,
        user: UserId,
        context: &Context,
        reward: f64,
        rng: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        Error::check_dim(self.config.dim, context.dim())?;
        let obs = Observation::new(context.clone(), reward)?;
        let detector = self.detector;
        let gibbs_every = self.config.gibbs_every;

        let state = self
            .users
            .get_mut(&user)
            .ok_or_else(|| Error::StateCorruption(format!("feedback for unseen user {user}")))?;
        let key = state.model.ok_or_else(|| {
            Error::StateCorruption(format!("feedback before choose for user {user}"))
        })?;

        let bit = detector.badness_bit(state.window.stats(), context, reward)?;
        let detected = state.detector.push_and_check(bit, &detector);
        state.window.push(obs.clone())?;
        state.feedbacks += 1;
        let run_gibbs = state.feedbacks % gibbs_every == 0;

        self.pool.absorb(key, &obs)?;
        let state = self.users.get_mut(&user).expect("user present");
        let key = if run_gibbs {
            self.pool.gibbs_reassign(key, &state.window, rng)?
        } else {
            key
        };
        state.model = Some(key);
        let n = self.pool.total_assignments();
        self.pool.resample_alpha0(n, rng)?;

        if detected {
            state.window.clear();
            state.detector.reset();
            state.model = None;
        }
        Ok(FeedbackOutcome {
            detected,
            model_key: Some(key),
        })
    }
}
