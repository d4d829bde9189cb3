use rand::Rng;

use crate::bayes_linear::{Context, Vector};
use crate::environment::UserId;
use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::{argmax, Decision, FeedbackOutcome, Policy};

/// Uniformly random arm, ignores feedback.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl RandomPolicy {
    pub fn new() -> Self {
        RandomPolicy
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(
        &mut self,
        _user: UserId,
        candidates: &[Context],
        rng: &mut SimRng,
    ) -> Result<Decision> {
        if candidates.is_empty() {
            return Err(Error::param("candidates", "empty candidate list"));
        }
        Ok(Decision::arm(rng.random_range(0..candidates.len())))
    }

    fn feedback(
        &mut self,
        _: UserId,
        _: &Context,
        _: f64,
        _: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        Ok(FeedbackOutcome::default())
    }
}

/// Greedy scorer with a frozen parameter; a non-learning reference policy.
#[derive(Debug, Clone)]
pub struct FixedLinear {
    theta: Vector,
}

impl FixedLinear {
    pub fn new(theta: Vector) -> Self {
        FixedLinear { theta }
    }
}

impl Policy for FixedLinear {
    fn name(&self) -> &str {
        "fixed-linear"
    }

    fn choose(
        &mut self,
        _user: UserId,
        candidates: &[Context],
        _rng: &mut SimRng,
    ) -> Result<Decision> {
        super::check_candidates(candidates, self.theta.len())?;
        let scores: Vec<f64> = candidates.iter().map(|x| x.dot(&self.theta)).collect();
        Ok(Decision::arm(argmax(&scores)))
    }

    fn feedback(
        &mut self,
        _: UserId,
        _: &Context,
        _: f64,
        _: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        Ok(FeedbackOutcome::default())
    }
}
