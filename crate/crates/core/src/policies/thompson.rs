//! Per-user linear Thompson sampling, optionally restarted on detection.
//!
//! The restart variant runs the same badness-bit detector as CoDBand over the
//! observations since its last reset, and on detection drops the user's
//! posterior back to the prior. It isolates the value of sharing models
//! across users.

use std::collections::HashMap;

use crate::bayes_linear::{Context, LinearPosterior, Observation, ObservationSet};
use crate::change_detect::{DetectorConfig, DetectorState};
use crate::environment::UserId;
use crate::error::{Error, Result};
use crate::rng::SimRng;

use super::{argmax, check_candidates, Decision, FeedbackOutcome, Policy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThompsonConfig {
    pub dim: usize,
    pub ridge: f64,
    pub noise_sd: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: usize,
    pub restart: bool,
}

#[derive(Debug, Clone)]
struct UserState {
    posterior: LinearPosterior,
    window: ObservationSet,
    detector: DetectorState,
}

#[derive(Debug, Clone)]
pub struct ThompsonSampling {
    config: ThompsonConfig,
    detector: Option<DetectorConfig>,
    users: HashMap<UserId, UserState>,
    resets: usize,
}

impl ThompsonSampling {
    pub fn new(config: ThompsonConfig) -> Result<Self> {
        LinearPosterior::new(config.dim, config.ridge, config.noise_sd)?;
        let detector = if config.restart {
            Some(DetectorConfig::new(
                config.delta1,
                config.delta2,
                config.tau,
                config.ridge,
                config.noise_sd,
            )?)
        } else {
            None
        };
        Ok(ThompsonSampling {
            config,
            detector,
            users: HashMap::new(),
            resets: 0,
        })
    }

    pub fn posterior(&self, user: UserId) -> Option<&LinearPosterior> {
        self.users.get(&user).map(|s| &s.posterior)
    }

    /// Number of detector-triggered resets across all users.
    pub fn resets(&self) -> usize {
        self.resets
    }

    fn user_mut(&mut self, user: UserId) -> &mut UserState {
        let c = self.config;
        self.users.entry(user).or_insert_with(|| UserState {
            posterior: LinearPosterior::new(c.dim, c.ridge, c.noise_sd).expect("validated"),
            window: ObservationSet::new(c.dim),
            detector: DetectorState::new(),
        })
    }
}

impl Policy for ThompsonSampling {
    fn name(&self) -> &str {
        if self.config.restart {
            "restart-ts"
        } else {
            "ts"
        }
    }

    fn choose(
        &mut self,
        user: UserId,
        candidates: &[Context],
        rng: &mut SimRng,
    ) -> Result<Decision> {
        check_candidates(candidates, self.config.dim)?;
        let theta = self.user_mut(user).posterior.sample_theta(rng);
        let scores: Vec<f64> = candidates.iter().map(|x| x.dot(&theta)).collect();
        Ok(Decision {
            arm_index: argmax(&scores),
            model_key: None,
            sampled_theta: Some(theta),
        })
    }

    fn feedback(
        &mut self,
        user: UserId,
        context: &Context,
        reward: f64,
        _rng: &mut SimRng,
    ) -> Result<FeedbackOutcome> {
        Error::check_dim(self.config.dim, context.dim())?;
        let obs = Observation::new(context.clone(), reward)?;
        let detector = self.detector;
        let state = self.user_mut(user);
        let mut detected = false;
        if let Some(cfg) = detector {
            let bit = cfg.badness_bit(state.window.stats(), context, reward)?;
            detected = state.detector.push_and_check(bit, &cfg);
            state.window.push(obs.clone())?;
        }
        state.posterior.absorb(&obs)?;
        if detected {
            state.posterior.reset();
            state.window.clear();
            state.detector.reset();
            self.resets += 1;
        }
        Ok(FeedbackOutcome {
            detected,
            model_key: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_linear::Vector;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn config(restart: bool) -> ThompsonConfig {
        ThompsonConfig {
            dim: 3,
            ridge: 1.0,
            noise_sd: 0.1,
            delta1: 0.05,
            delta2: 0.05,
            tau: 30,
            restart,
        }
    }

    fn random_ctx<R: Rng>(rng: &mut R) -> Context {
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        Context::new(v.iter().map(|x| x / n).collect()).unwrap()
    }

    fn run(policy: &mut ThompsonSampling, theta: &Vector, rounds: usize, seed: u64) -> usize {
        let mut env = rng_from_seed(seed);
        let mut rng = rng_from_seed(seed + 1);
        let mut detections = 0;
        for _ in 0..rounds {
            let cands: Vec<Context> = (0..8).map(|_| random_ctx(&mut env)).collect();
            let d = policy.choose(0, &cands, &mut rng).unwrap();
            let x = &cands[d.arm_index];
            let noise = rand_distr::Distribution::sample(
                &rand_distr::Normal::new(0.0, 0.1).unwrap(),
                &mut env,
            );
            let out = policy
                .feedback(0, x, x.dot(theta) + noise, &mut rng)
                .unwrap();
            detections += out.detected as usize;
        }
        detections
    }

    #[test]
    fn plain_ts_never_detects() {
        let mut p = ThompsonSampling::new(config(false)).unwrap();
        let theta = Vector::from_vec(vec![0.5, 0.5, -0.5]);
        assert_eq!(run(&mut p, &theta, 300, 3), 0);
        assert_eq!(p.posterior(0).unwrap().n_obs(), 300);
        assert_eq!(p.name(), "ts");
    }

    #[test]
    fn restart_resets_to_prior_exactly() {
        let mut p = ThompsonSampling::new(config(true)).unwrap();
        let theta = Vector::from_vec(vec![0.5, 0.5, -0.5]);
        run(&mut p, &theta, 200, 5);
        let flipped = -theta;
        let mut env = rng_from_seed(8);
        let mut rng = rng_from_seed(9);
        let prior = LinearPosterior::new(3, 1.0, 0.1).unwrap();
        let mut seen = false;
        for _ in 0..300 {
            let cands: Vec<Context> = (0..8).map(|_| random_ctx(&mut env)).collect();
            let d = p.choose(0, &cands, &mut rng).unwrap();
            let x = &cands[d.arm_index];
            let out = p.feedback(0, x, x.dot(&flipped), &mut rng).unwrap();
            if out.detected {
                let post = p.posterior(0).unwrap();
                assert_eq!(post.precision(), prior.precision());
                assert_eq!(post.mean(), prior.mean());
                assert_eq!(post.n_obs(), 0);
                seen = true;
                break;
            }
        }
        assert!(seen);
    }
}
