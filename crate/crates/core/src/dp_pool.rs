//! Dirichlet-process pool of shared linear bandit models.
//!
//! Each [`GlobalModel`] carries a conjugate posterior and the number of
//! (user, stationary period) assignments pointing at it. New assignments
//! follow the Chinese restaurant process; a user's current observation window
//! is reassigned by one collapsed Gibbs step using the fixed-posterior
//! predictive of every model. The concentration `α₀` has a `Gamma(a, b)`
//! prior (rate `b`) and is refreshed with the auxiliary-variable step of
//! Escobar and West.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::bayes_linear::{
    prior_log_predictive, stack_observations, LinearPosterior, Observation, ObservationSet,
};
use crate::error::{Error, Result};

pub type ModelKey = u64;

#[derive(Debug, Clone)]
pub struct GlobalModel {
    pub posterior: LinearPosterior,
    pub assign_count: usize,
}

/// Categorical weights over existing models plus the fresh-model branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub keys: Vec<ModelKey>,
    pub existing: Vec<f64>,
    pub fresh: f64,
}

impl ModelWeights {
    /// Weights as one vector, fresh branch last.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.existing.clone();
        v.push(self.fresh);
        v
    }

    /// `None` selects the fresh-model branch.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<ModelKey> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (key, w) in self.keys.iter().zip(&self.existing) {
            acc += w;
            if u < acc {
                return Some(*key);
            }
        }
        // Residual mass (including rounding) goes to the fresh branch, unless
        // the fresh branch has no mass at all.
        if self.fresh > 0.0 || self.keys.is_empty() {
            None
        } else {
            self.existing
                .iter()
                .rposition(|w| *w > 0.0)
                .map(|i| self.keys[i])
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelPool {
    models: BTreeMap<ModelKey, GlobalModel>,
    next_key: ModelKey,
    alpha0: f64,
    gamma_a: f64,
    gamma_b: f64,
    dim: usize,
    ridge: f64,
    noise_sd: f64,
}

impl ModelPool {
    pub fn new(
        dim: usize,
        ridge: f64,
        noise_sd: f64,
        alpha0: f64,
        gamma_a: f64,
        gamma_b: f64,
    ) -> Result<Self> {
        // Validates dim, ridge, noise_sd.
        LinearPosterior::new(dim, ridge, noise_sd)?;
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::param(
                "alpha0",
                format!("must be positive, got {alpha0}"),
            ));
        }
        if gamma_a.is_nan() || gamma_a <= 0.0 || gamma_b.is_nan() || gamma_b <= 0.0 {
            return Err(Error::param("gamma", "shape a and rate b must be positive"));
        }
        Ok(ModelPool {
            models: BTreeMap::new(),
            next_key: 1,
            alpha0,
            gamma_a,
            gamma_b,
            dim,
            ridge,
            noise_sd,
        })
    }

    /// Pool with `α₀ ~ Gamma(a, b)`.
    pub fn with_sampled_alpha<R: Rng + ?Sized>(
        dim: usize,
        ridge: f64,
        noise_sd: f64,
        gamma_a: f64,
        gamma_b: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut pool = ModelPool::new(dim, ridge, noise_sd, 1.0, gamma_a, gamma_b)?;
        pool.alpha0 = draw_gamma(gamma_a, gamma_b, rng)?;
        Ok(pool)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn set_alpha0(&mut self, alpha0: f64) -> Result<()> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::param(
                "alpha0",
                format!("must be positive, got {alpha0}"),
            ));
        }
        self.alpha0 = alpha0;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, key: ModelKey) -> Option<&GlobalModel> {
        self.models.get(&key)
    }

    pub fn models(&self) -> impl Iterator<Item = (ModelKey, &GlobalModel)> {
        self.models.iter().map(|(k, m)| (*k, m))
    }

    pub fn total_assignments(&self) -> usize {
        self.models.values().map(|m| m.assign_count).sum()
    }

    pub fn total_observations(&self) -> usize {
        self.models.values().map(|m| m.posterior.n_obs()).sum()
    }

    /// Insert a model at the prior with zero assignments and return its key.
    pub fn create_model(&mut self) -> ModelKey {
        let key = self.next_key;
        self.next_key += 1;
        let posterior = LinearPosterior::new(self.dim, self.ridge, self.noise_sd)
            .expect("pool parameters validated at construction");
        self.models.insert(
            key,
            GlobalModel {
                posterior,
                assign_count: 0,
            },
        );
        key
    }

    /// Commit one more user to an existing model.
    pub fn assign(&mut self, key: ModelKey) -> Result<()> {
        self.model_mut(key)?.assign_count += 1;
        Ok(())
    }

    /// A posterior at the pool's prior.
    pub fn prior(&self) -> LinearPosterior {
        LinearPosterior::new(self.dim, self.ridge, self.noise_sd)
            .expect("pool parameters validated at construction")
    }

    fn model_mut(&mut self, key: ModelKey) -> Result<&mut GlobalModel> {
        self.models
            .get_mut(&key)
            .ok_or_else(|| Error::StateCorruption(format!("unknown model key {key}")))
    }

    /// CRP weights: existing model `k` ∝ `n_k`, fresh model ∝ `α₀`.
    pub fn crp_prior_weights(&self) -> ModelWeights {
        let total = self.total_assignments() as f64 + self.alpha0;
        ModelWeights {
            keys: self.models.keys().copied().collect(),
            existing: self
                .models
                .values()
                .map(|m| m.assign_count as f64 / total)
                .collect(),
            fresh: self.alpha0 / total,
        }
    }

    /// Draw an assignment from the CRP prior and commit it.
    pub fn sample_prior_model<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ModelKey {
        let key = match self.crp_prior_weights().draw(rng) {
            Some(key) => key,
            None => self.create_model(),
        };
        self.models
            .get_mut(&key)
            .expect("drawn key exists")
            .assign_count += 1;
        key
    }

    /// Log-space collapsed posterior over assignments of `dataset`.
    pub fn posterior_weights(&self, dataset: &[Observation]) -> Result<ModelWeights> {
        let (xs, rewards) = stack_observations(self.dim, dataset)?;
        let mut keys = Vec::with_capacity(self.models.len());
        let mut logw = Vec::with_capacity(self.models.len() + 1);
        for (key, model) in &self.models {
            keys.push(*key);
            if model.assign_count == 0 {
                logw.push(f64::NEG_INFINITY);
                continue;
            }
            let ll = model.posterior.log_predictive_columns(&xs, &rewards);
            logw.push((model.assign_count as f64).ln() + ll);
        }
        let mut fresh = self.alpha0.ln();
        for obs in dataset {
            fresh += prior_log_predictive(obs, self.ridge, self.noise_sd);
        }
        logw.push(fresh);

        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(
                "every assignment weight underflowed".into(),
            ));
        }
        let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        let fresh = w.pop().expect("fresh branch present");
        Ok(ModelWeights {
            keys,
            existing: w,
            fresh,
        })
    }

    /// Absorb one observation into a model.
    pub fn absorb(&mut self, key: ModelKey, obs: &Observation) -> Result<()> {
        self.model_mut(key)?.posterior.absorb(obs)
    }

    /// One collapsed Gibbs step for a user's observation window.
    ///
    /// `data` must currently be absorbed in `current`, which also holds one
    /// assignment for this user. Returns the new key.
    pub fn gibbs_reassign<R: Rng + ?Sized>(
        &mut self,
        current: ModelKey,
        data: &ObservationSet,
        rng: &mut R,
    ) -> Result<ModelKey> {
        let model = self.model_mut(current)?;
        if model.assign_count == 0 {
            return Err(Error::StateCorruption(format!(
                "model {current} has no assignment to release"
            )));
        }
        model.posterior.expel_stats(data.stats())?;
        model.assign_count -= 1;
        if model.assign_count == 0 {
            self.models.remove(&current);
        }

        let weights = self.posterior_weights(data.observations())?;
        let key = match weights.draw(rng) {
            Some(key) => key,
            None => self.create_model(),
        };
        let model = self.model_mut(key)?;
        model.posterior.absorb_stats(data.stats())?;
        model.assign_count += 1;
        Ok(key)
    }

    /// One auxiliary-variable Gibbs update of `α₀` given `n` assignments.
    pub fn resample_alpha0<R: Rng + ?Sized>(
        &mut self,
        n_assignments: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let k = self.models.len();
        if k == 0 || n_assignments == 0 {
            return Err(Error::param(
                "n_assignments",
                "α₀ update needs at least one model and one assignment",
            ));
        }
        self.alpha0 = resample_concentration(
            self.alpha0,
            k,
            n_assignments,
            self.gamma_a,
            self.gamma_b,
            rng,
        )?;
        Ok(self.alpha0)
    }
}

/// Escobar–West update: `η ~ Beta(α+1, n)`, then `α` from the mixture of
/// `Gamma(a+k, b−ln η)` and `Gamma(a+k−1, b−ln η)` with odds
/// `(a+k−1) / (n (b − ln η))`.
pub fn resample_concentration<R: Rng + ?Sized>(
    alpha: f64,
    k: usize,
    n: usize,
    gamma_a: f64,
    gamma_b: f64,
    rng: &mut R,
) -> Result<f64> {
    let eta = Beta::new(alpha + 1.0, n as f64)
        .map_err(|e| Error::Numerical(format!("beta({}, {n}): {e}", alpha + 1.0)))?
        .sample(rng);
    let rate = gamma_b - eta.ln();
    let shape_hi = gamma_a + k as f64;
    let shape_lo = shape_hi - 1.0;
    let odds = shape_lo / (n as f64 * rate);
    let pi = odds / (1.0 + odds);
    let shape = if rng.random::<f64>() < pi {
        shape_hi
    } else {
        shape_lo
    };
    let draw = draw_gamma(shape, rate, rng)?;
    // Gamma draws with small shape can underflow to exactly zero.
    Ok(draw.max(f64::MIN_POSITIVE))
}

fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Numerical(format!("gamma({shape}, rate {rate}): {e}")))?;
    Ok(g.sample(rng).max(f64::MIN_POSITIVE))
}
