//! Per-user change detection.
//!
//! Each round produces a badness bit: `1` when the observed reward leaves the
//! ridge prediction by more than the confidence width plus a Gaussian noise
//! quantile. A change is declared once the mean of the last `τ` bits exceeds
//! the Hoeffding threshold `δ₁ + √(ln(1/δ₂) / 2τ)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::bayes_linear::{Context, SuffStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub window: usize,
    pub ridge: f64,
    pub noise_sd: f64,
}

impl DetectorConfig {
    pub fn new(delta1: f64, delta2: f64, window: usize, ridge: f64, noise_sd: f64) -> Result<Self> {
        let config = DetectorConfig {
            delta1,
            delta2,
            window,
            ridge,
            noise_sd,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            return Err(Error::param(
                "delta1",
                format!("must lie in (0,1), got {}", self.delta1),
            ));
        }
        if !(self.delta2 > 0.0 && self.delta2 < 1.0) {
            return Err(Error::param(
                "delta2",
                format!("must lie in (0,1), got {}", self.delta2),
            ));
        }
        if self.window == 0 {
            return Err(Error::param("window", "must be at least 1"));
        }
        if self.ridge.is_nan() || self.ridge <= 0.0 {
            return Err(Error::param("ridge", "must be positive"));
        }
        if self.noise_sd.is_nan() || self.noise_sd < 0.0 {
            return Err(Error::param("noise_sd", "must be non-negative"));
        }
        let threshold = self.threshold();
        if threshold >= 1.0 {
            return Err(Error::param(
                "window",
                format!("detection threshold {threshold:.4} ≥ 1, detection impossible"),
            ));
        }
        Ok(())
    }

    /// Hoeffding threshold on the windowed bit mean.
    pub fn threshold(&self) -> f64 {
        self.delta1 + ((1.0 / self.delta2).ln() / (2.0 * self.window as f64)).sqrt()
    }

    /// Two-sided `(1 − δ₁)` Gaussian half-width `√2 σ erf⁻¹(1 − δ₁)`.
    pub fn epsilon(&self) -> f64 {
        epsilon(self.noise_sd, self.delta1)
    }

    /// Badness bit of a new observation against the window's ridge fit.
    ///
    /// `stats` must hold the window *before* the observation is appended.
    pub fn badness_bit(&self, stats: &SuffStats, x: &Context, reward: f64) -> Result<bool> {
        let fit = stats.ridge_fit(self.ridge, self.noise_sd, self.delta1)?;
        Ok(test_bit(
            fit.predict(x),
            reward,
            fit.confidence_bound(x),
            self.epsilon(),
        ))
    }
}

pub fn epsilon(noise_sd: f64, delta1: f64) -> f64 {
    if noise_sd == 0.0 {
        return 0.0;
    }
    std::f64::consts::SQRT_2 * noise_sd * erf_inv(1.0 - delta1)
}

/// `|r̂ − r| > cb + ε`, strictly.
pub fn test_bit(predicted: f64, observed: f64, cb: f64, epsilon: f64) -> bool {
    (predicted - observed).abs() > cb + epsilon
}

/// Smallest window `τ ≥ 2 ln(2/δ₂) / (ρ(1−δ₁) − δ₁)²`.
pub fn recommended_tau(rho: f64, delta1: f64, delta2: f64) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param("rho", format!("must lie in (0,1], got {rho}")));
    }
    if !(delta1 > 0.0 && delta1 < 1.0) || !(delta2 > 0.0 && delta2 < 1.0) {
        return Err(Error::param("delta", "δ₁ and δ₂ must lie in (0,1)"));
    }
    let gap = rho * (1.0 - delta1) - delta1;
    if gap <= 0.0 {
        return Err(Error::param(
            "rho",
            format!("ρ(1−δ₁) must exceed δ₁ (ρ={rho}, δ₁={delta1})"),
        ));
    }
    let bound = 2.0 * (2.0 / delta2).ln() / (gap * gap);
    if !bound.is_finite() || bound > usize::MAX as f64 {
        return Err(Error::param("rho", "window bound is not finite"));
    }
    Ok(bound.ceil() as usize)
}

/// FIFO of the most recent badness bits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct DetectorState {
    bits: VecDeque<bool>,
    ones: usize,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// `ê`: mean of the retained bits, zero when none are retained.
    pub fn window_mean(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.ones as f64 / self.bits.len() as f64
        }
    }

    /// Append a bit and report whether `ê` crosses the threshold.
    ///
    /// The caller resets the state (and its observation window) on `true`.
    pub fn push_and_check(&mut self, bit: bool, config: &DetectorConfig) -> bool {
        self.bits.push_back(bit);
        self.ones += bit as usize;
        while self.bits.len() > config.window {
            if self.bits.pop_front() == Some(true) {
                self.ones -= 1;
            }
        }
        self.window_mean() > config.threshold()
    }

    pub fn reset(&mut self) {
        self.bits.clear();
        self.ones = 0;
    }
}
