//! Synthetic abruptly-changing environments.
//!
//! Every user gets an independent sequence of stationary periods whose
//! lengths are uniform on `[s_min, s_max]`. The parameter of each period is
//! chosen by one of three generators:
//!
//! * `Dirichlet`: a Chinese restaurant process over previously drawn
//!   parameters, with fresh unit-norm Gaussian directions for new tables.
//! * `FixedMixture`: a categorical draw from `k` pre-generated unit vectors.
//! * `Stationary`: one period per user, parameter drawn from `k` unit vectors.

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bayes_linear::{Context, Vector};
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub type UserId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Setting {
    /// CRP-generated parameters, seeded with `initial_k` unit vectors.
    Dirichlet { alpha0: f64, initial_k: usize },
    /// `k` unit vectors drawn by `weights` (uniform when absent).
    FixedMixture {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// A single period per user; the user's parameter is one of `k` vectors.
    Stationary { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_users: usize,
    pub horizon: usize,
    pub dim: usize,
    pub pool_size: usize,
    pub candidates_per_round: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub noise_sd: f64,
    pub setting: Setting,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::param("n_users", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if self.candidates_per_round == 0 || self.candidates_per_round > self.pool_size {
            return Err(Error::param(
                "candidates_per_round",
                format!(
                    "must lie in [1, pool_size={}], got {}",
                    self.pool_size, self.candidates_per_round
                ),
            ));
        }
        if self.s_min == 0 || self.s_min > self.s_max {
            return Err(Error::param("s_min", "need 1 ≤ s_min ≤ s_max"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::param("noise_sd", "must be finite and non-negative"));
        }
        match &self.setting {
            Setting::Dirichlet { alpha0, .. } => {
                if alpha0.is_nan() || *alpha0 <= 0.0 {
                    return Err(Error::param("alpha0", "must be positive"));
                }
            }
            Setting::FixedMixture { k, weights } => {
                if *k == 0 {
                    return Err(Error::param("k", "must be at least 1"));
                }
                if let Some(w) = weights {
                    if w.len() != *k {
                        return Err(Error::param("weights", format!("expected {k} weights")));
                    }
                    if w.iter().any(|x| x.is_nan() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                        return Err(Error::param(
                            "weights",
                            "must be non-negative with positive sum",
                        ));
                    }
                }
            }
            Setting::Stationary { k } => {
                if *k == 0 {
                    return Err(Error::param("k", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

/// One stationary period of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub start: usize,
    pub theta: Vector,
    pub model_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentTrace {
    config: EnvConfig,
    arms: Vec<Context>,
    periods: Vec<Vec<Period>>,
}

/// Candidates disclosed in one round plus the ground truth needed for regret.
#[derive(Debug, Clone)]
pub struct Round {
    pub arm_ids: Vec<usize>,
    pub candidates: Vec<Context>,
    pub expected: Vec<f64>,
    pub best_expected: f64,
    pub model_id: u64,
    pub noise: f64,
}

impl Round {
    /// Noisy reward of candidate `arm`.
    pub fn reward(&self, arm: usize) -> f64 {
        self.expected[arm] + self.noise
    }

    pub fn regret(&self, arm: usize) -> f64 {
        self.best_expected - self.expected[arm]
    }

    pub fn best_arm(&self) -> usize {
        crate::policies::argmax(&self.expected)
    }
}

/// Fraction of pool arms whose expected reward jumps by more than `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeAudit {
    pub user: UserId,
    pub change_index: usize,
    pub start: usize,
    pub rho: f64,
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn draw_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn generate_trace(config: &EnvConfig, rng: &mut SimRng) -> Result<EnvironmentTrace> {
    config.validate()?;
    let d = config.dim;

    let arms = (0..config.pool_size)
        .map(|_| {
            let radius: f64 = rng.random();
            let v = random_unit(d, rng) * radius;
            Context::from_vector(v)
        })
        .collect::<Result<Vec<_>>>()?;

    // Change points per user.
    let mut starts: Vec<Vec<usize>> = Vec::with_capacity(config.n_users);
    for _ in 0..config.n_users {
        let mut s = vec![0];
        if !matches!(config.setting, Setting::Stationary { .. }) {
            let mut c = 0;
            loop {
                c += rng.random_range(config.s_min..=config.s_max);
                if c >= config.horizon {
                    break;
                }
                s.push(c);
            }
        }
        starts.push(s);
    }

    let periods = match &config.setting {
        Setting::FixedMixture { k, weights } => {
            let atoms: Vec<Vector> = (0..*k).map(|_| random_unit(d, rng)).collect();
            let w = weights.clone().unwrap_or_else(|| vec![1.0; *k]);
            starts
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|&start| {
                            let id = draw_categorical(&w, rng);
                            Period {
                                start,
                                theta: atoms[id].clone(),
                                model_id: id as u64,
                            }
                        })
                        .collect()
                })
                .collect()
        }
        Setting::Stationary { k } => {
            let atoms: Vec<Vector> = (0..*k).map(|_| random_unit(d, rng)).collect();
            starts
                .iter()
                .map(|_| {
                    let id = rng.random_range(0..*k);
                    vec![Period {
                        start: 0,
                        theta: atoms[id].clone(),
                        model_id: id as u64,
                    }]
                })
                .collect()
        }
        Setting::Dirichlet { alpha0, initial_k } => {
            let mut atoms: Vec<Vector> = (0..*initial_k).map(|_| random_unit(d, rng)).collect();
            let mut counts: Vec<f64> = vec![1.0; *initial_k];
            // Periods are drawn in chronological order across users.
            let mut order: Vec<(usize, UserId, usize)> = starts
                .iter()
                .enumerate()
                .flat_map(|(u, s)| s.iter().enumerate().map(move |(i, &st)| (st, u, i)))
                .collect();
            order.sort_unstable();
            let mut out: Vec<Vec<Option<Period>>> =
                starts.iter().map(|s| vec![None; s.len()]).collect();
            for (start, user, idx) in order {
                let mut w = counts.clone();
                w.push(*alpha0);
                let pick = draw_categorical(&w, rng);
                if pick == atoms.len() {
                    atoms.push(random_unit(d, rng));
                    counts.push(0.0);
                }
                counts[pick] += 1.0;
                out[user][idx] = Some(Period {
                    start,
                    theta: atoms[pick].clone(),
                    model_id: pick as u64,
                });
            }
            out.into_iter()
                .map(|v| {
                    v.into_iter()
                        .map(|p| p.expect("every period drawn"))
                        .collect()
                })
                .collect()
        }
    };

    Ok(EnvironmentTrace {
        config: config.clone(),
        arms,
        periods,
    })
}

impl EnvironmentTrace {
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn arms(&self) -> &[Context] {
        &self.arms
    }

    pub fn periods(&self, user: UserId) -> &[Period] {
        &self.periods[user]
    }

    pub fn n_users(&self) -> usize {
        self.periods.len()
    }

    pub fn period_index(&self, user: UserId, t: usize) -> usize {
        let p = &self.periods[user];
        p.partition_point(|x| x.start <= t) - 1
    }

    pub fn period_at(&self, user: UserId, t: usize) -> &Period {
        &self.periods[user][self.period_index(user, t)]
    }

    /// Disclose a uniformly sampled candidate set for `(t, user)`.
    ///
    /// One noise draw is made per round whatever arm is later chosen, so
    /// policies served from identically seeded streams see identical rounds.
    pub fn serve_round(&self, t: usize, user: UserId, rng: &mut SimRng) -> Result<Round> {
        if t >= self.config.horizon {
            return Err(Error::param("t", format!("round {t} beyond horizon")));
        }
        if user >= self.periods.len() {
            return Err(Error::param("user", format!("unknown user {user}")));
        }
        let period = self.period_at(user, t);
        let k = self.config.candidates_per_round;
        let arm_ids: Vec<usize> = if k == self.arms.len() {
            (0..k).collect()
        } else {
            sample_indices(rng, self.arms.len(), k).into_vec()
        };
        let candidates: Vec<Context> = arm_ids.iter().map(|&i| self.arms[i].clone()).collect();
        let expected: Vec<f64> = candidates.iter().map(|x| x.dot(&period.theta)).collect();
        let best_expected = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let noise = if self.config.noise_sd > 0.0 {
            Normal::new(0.0, self.config.noise_sd)
                .expect("validated noise sd")
                .sample(rng)
        } else {
            0.0
        };
        Ok(Round {
            arm_ids,
            candidates,
            expected,
            best_expected,
            model_id: period.model_id,
            noise,
        })
    }

    /// Per-change fraction of pool arms with `|xᵀθ_new − xᵀθ_old| > Δ`.
    pub fn audit_assumption1(&self, delta: f64) -> Vec<ChangeAudit> {
        let mut out = Vec::new();
        for (user, periods) in self.periods.iter().enumerate() {
            for (i, pair) in periods.windows(2).enumerate() {
                let diff = &pair[1].theta - &pair[0].theta;
                let hits = self
                    .arms
                    .iter()
                    .filter(|x| x.dot(&diff).abs() > delta)
                    .count();
                out.push(ChangeAudit {
                    user,
                    change_index: i + 1,
                    start: pair[1].start,
                    rho: hits as f64 / self.arms.len() as f64,
                });
            }
        }
        out
    }

    /// One line per (user, period): `user start model_id θ₁ … θ_d`.
    pub fn write_records<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# user start model_id theta...")?;
        for (user, periods) in self.periods.iter().enumerate() {
            for p in periods {
                write!(w, "{user} {} {}", p.start, p.model_id)?;
                for v in p.theta.iter() {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Trace with hand-built arms and periods, for tests and audits.
    pub fn from_parts(
        config: EnvConfig,
        arms: Vec<Context>,
        periods: Vec<Vec<Period>>,
    ) -> Result<Self> {
        if periods.len() != config.n_users {
            return Err(Error::param("periods", "one period list per user required"));
        }
        for p in &periods {
            if p.first().map(|x| x.start) != Some(0) {
                return Err(Error::param("periods", "first period must start at 0"));
            }
        }
        Ok(EnvironmentTrace {
            config,
            arms,
            periods,
        })
    }
}
