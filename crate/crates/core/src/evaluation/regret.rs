use std::io::Write;

use crate::environment::Round;
use crate::error::Result;

/// Pseudo-regret trajectory of one policy in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub policy: String,
    pub replication: usize,
    pub seed: u64,
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn new(policy: impl Into<String>, replication: usize, seed: u64) -> Self {
        RegretCurve {
            policy: policy.into(),
            replication,
            seed,
            instantaneous: Vec::new(),
            cumulative: Vec::new(),
        }
    }

    /// Append `best expected − chosen expected` for `arm` in `round`.
    pub fn record(&mut self, round: &Round, arm: usize) -> f64 {
        let r = round.regret(arm);
        self.push(r);
        r
    }

    /// Append one step of instantaneous regret.
    pub fn push(&mut self, regret: f64) {
        // Clamp rounding noise; a chosen arm can never beat the best one.
        let regret = regret.max(0.0);
        let total = self.final_regret() + regret;
        self.instantaneous.push(regret);
        self.cumulative.push(total);
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Concatenate another curve after this one.
    pub fn extend(&mut self, other: &RegretCurve) {
        for &r in &other.instantaneous {
            self.push(r);
        }
    }
}

/// Rows `policy,seed,round,instantaneous_regret,cumulative_regret`.
pub fn write_regret_csv<W: Write>(mut w: W, curves: &[RegretCurve]) -> Result<()> {
    writeln!(
        w,
        "policy,seed,round,instantaneous_regret,cumulative_regret"
    )?;
    for c in curves {
        for (t, (inst, cum)) in c.instantaneous.iter().zip(&c.cumulative).enumerate() {
            writeln!(w, "{},{},{},{},{}", c.policy, c.seed, t, inst, cum)?;
        }
    }
    Ok(())
}

/// Elementwise ratio of cumulative rewards; `None` while the baseline
/// has not accumulated positive reward.
pub fn normalized_reward(policy_cumulative: &[f64], random_cumulative: &[f64]) -> Vec<Option<f64>> {
    policy_cumulative
        .iter()
        .zip(random_cumulative)
        .map(|(p, r)| if *r > 0.0 { Some(p / r) } else { None })
        .collect()
}
