//! Exact-match replay of uniformly logged feedback.
//!
//! For each record the policy chooses among the logged candidates. Only
//! when its choice equals the logged arm is the reward revealed and counted;
//! other records are discarded without feedback. On logs collected by a
//! uniform-random logger this gives an unbiased estimate of the policy's
//! per-round reward.

use crate::error::{Error, Result};
use crate::policies::Policy;
use crate::rng::SimRng;

use super::event_log::EventLogRecord;
use super::regret::normalized_reward;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub policy: String,
    pub total_events: usize,
    pub matched: usize,
    pub total_reward: f64,
    /// Mean reward over matched events.
    pub reward_rate: f64,
    /// Mean reward of the logging policy over all events.
    pub logged_reward_rate: f64,
    /// Standard error of `reward_rate`; infinite below two matches.
    pub standard_error: f64,
    /// `reward_rate / logged_reward_rate` when the baseline is positive.
    pub normalized: Option<f64>,
    /// Normalized reward after each record, `None` until defined.
    pub normalized_series: Vec<Option<f64>>,
}

pub fn replay(
    policy: &mut dyn Policy,
    records: &[EventLogRecord],
    rng: &mut SimRng,
) -> Result<ReplayResult> {
    if let Some(first) = records.first() {
        let k = first.candidates.len();
        if let Some(bad) = records.iter().position(|r| r.candidates.len() != k) {
            return Err(Error::Config(format!(
                "record {bad} has {} candidates, expected {k}",
                records[bad].candidates.len()
            )));
        }
    }

    let mut matched = 0usize;
    let mut total_reward = 0.0;
    let mut total_sq = 0.0;
    let mut logged_total = 0.0;
    let mut policy_curve = Vec::with_capacity(records.len());
    let mut logged_curve = Vec::with_capacity(records.len());

    for (i, record) in records.iter().enumerate() {
        if record.logged_arm >= record.candidates.len() {
            return Err(Error::param(
                "logged_arm",
                format!("record {i} out of range"),
            ));
        }
        let decision = policy.choose(record.user, &record.candidates, rng)?;
        if decision.arm_index == record.logged_arm {
            policy.feedback(
                record.user,
                &record.candidates[record.logged_arm],
                record.reward,
                rng,
            )?;
            matched += 1;
            total_reward += record.reward;
            total_sq += record.reward * record.reward;
        }
        logged_total += record.reward;
        let seen = (i + 1) as f64;
        // Policy reward extrapolated to every event seen so far.
        let estimate = if matched > 0 {
            total_reward / matched as f64 * seen
        } else {
            0.0
        };
        policy_curve.push(estimate);
        logged_curve.push(logged_total);
    }

    let normalized_series = normalized_reward(&policy_curve, &logged_curve);
    let reward_rate = if matched > 0 {
        total_reward / matched as f64
    } else {
        0.0
    };
    let standard_error = if matched >= 2 {
        let n = matched as f64;
        let var = (total_sq / n - reward_rate * reward_rate) * n / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    } else {
        f64::INFINITY
    };
    let logged_reward_rate = if records.is_empty() {
        0.0
    } else {
        logged_total / records.len() as f64
    };
    let normalized = if logged_reward_rate > 0.0 && matched > 0 {
        Some(reward_rate / logged_reward_rate)
    } else {
        None
    };
    Ok(ReplayResult {
        policy: policy.name().to_string(),
        total_events: records.len(),
        matched,
        total_reward,
        reward_rate,
        standard_error,
        logged_reward_rate,
        normalized,
        normalized_series,
    })
}
