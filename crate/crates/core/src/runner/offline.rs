//! Uniform-random logging and replay of the resulting logs.
//!
//! Logged rewards are clicks: Bernoulli with probability `(1 + xᵀθ)/2`,
//! which stays in [0, 1] because both vectors lie in the unit ball. Click
//! rates are positive, so rates normalized by the logger's are well defined.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::environment::{generate_trace, EnvConfig, EnvironmentTrace};
use crate::error::{Error, Result};
use crate::evaluation::{
    read_event_log, replay, write_event_log, EventLog, EventLogRecord, ReplayResult,
};
use crate::policies::build_policy;
use crate::rng::{replication_seed, rng_from_seed, stream_seed, SimRng, Stream};

use super::config::ExperimentConfig;
use super::experiment::{output_dir, prepare_dir};

/// Noise level assumed for click rewards when none is configured: the
/// largest standard deviation of a Bernoulli variable.
pub const CLICK_NOISE_SD: f64 = 0.5;

/// Click probability of expected linear reward `mean`.
pub fn click_probability(mean: f64) -> f64 {
    ((1.0 + mean) / 2.0).clamp(0.0, 1.0)
}

/// Log every (round, user) of a fresh trace with a uniform-random logger.
pub fn generate_event_log(env: &EnvConfig, seed: u64) -> Result<(EventLog, EnvironmentTrace)> {
    let trace = generate_trace(
        env,
        &mut rng_from_seed(stream_seed(seed, Stream::Environment, 0)),
    )?;
    let mut serve = rng_from_seed(stream_seed(seed, Stream::Serving, 0));
    let mut logger = rng_from_seed(stream_seed(seed, Stream::Logger, 0));
    let mut log = EventLog::new(env.dim, env.candidates_per_round);
    for t in 0..env.horizon {
        for user in 0..env.n_users {
            let round = trace.serve_round(t, user, &mut serve)?;
            let arm = logger.random_range(0..round.candidates.len());
            let click = logger.random_bool(click_probability(round.expected[arm]));
            log.push(EventLogRecord {
                round: t as u64,
                user,
                logged_arm: arm,
                reward: if click { 1.0 } else { 0.0 },
                candidates: round.candidates,
            })?;
        }
    }
    Ok((log, trace))
}

/// Write a generated log to `<out>/events.log`.
pub fn run_gen_log(config: &ExperimentConfig) -> Result<PathBuf> {
    config.environment.validate()?;
    let dir = output_dir(config);
    prepare_dir(&dir)?;
    let (log, _) =
        generate_event_log(&config.environment, replication_seed(config.master_seed, 0))?;
    let path = dir.join("events.log");
    let mut w = BufWriter::new(fs::File::create(&path)?);
    write_event_log(&mut w, &log)?;
    w.flush()?;
    Ok(path)
}

/// Replay `log` through every configured policy.
///
/// Policies get the log's dimension; their noise level defaults to
/// [`CLICK_NOISE_SD`]. Oracle policies need ground truth and fail here.
pub fn replay_policies(config: &ExperimentConfig, log: &EventLog) -> Result<Vec<ReplayResult>> {
    if config.policies.is_empty() {
        return Err(Error::Config("policy list is empty".into()));
    }
    let mut env = config.environment.clone();
    env.dim = log.dim;
    env.noise_sd = CLICK_NOISE_SD;
    let seed = replication_seed(config.master_seed, 0);
    config
        .policies
        .par_iter()
        .map(|spec| {
            let hyper = config.resolve(spec, &env)?;
            let mut rng: SimRng = rng_from_seed(stream_seed(seed, Stream::Policy, 0));
            let mut policy = build_policy(&spec.name, &hyper, &mut rng)?;
            replay(policy.as_mut(), &log.records, &mut rng)
        })
        .collect()
}

/// Replay the log at `log_path`, writing `replay.csv` and `replay_series.csv`.
pub fn run_replay(config: &ExperimentConfig, log_path: &Path) -> Result<Vec<ReplayResult>> {
    let file = fs::File::open(log_path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot open {}: {e}", log_path.display()),
        ))
    })?;
    let log = read_event_log(BufReader::new(file))?;
    let results = replay_policies(config, &log)?;

    let dir = output_dir(config);
    prepare_dir(&dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join("replay.csv"))?);
    writeln!(
        w,
        "policy,total_events,matched,reward_rate,stderr,logged_reward_rate,normalized_reward"
    )?;
    for r in &results {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.policy,
            r.total_events,
            r.matched,
            r.reward_rate,
            r.standard_error,
            r.logged_reward_rate,
            r.normalized.map_or(String::new(), |v| v.to_string())
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(fs::File::create(dir.join("replay_series.csv"))?);
    writeln!(w, "policy,event,normalized_reward")?;
    for r in &results {
        for (i, v) in r.normalized_series.iter().enumerate() {
            if let Some(v) = v {
                writeln!(w, "{},{},{v}", r.policy, i + 1)?;
            }
        }
    }
    w.flush()?;
    Ok(results)
}
