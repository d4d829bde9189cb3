//! Seeded simulation of (replication, policy) cells.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{generate_trace, EnvConfig, EnvironmentTrace};
use crate::error::{Error, Result};
use crate::evaluation::{write_regret_csv, RegretCurve};
use crate::policies::{build_policy, Hyper};
use crate::rng::{replication_seed, rng_from_seed, stream_seed, Stream};

use super::config::ExperimentConfig;

/// Result of running one policy through one replication.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub replication: usize,
    pub policy: String,
    /// Regret summed over users at each time step.
    pub curve: RegretCurve,
    /// `per_user[u][t]`: instantaneous regret of user `u` at step `t`.
    pub per_user: Vec<Vec<f64>>,
    pub detections: usize,
    pub wall_secs: f64,
}

impl CellOutcome {
    /// Regret of the first and second half of every stationary segment.
    ///
    /// Segments are clipped to the horizon; segments shorter than two rounds
    /// are skipped.
    pub fn segment_halves(&self, trace: &EnvironmentTrace) -> Vec<(f64, f64)> {
        let horizon = trace.config().horizon;
        let mut out = Vec::new();
        for (u, row) in self.per_user.iter().enumerate() {
            let periods = trace.periods(u);
            for (i, p) in periods.iter().enumerate() {
                let end = periods.get(i + 1).map_or(horizon, |q| q.start).min(horizon);
                if end <= p.start + 1 {
                    continue;
                }
                let mid = p.start + (end - p.start) / 2;
                let first: f64 = row[p.start..mid].iter().sum();
                let second: f64 = row[mid..end].iter().sum();
                out.push((first, second));
            }
        }
        out
    }
}

/// Everything a simulation produced, before anything is written.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub seeds: Vec<u64>,
    pub traces: Vec<EnvironmentTrace>,
    /// Replication-major, policies in config order.
    pub cells: Vec<CellOutcome>,
    pub hypers: Vec<(String, Hyper)>,
}

impl SimulationOutput {
    pub fn curves(&self) -> Vec<RegretCurve> {
        self.cells.iter().map(|c| c.curve.clone()).collect()
    }

    pub fn cells_for<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a CellOutcome> + 'a {
        self.cells.iter().filter(move |c| c.policy == policy)
    }

    /// Mean and standard error of final cumulative regret for `policy`.
    pub fn final_regret_stats(&self, policy: &str) -> (f64, f64) {
        let finals: Vec<f64> = self
            .cells_for(policy)
            .map(|c| c.curve.final_regret())
            .collect();
        mean_stderr(&finals)
    }
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Run one policy over a generated trace.
///
/// The serving stream depends only on the replication seed, so every policy
/// sees the same candidate sets and noise draws.
pub fn run_cell(
    trace: &EnvironmentTrace,
    policy_name: &str,
    hyper: &Hyper,
    rep_seed: u64,
    replication: usize,
) -> Result<CellOutcome> {
    let start = Instant::now();
    let env = trace.config();
    let mut serve_rng = rng_from_seed(stream_seed(rep_seed, Stream::Serving, 0));
    let mut policy_rng = rng_from_seed(stream_seed(rep_seed, Stream::Policy, 0));
    let mut policy = build_policy(policy_name, hyper, &mut policy_rng)?;

    let mut curve = RegretCurve::new(policy_name, replication, rep_seed);
    let mut per_user = vec![Vec::with_capacity(env.horizon); env.n_users];
    let mut detections = 0;
    for t in 0..env.horizon {
        let mut step = 0.0;
        for (user, row) in per_user.iter_mut().enumerate() {
            let round = trace.serve_round(t, user, &mut serve_rng)?;
            policy.reveal_truth(user, round.model_id);
            let decision = policy.choose(user, &round.candidates, &mut policy_rng)?;
            let arm = decision.arm_index;
            let regret = round.regret(arm).max(0.0);
            let outcome = policy.feedback(
                user,
                &round.candidates[arm],
                round.reward(arm),
                &mut policy_rng,
            )?;
            detections += outcome.detected as usize;
            row.push(regret);
            step += regret;
        }
        curve.push(step);
    }
    Ok(CellOutcome {
        replication,
        policy: policy_name.to_string(),
        curve,
        per_user,
        detections,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Simulate every (replication, policy) cell of `config` on environment `env`.
pub fn simulate_env(config: &ExperimentConfig, env: &EnvConfig) -> Result<SimulationOutput> {
    config.validate()?;
    env.validate()?;
    let hypers = config
        .policies
        .iter()
        .map(|spec| Ok((spec.name.clone(), config.resolve(spec, env)?)))
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..config.replications)
        .map(|r| replication_seed(config.master_seed, r))
        .collect();
    let traces = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = rng_from_seed(stream_seed(seed, Stream::Environment, 0));
            generate_trace(env, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..seeds.len())
        .flat_map(|r| (0..hypers.len()).map(move |p| (r, p)))
        .collect();
    // Each cell owns its state; collect keeps job order.
    let cells = jobs
        .par_iter()
        .map(|&(r, p)| run_cell(&traces[r], &hypers[p].0, &hypers[p].1, seeds[r], r))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutput {
        seeds,
        traces,
        cells,
        hypers,
    })
}

pub fn simulate(config: &ExperimentConfig) -> Result<SimulationOutput> {
    simulate_env(config, &config.environment)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPolicy {
    pub name: String,
    pub ridge: f64,
    pub noise_sd: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: usize,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gibbs_every: usize,
}

impl ResolvedPolicy {
    fn new(name: &str, h: &Hyper) -> Self {
        ResolvedPolicy {
            name: name.to_string(),
            ridge: h.ridge,
            noise_sd: h.noise_sd,
            delta1: h.delta1,
            delta2: h.delta2,
            tau: h.tau,
            gamma_a: h.gamma_a,
            gamma_b: h.gamma_b,
            gibbs_every: h.gibbs_every,
        }
    }
}

/// Record of one run, written as `manifest.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub master_seed: u64,
    pub artifacts: Vec<PathBuf>,
    pub replications: Vec<ReplicationRecord>,
    pub resolved_policies: Vec<ResolvedPolicy>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub(crate) fn new(command: &str, config: &ExperimentConfig, out: &SimulationOutput) -> Self {
        let replications = out
            .seeds
            .iter()
            .enumerate()
            .map(|(index, &seed)| ReplicationRecord {
                index,
                seed,
                wall_secs: out
                    .cells
                    .iter()
                    .filter(|c| c.replication == index)
                    .map(|c| c.wall_secs)
                    .sum(),
            })
            .collect();
        RunManifest {
            command: command.to_string(),
            master_seed: config.master_seed,
            artifacts: Vec::new(),
            replications,
            resolved_policies: out
                .hypers
                .iter()
                .map(|(n, h)| ResolvedPolicy::new(n, h))
                .collect(),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

pub(crate) fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", dir.display()),
        ))
    })
}

pub(crate) fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("codband-out"))
}

/// Simulate and write `regret.csv`, `summary.csv` and `manifest.toml`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let dir = output_dir(config);
    prepare_dir(&dir)?;
    let out = simulate(config)?;

    let regret_path = dir.join("regret.csv");
    let mut w = BufWriter::new(fs::File::create(&regret_path)?);
    write_regret_csv(&mut w, &out.curves())?;
    w.flush()?;

    let summary_path = dir.join("summary.csv");
    let mut w = BufWriter::new(fs::File::create(&summary_path)?);
    writeln!(w, "policy,mean_regret,stderr,reps")?;
    for (name, _) in &out.hypers {
        let (mean, se) = out.final_regret_stats(name);
        writeln!(w, "{name},{mean},{se},{}", out.seeds.len())?;
    }
    w.flush()?;

    let mut manifest = RunManifest::new("simulate", config, &out);
    manifest.artifacts = vec![regret_path, summary_path];
    let manifest_path = manifest.write(&dir)?;
    manifest.artifacts.push(manifest_path);
    Ok(manifest)
}
