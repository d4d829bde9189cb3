//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line reaches the
//! test log. Exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use codband::bayes_linear::{Context, LinearPosterior, Observation, SuffStats, Vector};
use codband::change_detect::{DetectorConfig, DetectorState};
use codband::dp_pool::ModelPool;
use codband::environment::{EnvConfig, Setting};
use codband::evaluation::{replay, write_regret_csv};
use codband::policies::{FixedLinear, Policy};
use codband::rng::{rng_from_seed, SimRng};
use codband::runner::{
    click_probability, generate_event_log, run_experiment, simulate, simulate_env,
    ExperimentConfig, SimulationOutput,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::{ball_context, dense_posterior, normal_pdf, obs, separated};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(f64::MIN_POSITIVE)
}

fn gaussian(rng: &mut SimRng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

// 1. Posterior-oracle equivalence.
fn criterion_1() -> Verdict {
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=8);
        let ridge = rng.random_range(0.2..3.0);
        let sd = rng.random_range(0.05..1.0);
        let theta = Vector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-0.6..0.6)));
        let mut post = LinearPosterior::new(dim, ridge, sd).unwrap();
        let mut live: Vec<Observation> = Vec::new();
        let mut seen = 0;
        while seen < 100 {
            if !live.is_empty() && rng.random_bool(0.3) {
                let i = rng.random_range(0..live.len());
                post.expel(&live.swap_remove(i)).unwrap();
            } else {
                let x = ball_context(&mut rng, dim, 0.0, 1.0);
                let r = x.dot(&theta) + sd * gaussian(&mut rng);
                let o = obs(x, r);
                post.absorb(&o).unwrap();
                live.push(o);
                seen += 1;
            }
        }
        let (mean, cov) = dense_posterior(dim, &live, ridge, sd);
        worst = worst.max(rel_err(post.mean().as_slice(), mean.as_slice()));
        worst = worst.max(rel_err(post.covariance().as_slice(), cov.as_slice()));

        // Unweighted ridge on the survivors.
        let fit = SuffStats::from_observations(dim, &live)
            .unwrap()
            .ridge_fit(ridge, sd, 0.05)
            .unwrap();
        let mut a = DMatrix::<f64>::identity(dim, dim) * ridge;
        let mut b = DVector::<f64>::zeros(dim);
        for o in &live {
            let x = o.context.as_vector();
            a += x * x.transpose();
            b += x * o.reward;
        }
        let ridge_theta = a.try_inverse().unwrap() * b;
        worst = worst.max(rel_err(fit.theta().as_slice(), ridge_theta.as_slice()));
    }
    verdict(
        worst < 1e-8,
        format!("max relative error {worst:.2e} over 1000 interleavings (tol 1e-8)"),
    )
}

// 2. CRP frequencies.
fn criterion_2() -> Verdict {
    let mut rng = rng_from_seed(202);
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let alpha0 = rng.random_range(0.2..4.0);
        let mut pool = ModelPool::new(2, 1.0, 0.1, alpha0, 1.0, 1.0).unwrap();
        let k = rng.random_range(1..=6);
        let mut counts = Vec::new();
        for _ in 0..k {
            let key = pool.create_model();
            let n = rng.random_range(1..=8);
            for _ in 0..n {
                pool.assign(key).unwrap();
            }
            counts.push((key, n as f64));
        }
        let total: f64 = counts.iter().map(|c| c.1).sum::<f64>() + alpha0;
        let mut hits = vec![0usize; k + 1];
        for _ in 0..draws {
            let key = pool.clone().sample_prior_model(&mut rng);
            let slot = counts.iter().position(|c| c.0 == key).unwrap_or(k);
            hits[slot] += 1;
        }
        for (i, h) in hits.iter().enumerate() {
            let exact = if i < k {
                counts[i].1 / total
            } else {
                alpha0 / total
            };
            worst = worst.max((*h as f64 / draws as f64 - exact).abs());
        }
    }
    verdict(
        worst < 0.01,
        format!("max |freq - weight| {worst:.4} over 5 pools x 1e5 draws (tol 0.01)"),
    )
}

// 3. Collapsed predictive against 2-d quadrature over θ.
fn criterion_3() -> Verdict {
    let mut rng = rng_from_seed(303);
    let mut worst: f64 = 0.0;
    let half = 800usize;
    let h = 8.0 / half as f64;
    for _ in 0..100 {
        let ridge = rng.random_range(0.5..2.0);
        let sd = rng.random_range(0.1..0.6);
        let theta = Vector::from_vec(vec![
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
        ]);
        let n = rng.random_range(0..8);
        let mut post = LinearPosterior::new(2, ridge, sd).unwrap();
        let mut data = Vec::new();
        for _ in 0..n {
            let x = ball_context(&mut rng, 2, 0.0, 1.0);
            let o = obs(x.clone(), x.dot(&theta) + sd * gaussian(&mut rng));
            post.absorb(&o).unwrap();
            data.push(o);
        }
        let x = ball_context(&mut rng, 2, 0.0, 1.0);
        let r = x.dot(&theta) + sd * gaussian(&mut rng);
        let query = obs(x.clone(), r);
        let got = post.predictive_likelihood(&query);

        // ∫ N(r | xᵀθ, σ²) N(θ | μ, Σ) dθ with θ = μ + C z, z on a grid.
        let (mean, cov) = dense_posterior(2, &data, ridge, sd);
        let c = cov.cholesky().unwrap().unpack();
        let xv = x.as_vector();
        let base = xv.dot(&mean);
        let w = c.transpose() * xv;
        let mut total = 0.0;
        for i in 0..=2 * half {
            let z1 = -8.0 + i as f64 * h;
            let g1 = (-0.5 * z1 * z1).exp();
            for j in 0..=2 * half {
                let z2 = -8.0 + j as f64 * h;
                let prior = g1 * (-0.5 * z2 * z2).exp() / (2.0 * std::f64::consts::PI);
                total += prior * normal_pdf(r, base + w[0] * z1 + w[1] * z2, sd * sd);
            }
        }
        let quad = total * h * h;
        worst = worst.max((got - quad).abs());
    }
    verdict(
        worst < 1e-6,
        format!("max |closed form - quadrature| {worst:.2e} on 100 instances (tol 1e-6)"),
    )
}

// 4. Gibbs identifiability.
fn criterion_4() -> Verdict {
    let runs = 1000;
    let mut hits = 0;
    for seed in 0..runs {
        let mut s = separated(seed, true);
        let key = s
            .pool
            .gibbs_reassign(s.b, &s.user, &mut rng_from_seed(seed + 50_000))
            .unwrap();
        hits += (key == s.a) as usize;
    }
    let rate = hits as f64 / runs as f64;
    verdict(
        rate >= 0.99,
        format!("correct reassignment {hits}/{runs} = {rate:.3} (need >= 0.99)"),
    )
}

// 5. Detector calibration.
fn separating_context(rng: &mut SimRng, dim: usize) -> Context {
    loop {
        let x = ball_context(rng, dim, 0.8, 1.0);
        if x.as_slice()[0].abs() >= 0.8 {
            return x;
        }
    }
}

fn criterion_5() -> Verdict {
    let dim = 5;
    let sd = 0.1;
    let mut rng = rng_from_seed(505);

    // False alarms: estimator converged on 200 stationary observations, then
    // one full window of τ = 50 more from the same model.
    let config = DetectorConfig::new(0.05, 0.05, 50, 1.0, sd).unwrap();
    let windows = 10_000;
    let mut alarms = 0;
    for _ in 0..windows {
        let theta = Vector::from_iterator(dim, (0..dim).map(|_| gaussian(&mut rng)));
        let theta = &theta / theta.norm();
        let mut stats = SuffStats::new(dim);
        for _ in 0..200 {
            let x = ball_context(&mut rng, dim, 0.0, 1.0);
            let r = x.dot(&theta) + sd * gaussian(&mut rng);
            stats.push(&obs(x, r)).unwrap();
        }
        let mut state = DetectorState::new();
        let mut fired = false;
        for _ in 0..50 {
            let x = ball_context(&mut rng, dim, 0.0, 1.0);
            let r = x.dot(&theta) + sd * gaussian(&mut rng);
            let bit = config.badness_bit(&stats, &x, r).unwrap();
            fired = state.push_and_check(bit, &config);
            stats.push(&obs(x, r)).unwrap();
        }
        alarms += fired as usize;
    }
    let rate = alarms as f64 / windows as f64;
    let bound = 0.05 + 3.0 * (0.05f64 / 1e4).sqrt();

    // Power: θ = e₁ flips to −e₁ and every served context has
    // |xᵀ(θ − θ')| ≥ 2(CB + ε) at the change.
    let runs = 500;
    let tau = 50;
    let mut detected = 0;
    let mut condition_held = true;
    for _ in 0..runs {
        let mut e1 = vec![0.0; dim];
        e1[0] = 1.0;
        let theta = Vector::from_vec(e1);
        let flipped = -theta.clone();
        let mut stats = SuffStats::new(dim);
        let mut state = DetectorState::new();
        for _ in 0..200 {
            let x = separating_context(&mut rng, dim);
            let r = x.dot(&theta) + sd * gaussian(&mut rng);
            let bit = config.badness_bit(&stats, &x, r).unwrap();
            state.push_and_check(bit, &config);
            stats.push(&obs(x, r)).unwrap();
        }
        let fit = stats.ridge_fit(1.0, sd, 0.05).unwrap();
        for _ in 0..2 * tau {
            let x = separating_context(&mut rng, dim);
            let gap = (x.dot(&theta) - x.dot(&flipped)).abs();
            if gap < 2.0 * (fit.confidence_bound(&x) + config.epsilon()) {
                condition_held = false;
            }
            let r = x.dot(&flipped) + sd * gaussian(&mut rng);
            let bit = config.badness_bit(&stats, &x, r).unwrap();
            let fire = state.push_and_check(bit, &config);
            stats.push(&obs(x, r)).unwrap();
            if fire {
                detected += 1;
                break;
            }
        }
    }
    let power = detected as f64 / runs as f64;
    verdict(
        rate <= bound && power >= 0.95 && condition_held,
        format!(
            "false alarms {rate:.4} (bound {bound:.4}); detection within 2τ {detected}/{runs} = {power:.3} (need >= 0.95); gap condition held: {condition_held}"
        ),
    )
}

struct Shared {
    c6: Option<(SimulationOutput, ExperimentConfig)>,
}

fn criterion_6(shared: &mut Shared) -> Verdict {
    let config = ExperimentConfig::desk_default();
    let out = simulate(&config).unwrap();
    let m = |p: &str| out.final_regret_stats(p).0;
    let (o, c, r, l) = (
        m("oracle-linucb"),
        m("codband"),
        m("restart-ts"),
        m("linucb"),
    );
    shared.c6 = Some((out, config));
    verdict(
        o < c && c < r && r < l,
        format!("mean final regret oracle {o:.1} < codband {c:.1} < restart-ts {r:.1} < linucb {l:.1} (20 seeds)"),
    )
}

fn criterion_7(shared: &Shared) -> Verdict {
    let (out, _) = shared.c6.as_ref().expect("criterion 6 ran");
    let mut first = 0.0;
    let mut second = 0.0;
    let mut segments = 0;
    for cell in out.cells_for("codband") {
        for (a, b) in cell.segment_halves(&out.traces[cell.replication]) {
            first += a;
            second += b;
            segments += 1;
        }
    }
    let (first, second) = (first / segments as f64, second / segments as f64);
    verdict(
        second < first,
        format!("mean segment regret first half {first:.3} > second half {second:.3} over {segments} segments"),
    )
}

fn criterion_8() -> Verdict {
    let mut config = ExperimentConfig::desk_default();
    config.replications = 10;
    config.environment.setting = Setting::Stationary { k: 10 };
    config.set_policy_names(&["codband", "linucb"]);
    let out = simulate(&config).unwrap();
    let c = out.final_regret_stats("codband").0;
    let l = out.final_regret_stats("linucb").0;
    verdict(
        c <= 2.0 * l,
        format!("stationary: codband {c:.1} <= 2 x linucb {l:.1}"),
    )
}

fn criterion_9() -> Verdict {
    let mut config = ExperimentConfig::desk_default();
    config.replications = 10;
    config.master_seed = 909;
    config.set_policy_names(&["codband"]);
    let regret = |k: usize, s: (usize, usize), sd: f64| {
        let mut env = config.environment.clone();
        env.setting = Setting::FixedMixture { k, weights: None };
        env.s_min = s.0;
        env.s_max = s.1;
        env.noise_sd = sd;
        simulate_env(&config, &env)
            .unwrap()
            .final_regret_stats("codband")
            .0
    };
    let k: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&k| regret(k, (200, 400), 0.1))
        .collect();
    let s: Vec<f64> = [(500, 800), (200, 500), (100, 200)]
        .iter()
        .map(|&s| regret(10, s, 0.1))
        .collect();
    let sd = [k[1], regret(10, (200, 400), 0.16)];
    let up = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    verdict(
        up(&k) && up(&s) && up(&sd),
        format!(
            "K 5/10/20: {:.0} {:.0} {:.0}; S (500,800)/(200,500)/(100,200): {:.0} {:.0} {:.0}; sigma 0.1/0.16: {:.0} {:.0}",
            k[0], k[1], k[2], s[0], s[1], s[2], sd[0], sd[1]
        ),
    )
}

fn criterion_10() -> Verdict {
    let env = EnvConfig {
        n_users: 20,
        horizon: 5000,
        dim: 10,
        pool_size: 1000,
        candidates_per_round: 10,
        s_min: 200,
        s_max: 400,
        noise_sd: 0.1,
        setting: Setting::FixedMixture {
            k: 10,
            weights: None,
        },
    };
    let seed = 1010;
    let (log, trace) = generate_event_log(&env, seed).unwrap();
    assert_eq!(log.records.len(), 100_000);
    let theta = trace.periods(0)[0].theta.clone();

    let mut policy = FixedLinear::new(theta.clone());
    let result = replay(&mut policy, &log.records, &mut rng_from_seed(1)).unwrap();

    // Direct simulation on the same trace with an independent serving stream.
    let mut direct = FixedLinear::new(theta);
    let mut serve = rng_from_seed(seed ^ 0x5EED);
    let mut rng = rng_from_seed(2);
    let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
    for t in 0..env.horizon {
        for u in 0..env.n_users {
            let round = trace.serve_round(t, u, &mut serve).unwrap();
            let arm = direct
                .choose(u, &round.candidates, &mut rng)
                .unwrap()
                .arm_index;
            let p = click_probability(round.expected[arm]);
            sum += p;
            sq += p * p;
            n += 1.0;
        }
    }
    let rate = sum / n;
    let direct_se = ((sq / n - rate * rate).max(0.0) / n).sqrt();
    let se = (result.standard_error.powi(2) + direct_se.powi(2)).sqrt();
    let gap = (result.reward_rate - rate).abs();
    verdict(
        gap <= 2.0 * se,
        format!(
            "replay {:.4} vs direct {rate:.4}: |diff| {gap:.4} <= 2 SE {:.4} ({} matched of {})",
            result.reward_rate,
            2.0 * se,
            result.matched,
            result.total_events
        ),
    )
}

fn criterion_11(shared: &Shared) -> Verdict {
    let (out, config) = shared.c6.as_ref().expect("criterion 6 ran");
    let mut first = Vec::new();
    write_regret_csv(&mut first, &out.curves()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut config = config.clone();
    config.output_dir = Some(dir.path().to_path_buf());
    run_experiment(&config).unwrap();
    let second = std::fs::read(dir.path().join("regret.csv")).unwrap();
    verdict(
        first == second,
        format!(
            "regret CSVs of two full runs: {} vs {} bytes, identical: {}",
            first.len(),
            second.len(),
            first == second
        ),
    )
}

fn run(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match outcome {
        Ok(v) => (v.pass, v.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    if let Some(limit) = budget {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; over time budget {}s", limit.as_secs()));
        }
    }
    println!(
        "criterion {id:>2} {} {name}: {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut shared = Shared { c6: None };
    let mut results = vec![
        run(
            1,
            "posterior-oracle equivalence",
            Some(secs(10)),
            criterion_1,
        ),
        run(2, "CRP correctness", Some(secs(5)), criterion_2),
        run(3, "collapsed predictive", Some(secs(30)), criterion_3),
        run(4, "Gibbs identifiability", Some(secs(60)), criterion_4),
        run(5, "detector calibration", Some(secs(120)), criterion_5),
        run(6, "regret ordering", Some(secs(600)), || {
            criterion_6(&mut shared)
        }),
    ];
    results.push(run(7, "segment sublinearity", None, || {
        criterion_7(&shared)
    }));
    results.push(run(
        8,
        "stationary robustness",
        Some(secs(180)),
        criterion_8,
    ));
    results.push(run(9, "trend checks", Some(secs(1200)), criterion_9));
    results.push(run(
        10,
        "replay unbiasedness",
        Some(secs(120)),
        criterion_10,
    ));
    results.push(run(11, "determinism", None, || criterion_11(&shared)));
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
