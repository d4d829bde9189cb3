//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use codband::bayes_linear::{Context, Observation, ObservationSet, Vector};
use codband::dp_pool::ModelPool;
use codband::rng::rng_from_seed;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const SD: f64 = 0.1;
pub const RIDGE: f64 = 1.0;

/// Dense Bayesian linear posterior `(mean, covariance)` from scratch:
/// `Σ = (λI + XᵀX/σ²)⁻¹`, `μ = Σ Xᵀr/σ²`.
pub fn dense_posterior(
    dim: usize,
    data: &[Observation],
    ridge: f64,
    sd: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let mut precision = DMatrix::<f64>::identity(dim, dim) * ridge;
    let mut moment = DVector::<f64>::zeros(dim);
    for o in data {
        let x = o.context.as_vector();
        precision += x * x.transpose() / (sd * sd);
        moment += x * (o.reward / (sd * sd));
    }
    let cov = precision.try_inverse().expect("positive definite");
    (&cov * moment, cov)
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Product of predictive densities of `data` under a fixed Gaussian posterior.
pub fn predictive_product(
    data: &[Observation],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    sd: f64,
) -> f64 {
    data.iter()
        .map(|o| {
            let x = o.context.as_vector();
            let var = sd * sd + (x.transpose() * cov * x)[(0, 0)];
            normal_pdf(o.reward, x.dot(mean), var)
        })
        .product()
}

/// Uniform direction scaled by a uniform radius in `[r_min, r_max]`.
pub fn ball_context<R: Rng>(rng: &mut R, dim: usize, r_min: f64, r_max: f64) -> Context {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            let r = rng.random_range(r_min..=r_max);
            return Context::new(v.iter().map(|x| x * r / n).collect()).unwrap();
        }
    }
}

pub fn obs(x: Context, r: f64) -> Observation {
    Observation::new(x, r).unwrap()
}

pub struct Separated {
    pub pool: ModelPool,
    pub a: u64,
    pub b: u64,
    pub a_data: Vec<Observation>,
    pub b_data: Vec<Observation>,
    pub user: ObservationSet,
}

/// Models A and B fit to 60 observations each from θ_A = 0.5·e₁ and
/// θ_B = −0.5·e₁, every context with |x₁| ≥ 0.5 so the expected rewards
/// differ by at least 0.5. The user holds 30 noiseless draws from A; with
/// `assigned` the user currently sits in B, otherwise it is not in the pool.
pub fn separated(seed: u64, assigned: bool) -> Separated {
    let dim = 4;
    let mut rng = rng_from_seed(seed);
    let mut e1 = vec![0.0; dim];
    e1[0] = 0.5;
    let theta_a = Vector::from_vec(e1);
    let theta_b = -theta_a.clone();
    let context = |rng: &mut rand_chacha::ChaCha8Rng| loop {
        let x = ball_context(rng, dim, 0.5, 1.0);
        if x.as_slice()[0].abs() >= 0.5 {
            return x;
        }
    };
    let mut pool = ModelPool::new(dim, RIDGE, SD, 1.0, 1.0, 1.0).unwrap();
    let a = pool.create_model();
    let b = pool.create_model();
    let mut model_data = Vec::new();
    for (key, theta) in [(a, &theta_a), (b, &theta_b)] {
        pool.assign(key).unwrap();
        pool.assign(key).unwrap();
        let mut data = Vec::new();
        for _ in 0..60 {
            let x = context(&mut rng);
            let r = x.dot(theta) + SD * rng.random_range(-1.0..1.0);
            let o = obs(x, r);
            pool.absorb(key, &o).unwrap();
            data.push(o);
        }
        model_data.push(data);
    }
    let mut user = ObservationSet::new(dim);
    for _ in 0..30 {
        let x = context(&mut rng);
        let r = x.dot(&theta_a);
        user.push(obs(x, r)).unwrap();
    }
    if assigned {
        pool.assign(b).unwrap();
        for o in user.observations() {
            pool.absorb(b, o).unwrap();
        }
    }
    let b_data = model_data.pop().unwrap();
    let a_data = model_data.pop().unwrap();
    Separated {
        pool,
        a,
        b,
        a_data,
        b_data,
        user,
    }
}
