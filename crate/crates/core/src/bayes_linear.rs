//! Bayesian linear regression primitives.
//!
//! Two estimators live side by side:
//!
//! * [`LinearPosterior`]: the conjugate Gaussian posterior used by the shared
//!   models, with precision `λI + Σ x xᵀ / σ²` and moment `Σ x r / σ²`.
//! * [`RidgeFit`]: the unweighted ridge estimator `(λI + Σ x xᵀ)⁻¹ Σ x r`
//!   together with its self-normalized confidence width, used by change
//!   detection and LinUCB.
//!
//! Both are driven by the same unweighted sufficient statistics
//! ([`SuffStats`]), so a user's observation window can be absorbed into or
//! expelled from a posterior in O(d²) regardless of its length.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Arm feature vector with Euclidean norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Context(Vector);

impl Context {
    pub const NORM_TOLERANCE: f64 = 1e-9;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_vector(Vector::from_vec(values))
    }

    pub fn from_vector(v: Vector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::param("context", "empty feature vector"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("context", "non-finite feature"));
        }
        let norm = v.norm();
        if norm > 1.0 + Self::NORM_TOLERANCE {
            return Err(Error::param("context", format!("norm {norm} exceeds 1")));
        }
        Ok(Context(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, theta: &Vector) -> f64 {
        self.0.dot(theta)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// One (context, reward) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub context: Context,
    pub reward: f64,
}

impl Observation {
    pub fn new(context: Context, reward: f64) -> Result<Self> {
        if !reward.is_finite() {
            return Err(Error::param("reward", "must be finite"));
        }
        Ok(Observation { context, reward })
    }
}

/// Unweighted sufficient statistics `Σ x xᵀ`, `Σ x r` and the count.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    xx: Matrix,
    xr: Vector,
    count: usize,
}

impl SuffStats {
    pub fn new(dim: usize) -> Self {
        SuffStats {
            xx: Matrix::zeros(dim, dim),
            xr: Vector::zeros(dim),
            count: 0,
        }
    }

    pub fn from_observations(dim: usize, observations: &[Observation]) -> Result<Self> {
        let mut stats = SuffStats::new(dim);
        for obs in observations {
            stats.push(obs)?;
        }
        Ok(stats)
    }

    pub fn dim(&self) -> usize {
        self.xr.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn xx(&self) -> &Matrix {
        &self.xx
    }

    pub fn xr(&self) -> &Vector {
        &self.xr
    }

    pub fn push(&mut self, obs: &Observation) -> Result<()> {
        Error::check_dim(self.dim(), obs.context.dim())?;
        let x = obs.context.as_vector();
        self.xx.ger(1.0, x, x, 1.0);
        self.xr.axpy(obs.reward, x, 1.0);
        self.count += 1;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.xx.fill(0.0);
        self.xr.fill(0.0);
        self.count = 0;
    }

    /// Ridge fit with confidence parameters `(σ, δ₁)`.
    pub fn ridge_fit(&self, ridge: f64, noise_sd: f64, delta1: f64) -> Result<RidgeFit> {
        RidgeFit::new(self, ridge, noise_sd, delta1)
    }
}

/// Observation list plus its running sufficient statistics.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    observations: Vec<Observation>,
    stats: SuffStats,
}

impl ObservationSet {
    pub fn new(dim: usize) -> Self {
        ObservationSet {
            observations: Vec::new(),
            stats: SuffStats::new(dim),
        }
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        self.stats.push(&obs)?;
        self.observations.push(obs);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.stats.clear();
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn stats(&self) -> &SuffStats {
        &self.stats
    }
}

/// Conjugate Gaussian posterior over a linear reward parameter.
///
/// The prior is `N(0, λ⁻¹ I)` and the likelihood `N(r | xᵀθ, σ²)`. The mean
/// is re-solved from a Cholesky factorization of the precision after every
/// update, and the lower factor is cached for sampling and prediction.
#[derive(Debug, Clone)]
pub struct LinearPosterior {
    precision: Matrix,
    moment: Vector,
    mean: Vector,
    lower: Matrix,
    noise_sd: f64,
    ridge: f64,
    n_obs: usize,
}

impl LinearPosterior {
    pub fn new(dim: usize, ridge: f64, noise_sd: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::param(
                "ridge",
                format!("must be positive, got {ridge}"),
            ));
        }
        if !(noise_sd > 0.0 && noise_sd.is_finite()) {
            return Err(Error::param(
                "noise_sd",
                format!("must be positive, got {noise_sd}"),
            ));
        }
        Ok(LinearPosterior {
            precision: Matrix::identity(dim, dim) * ridge,
            moment: Vector::zeros(dim),
            mean: Vector::zeros(dim),
            lower: Matrix::identity(dim, dim) * ridge.sqrt(),
            noise_sd,
            ridge,
            n_obs: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn moment(&self) -> &Vector {
        &self.moment
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Lower Cholesky factor `L` with `precision = L Lᵀ`.
    pub fn cholesky_lower(&self) -> &Matrix {
        &self.lower
    }

    /// Posterior covariance `precision⁻¹`.
    pub fn covariance(&self) -> Matrix {
        let d = self.dim();
        let mut inv = Matrix::identity(d, d);
        // precision⁻¹ = L⁻ᵀ L⁻¹
        self.lower.solve_lower_triangular_mut(&mut inv);
        inv.transpose() * inv
    }

    pub fn reset(&mut self) {
        let d = self.dim();
        self.precision = Matrix::identity(d, d) * self.ridge;
        self.moment.fill(0.0);
        self.mean.fill(0.0);
        self.lower = Matrix::identity(d, d) * self.ridge.sqrt();
        self.n_obs = 0;
    }

    pub fn absorb(&mut self, obs: &Observation) -> Result<()> {
        Error::check_dim(self.dim(), obs.context.dim())?;
        let w = self.noise_sd.powi(-2);
        let x = obs.context.as_vector();
        self.precision.ger(w, x, x, 1.0);
        self.moment.axpy(w * obs.reward, x, 1.0);
        self.n_obs += 1;
        self.refactor()
            .map_err(|_| Error::Numerical("precision lost positive definiteness on absorb".into()))
    }

    /// Exact inverse of [`absorb`](Self::absorb).
    pub fn expel(&mut self, obs: &Observation) -> Result<()> {
        Error::check_dim(self.dim(), obs.context.dim())?;
        if self.n_obs == 0 {
            return Err(Error::StateCorruption(
                "expel from a posterior with no absorbed observations".into(),
            ));
        }
        let w = self.noise_sd.powi(-2);
        let x = obs.context.as_vector();
        let mut precision = self.precision.clone();
        precision.ger(-w, x, x, 1.0);
        let mut moment = self.moment.clone();
        moment.axpy(-w * obs.reward, x, 1.0);
        self.commit_downdate(precision, moment, 1)
    }

    pub fn absorb_stats(&mut self, stats: &SuffStats) -> Result<()> {
        Error::check_dim(self.dim(), stats.dim())?;
        if stats.is_empty() {
            return Ok(());
        }
        let w = self.noise_sd.powi(-2);
        self.precision += stats.xx() * w;
        self.moment.axpy(w, stats.xr(), 1.0);
        self.n_obs += stats.count();
        self.refactor()
            .map_err(|_| Error::Numerical("precision lost positive definiteness on absorb".into()))
    }

    pub fn expel_stats(&mut self, stats: &SuffStats) -> Result<()> {
        Error::check_dim(self.dim(), stats.dim())?;
        if stats.is_empty() {
            return Ok(());
        }
        if stats.count() > self.n_obs {
            return Err(Error::StateCorruption(format!(
                "expelling {} observations from a posterior holding {}",
                stats.count(),
                self.n_obs
            )));
        }
        let w = self.noise_sd.powi(-2);
        let precision = &self.precision - stats.xx() * w;
        let mut moment = self.moment.clone();
        moment.axpy(-w, stats.xr(), 1.0);
        self.commit_downdate(precision, moment, stats.count())
    }

    fn commit_downdate(&mut self, precision: Matrix, moment: Vector, removed: usize) -> Result<()> {
        let chol = Cholesky::new(precision.clone()).ok_or_else(|| {
            Error::StateCorruption("precision not positive definite after expel".into())
        })?;
        self.mean = chol.solve(&moment);
        self.lower = chol.unpack();
        self.precision = precision;
        self.moment = moment;
        self.n_obs -= removed;
        Ok(())
    }

    fn refactor(&mut self) -> std::result::Result<(), ()> {
        let chol: Cholesky<f64, Dyn> = Cholesky::new(self.precision.clone()).ok_or(())?;
        self.mean = chol.solve(&self.moment);
        self.lower = chol.unpack();
        Ok(())
    }

    /// Draw `θ ~ N(mean, precision⁻¹)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let d = self.dim();
        let mut z = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        // Lᵀ y = z gives Cov(y) = (L Lᵀ)⁻¹.
        self.lower.tr_solve_lower_triangular_mut(&mut z);
        z += &self.mean;
        z
    }

    /// `σ² + xᵀ Σ x` with `Σ` the posterior covariance.
    pub fn predictive_variance(&self, x: &Context) -> f64 {
        let mut y = x.as_vector().clone();
        self.lower.solve_lower_triangular_mut(&mut y);
        self.noise_sd * self.noise_sd + y.norm_squared()
    }

    pub fn log_predictive(&self, obs: &Observation) -> f64 {
        let var = self.predictive_variance(&obs.context);
        let resid = obs.reward - obs.context.dot(&self.mean);
        -0.5 * (LN_2PI + var.ln() + resid * resid / var)
    }

    /// Collapsed predictive density `N(r | xᵀμ, σ² + xᵀΣx)`.
    pub fn predictive_likelihood(&self, obs: &Observation) -> f64 {
        self.log_predictive(obs).exp()
    }

    /// Sum of log predictive densities with the posterior held fixed.
    pub fn log_predictive_sum(&self, observations: &[Observation]) -> Result<f64> {
        let (xs, rewards) = stack_observations(self.dim(), observations)?;
        Ok(self.log_predictive_columns(&xs, &rewards))
    }

    /// [`log_predictive_sum`](Self::log_predictive_sum) over contexts stored
    /// as the columns of `xs`.
    pub fn log_predictive_columns(&self, xs: &Matrix, rewards: &[f64]) -> f64 {
        debug_assert_eq!(xs.ncols(), rewards.len());
        let means = xs.tr_mul(&self.mean);
        let d = self.dim();
        let mut lower_inv = Matrix::identity(d, d);
        self.lower.solve_lower_triangular_mut(&mut lower_inv);
        // One product instead of a triangular solve per column.
        let solved = lower_inv * xs;
        let noise = self.noise_sd * self.noise_sd;
        let mut total = 0.0;
        for (j, &r) in rewards.iter().enumerate() {
            let var = noise + solved.column(j).norm_squared();
            let resid = r - means[j];
            total += -0.5 * (LN_2PI + var.ln() + resid * resid / var);
        }
        total
    }
}

/// Contexts as matrix columns plus the matching rewards.
pub fn stack_observations(dim: usize, observations: &[Observation]) -> Result<(Matrix, Vec<f64>)> {
    let mut xs = Matrix::zeros(dim, observations.len());
    let mut rewards = Vec::with_capacity(observations.len());
    for (j, obs) in observations.iter().enumerate() {
        Error::check_dim(dim, obs.context.dim())?;
        xs.set_column(j, obs.context.as_vector());
        rewards.push(obs.reward);
    }
    Ok((xs, rewards))
}

/// Log density of `N(r | 0, σ² + ‖x‖²/λ)`, the predictive under the prior.
pub fn prior_log_predictive(obs: &Observation, ridge: f64, noise_sd: f64) -> f64 {
    let var = noise_sd * noise_sd + obs.context.as_vector().norm_squared() / ridge;
    -0.5 * (LN_2PI + var.ln() + obs.reward * obs.reward / var)
}

/// Unweighted ridge solution with its confidence width.
///
/// `A = λI + Σ x xᵀ`, `θ̂ = A⁻¹ Σ x r`, and
/// `CB(x) = α √(xᵀ A⁻¹ x)` with
/// `α = σ √(d ln(1 + n/(dλ)) + 2 ln(1/δ₁)) + √λ`.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    theta: Vector,
    lower: Matrix,
    alpha: f64,
}

impl RidgeFit {
    pub fn new(stats: &SuffStats, ridge: f64, noise_sd: f64, delta1: f64) -> Result<Self> {
        if ridge.is_nan() || ridge <= 0.0 {
            return Err(Error::param(
                "ridge",
                format!("must be positive, got {ridge}"),
            ));
        }
        if !(delta1 > 0.0 && delta1 < 1.0) {
            return Err(Error::param(
                "delta1",
                format!("must lie in (0,1), got {delta1}"),
            ));
        }
        if noise_sd.is_nan() || noise_sd < 0.0 {
            return Err(Error::param("noise_sd", "must be non-negative"));
        }
        let d = stats.dim();
        let mut a = stats.xx().clone();
        for i in 0..d {
            a[(i, i)] += ridge;
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::Numerical("ridge design matrix not positive definite".into()))?;
        let theta = chol.solve(stats.xr());
        let df = d as f64;
        let alpha = noise_sd
            * (df * (1.0 + stats.count() as f64 / (df * ridge)).ln() + 2.0 * (1.0 / delta1).ln())
                .sqrt()
            + ridge.sqrt();
        Ok(RidgeFit {
            theta,
            lower: chol.unpack(),
            alpha,
        })
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn predict(&self, x: &Context) -> f64 {
        x.dot(&self.theta)
    }

    pub fn confidence_bound(&self, x: &Context) -> f64 {
        let mut y = x.as_vector().clone();
        self.lower.solve_lower_triangular_mut(&mut y);
        self.alpha * y.norm()
    }
}

/// `(λI + Σ x xᵀ)⁻¹ Σ x r` over `observations`; zero for an empty list.
pub fn ridge_estimate(dim: usize, observations: &[Observation], ridge: f64) -> Result<Vector> {
    let stats = SuffStats::from_observations(dim, observations)?;
    // δ₁ and σ do not affect the point estimate.
    Ok(RidgeFit::new(&stats, ridge, 0.0, 0.5)?.theta)
}

pub fn confidence_bound(
    observations: &[Observation],
    x: &Context,
    ridge: f64,
    noise_sd: f64,
    delta1: f64,
) -> Result<f64> {
    let stats = SuffStats::from_observations(x.dim(), observations)?;
    Ok(RidgeFit::new(&stats, ridge, noise_sd, delta1)?.confidence_bound(x))
}
