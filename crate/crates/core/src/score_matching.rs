//! Score matching for the Gaussian example: stochastic gradients, SGLD and
//! the optimizer's error bounds.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{chi_mean, dist_sq, GaussianProblem};
use crate::ou::{self, OuSchedule};
use crate::rng::{self, Stream};
use crate::score::ScoreFamily;
use crate::stats::{McEstimate, Verdict};

/// One training draw `(tau, x0, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub tau: f64,
    pub x0: Vec<f64>,
    pub z: Vec<f64>,
}

impl TrainingSample {
    pub fn draw<R: Rng + ?Sized>(schedule: &OuSchedule, problem: &GaussianProblem, rng: &mut R) -> Self {
        let tau = schedule.sample_tau(rng);
        let x0 = problem.sample_x0(rng);
        let z = rng::standard_normal_vec(rng, problem.d());
        TrainingSample { tau, x0, z }
    }

    /// The noised point `m_tau x0 + sigma_tau z`.
    pub fn x_tau(&self) -> Vec<f64> {
        let (m, s) = ou::coeffs(self.tau);
        self.x0.iter().zip(&self.z).map(|(x, z)| m * x + s * z).collect()
    }
}

/// `2 kappa(t) sum_i (z_i / sigma_t + s_i(t, theta, x_t)) grad_theta s_i(t, theta, x_t)`.
pub fn stochastic_gradient_general<F, K>(theta: &[f64], sample: &TrainingSample, family: &F, kappa: K) -> Result<Vec<f64>>
where
    F: ScoreFamily + ?Sized,
    K: Fn(f64) -> f64,
{
    check_dim(family.n_params(), theta.len())?;
    check_dim(family.dim(), sample.x0.len())?;
    check_dim(family.dim(), sample.z.len())?;
    ou::mean_coeff(sample.tau)?;
    let (_, sigma) = ou::coeffs(sample.tau);
    if sigma == 0.0 && sample.z.iter().any(|&z| z != 0.0) {
        return Err(Error::SingularTime);
    }
    let x = sample.x_tau();
    let s = family.score(sample.tau, theta, &x)?;
    let jac = family.theta_jacobian(sample.tau, theta, &x);
    let resid: Vec<f64> = s
        .iter()
        .zip(&sample.z)
        .map(|(si, zi)| if sigma == 0.0 { *si } else { zi / sigma + si })
        .collect();
    let p = family.n_params();
    let w = 2.0 * kappa(sample.tau);
    Ok((0..p).map(|j| w * resid.iter().enumerate().map(|(i, r)| r * jac[i * p + j]).sum::<f64>()).collect())
}

/// Gaussian-case gradient with `kappa = sigma^2`, in the expanded form
/// `2 m (sigma z - sigma^2 (m x0 + sigma z) + sigma^2 m theta)` that has no
/// division by `sigma`.
pub fn stochastic_gradient_gaussian(theta: &[f64], sample: &TrainingSample, problem: &GaussianProblem) -> Result<Vec<f64>> {
    check_dim(problem.d(), theta.len())?;
    check_dim(problem.d(), sample.x0.len())?;
    check_dim(problem.d(), sample.z.len())?;
    ou::mean_coeff(sample.tau)?;
    let (m, s) = ou::coeffs(sample.tau);
    let s2 = s * s;
    Ok((0..theta.len())
        .map(|i| gaussian_h(m, s, s2, theta[i], sample.x0[i], sample.z[i]))
        .collect())
}

#[inline(always)]
fn gaussian_h(m: f64, s: f64, s2: f64, theta: f64, x0: f64, z: f64) -> f64 {
    2.0 * m * (s * z - s2 * (m * x0 + s * z) + s2 * m * theta)
}

/// `h(theta) = 2 E[sigma^2 m^2] (theta - mu)`.
pub fn exact_gradient(theta: &[f64], e_s2m2: f64, problem: &GaussianProblem) -> Result<Vec<f64>> {
    check_dim(problem.d(), theta.len())?;
    Ok(theta.iter().zip(problem.mu()).map(|(t, m)| 2.0 * e_s2m2 * (t - m)).collect())
}

/// The `tau`-expectations that enter the optimizer's constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauMoments {
    /// `E[sigma^2 m^2]`
    pub e_s2m2: f64,
    /// `E[sigma^4 m^4]`
    pub e_s4m4: f64,
    /// `E[m^2 (sigma + sigma^3)^2]`
    pub e_m2_s_s3_sq: f64,
    /// `E[m^3 sigma^2 (sigma + sigma^3)]`
    pub e_m3s2_s_s3: f64,
}

impl TauMoments {
    pub fn new(schedule: &OuSchedule) -> Result<Self> {
        let f = |g: fn(f64, f64) -> f64| {
            schedule.tau_mean(move |t| {
                let (m, s) = ou::coeffs(t);
                g(m, s)
            })
        };
        let odd = |g: fn(f64, f64) -> f64| {
            schedule.tau_mean_sqrt(move |t| {
                let (m, s) = ou::coeffs(t);
                g(m, s)
            })
        };
        Ok(TauMoments {
            e_s2m2: f(|m, s| s * s * m * m)?,
            e_s4m4: f(|m, s| (s * s * m * m).powi(2))?,
            e_m2_s_s3_sq: f(|m, s| (m * (s + s * s * s)).powi(2))?,
            e_m3s2_s_s3: odd(|m, s| m * m * m * s * s * (s + s * s * s))?,
        })
    }

    /// Largest admissible SGLD step, `min{E[s2m2] / (4 E[s4m4]), 1 / (2 E[s2m2])}`.
    pub fn lambda_max(&self) -> f64 {
        (self.e_s2m2 / (4.0 * self.e_s4m4)).min(1.0 / (2.0 * self.e_s2m2))
    }
}

/// `E[sigma^4 m^2 (|Z| / sigma + m |X0| + sigma |Z| + m |theta*|)^2]`, expanded
/// using independence of `tau`, `Z` and `X0`.
pub fn c_sgld2_numerator(moments: &TauMoments, problem: &GaussianProblem) -> f64 {
    let d = problem.d() as f64;
    let c = problem.theta_star_norm_sq().sqrt();
    let ez = chi_mean(problem.d());
    let ex = problem.mean_norm_x0();
    let ex2 = problem.ex0sq();
    d * moments.e_m2_s_s3_sq + 2.0 * ez * (ex + c) * moments.e_m3s2_s_s3 + (ex2 + 2.0 * c * ex + c * c) * moments.e_s4m4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldConstants {
    pub c1: f64,
    pub c2: f64,
}

impl SgldConstants {
    pub fn new(moments: &TauMoments, problem: &GaussianProblem) -> Self {
        SgldConstants {
            c1: 1.0 / moments.e_s2m2,
            c2: 4.0 * c_sgld2_numerator(moments, problem) / moments.e_s2m2,
        }
    }
}

pub fn sgld_constants(schedule: &OuSchedule, problem: &GaussianProblem) -> Result<SgldConstants> {
    Ok(SgldConstants::new(&TauMoments::new(schedule)?, problem))
}

/// The three-term mean-square error bound of the SGLD iterate,
/// `(1 - 2 lambda E)^n e0 + d C1 / beta + lambda C2`.
pub fn error_bound(lambda: f64, beta: f64, d: usize, e_s2m2: f64, c: &SgldConstants, n: u64, e0: f64) -> f64 {
    let contraction = if n == 0 {
        1.0
    } else {
        (n as f64 * (-2.0 * lambda * e_s2m2).ln_1p()).exp()
    };
    contraction * e0 + d as f64 * c.c1 / beta + lambda * c.c2
}

/// `e^{-2 n lambda E} e0 + d C1 / beta + lambda C2`, the quantity that the
/// second-moment bound doubles and the sampler lemmas build on.
pub fn exp_error_bound(lambda: f64, beta: f64, d: usize, e_s2m2: f64, c: &SgldConstants, n: u64, e0: f64) -> f64 {
    let decay = if n == 0 || lambda == 0.0 {
        1.0
    } else {
        (-2.0 * n as f64 * lambda * e_s2m2).exp()
    };
    decay * e0 + d as f64 * c.c1 / beta + lambda * c.c2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Stochastic,
    /// Replace the stochastic gradient by its mean `h(theta)`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    pub lambda: f64,
    /// Inverse temperature; `f64::INFINITY` switches the Langevin noise off.
    pub beta: f64,
    pub n_iters: u64,
    pub theta0: Vec<f64>,
    pub schedule: OuSchedule,
    pub problem: GaussianProblem,
    pub mode: GradientMode,
    /// Iteration counts at which the iterate is recorded.
    pub checkpoints: Vec<u64>,
    moments: TauMoments,
    constants: SgldConstants,
}

impl SgldConfig {
    pub fn new(
        schedule: OuSchedule,
        problem: GaussianProblem,
        lambda: f64,
        beta: f64,
        n_iters: u64,
        theta0: Vec<f64>,
    ) -> Result<Self> {
        check_dim(problem.d(), theta0.len())?;
        if theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta0".into()));
        }
        if !(beta > 0.0) || beta.is_nan() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        let moments = TauMoments::new(&schedule)?;
        let lmax = moments.lambda_max();
        if !(lambda > 0.0 && lambda <= lmax) {
            return Err(Error::InvalidArgument(format!("lambda must lie in (0, {lmax}], got {lambda}")));
        }
        let constants = SgldConstants::new(&moments, &problem);
        Ok(SgldConfig {
            lambda,
            beta,
            n_iters,
            theta0,
            schedule,
            problem,
            mode: GradientMode::Stochastic,
            checkpoints: Vec::new(),
            moments,
            constants,
        })
    }

    pub fn with_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_checkpoints(mut self, mut checkpoints: Vec<u64>) -> Self {
        checkpoints.sort_unstable();
        checkpoints.dedup();
        self.checkpoints = checkpoints;
        self
    }

    pub fn moments(&self) -> &TauMoments {
        &self.moments
    }

    pub fn constants(&self) -> &SgldConstants {
        &self.constants
    }

    /// `E|theta0 - theta*|^2` for the deterministic start.
    pub fn e0(&self) -> f64 {
        dist_sq(&self.theta0, self.problem.theta_star())
    }
}

pub fn sgld_error_bound(config: &SgldConfig, n: u64, e0: f64) -> f64 {
    error_bound(config.lambda, config.beta, config.problem.d(), config.moments.e_s2m2, &config.constants, n, e0)
}

/// `2 e^{-2 n lambda E} e0 + 2 d C1 / beta + 2 lambda C2 + 2 |theta*|^2`.
pub fn sgld_second_moment_bound(config: &SgldConfig, n: u64, e0: f64) -> f64 {
    let q = exp_error_bound(config.lambda, config.beta, config.problem.d(), config.moments.e_s2m2, &config.constants, n, e0);
    2.0 * q + 2.0 * config.problem.theta_star_norm_sq()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldRun {
    pub theta: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

const DIVERGENCE_CHECK_EVERY: u64 = 4096;

pub fn sgld_run<R: Rng + ?Sized>(config: &SgldConfig, rng: &mut R) -> Result<SgldRun> {
    let d = config.problem.d();
    let mu = config.problem.mu();
    let lambda = config.lambda;
    let noise = (2.0 * lambda / config.beta).sqrt();
    let eps = config.schedule.epsilon();
    let span = config.schedule.span();
    let pull = 2.0 * lambda * config.moments.e_s2m2;
    let mut theta = config.theta0.clone();
    let mut out = Vec::with_capacity(config.checkpoints.len());
    let mut next_cp = config.checkpoints.iter().peekable();
    while let Some(&&0) = next_cp.peek() {
        out.push(Checkpoint { n: 0, theta: theta.clone() });
        next_cp.next();
    }
    for step in 1..=config.n_iters {
        match config.mode {
            GradientMode::Stochastic => {
                let tau = eps + span * rng.gen::<f64>();
                let m = (-tau).exp();
                let s2 = -(-2.0 * tau).exp_m1();
                let s = s2.sqrt();
                for i in 0..d {
                    let x0 = mu[i] + rng::standard_normal(rng);
                    let z = rng::standard_normal(rng);
                    theta[i] -= lambda * gaussian_h(m, s, s2, theta[i], x0, z);
                }
            }
            GradientMode::Exact => {
                for i in 0..d {
                    theta[i] -= pull * (theta[i] - mu[i]);
                }
            }
        }
        if noise > 0.0 {
            for t in theta.iter_mut() {
                *t += noise * rng::standard_normal(rng);
            }
        }
        if step % DIVERGENCE_CHECK_EVERY == 0 && theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { step });
        }
        while let Some(&&n) = next_cp.peek() {
            if n != step {
                break;
            }
            out.push(Checkpoint { n, theta: theta.clone() });
            next_cp.next();
        }
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { step: config.n_iters });
    }
    Ok(SgldRun { theta, checkpoints: out })
}

/// Independent replicas, replica `i` driven by stream `(seed, "sgld", i)`.
pub fn sgld_replicas(config: &SgldConfig, seed: u64, n_replicas: usize) -> Result<Vec<SgldRun>> {
    (0..n_replicas)
        .into_par_iter()
        .map(|i| sgld_run(config, &mut rng::stream(seed, "sgld", i as u64)))
        .collect()
}

/// Paired Monte Carlo comparison of denoising and exact objective differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDifference {
    pub i: usize,
    pub j: usize,
    /// `U_exact(theta_i) - U_exact(theta_j)`.
    pub exact: f64,
    /// MC estimate of `[U_den(theta_i) - U_den(theta_j)] - exact`.
    pub excess: McEstimate,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    pub pairs: Vec<PairDifference>,
    pub verdict: Verdict,
}

const DENOISE_BLOCK: usize = 1 << 14;

/// Checks that the denoising objective with weight `kappa = scale * sigma^2`
/// differs from the exact objective by a constant, over all pairs of `thetas`.
pub fn explicit_vs_denoising_check(
    thetas: &[Vec<f64>],
    schedule: &OuSchedule,
    problem: &GaussianProblem,
    mc_n: usize,
    seed: u64,
    kappa_scale: f64,
) -> Result<ConstancyReport> {
    if thetas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two parameters".into()));
    }
    if mc_n < 2 {
        return Err(Error::InvalidArgument("need at least two Monte Carlo samples".into()));
    }
    for th in thetas {
        check_dim(problem.d(), th.len())?;
    }
    let exact: Vec<f64> = thetas
        .iter()
        .map(|th| problem.exact_objective(th, schedule).map(|u| kappa_scale * u))
        .collect::<Result<_>>()?;
    let d = problem.d();
    let n_blocks = mc_n.div_ceil(DENOISE_BLOCK);
    let blocks: Vec<Vec<Vec<f64>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut r: Stream = rng::stream(seed, "denoise", b as u64);
            let len = DENOISE_BLOCK.min(mc_n - b * DENOISE_BLOCK);
            let mut vals = vec![Vec::with_capacity(len); thetas.len()];
            let mut x0 = vec![0.0; d];
            let mut z = vec![0.0; d];
            for _ in 0..len {
                let tau = schedule.sample_tau(&mut r);
                let (m, s) = ou::coeffs(tau);
                for (x, mu) in x0.iter_mut().zip(problem.mu()) {
                    *x = mu + rng::standard_normal(&mut r);
                }
                rng::fill_standard_normal(&mut r, &mut z);
                for (k, th) in thetas.iter().enumerate() {
                    // kappa |z / sigma + s|^2 = scale |z + sigma s|^2 for kappa = scale sigma^2.
                    let mut acc = 0.0;
                    for i in 0..d {
                        let xt = m * x0[i] + s * z[i];
                        let v = z[i] + s * (-xt + m * th[i]);
                        acc += v * v;
                    }
                    vals[k].push(kappa_scale * acc);
                }
            }
            vals
        })
        .collect();
    let mut per_theta = vec![Vec::with_capacity(mc_n); thetas.len()];
    for block in blocks {
        for (k, v) in block.into_iter().enumerate() {
            per_theta[k].extend(v);
        }
    }
    let mut pairs = Vec::new();
    for i in 0..thetas.len() {
        for j in (i + 1)..thetas.len() {
            let ex = exact[i] - exact[j];
            let diffs: Vec<f64> = per_theta[i].iter().zip(&per_theta[j]).map(|(a, b)| a - b - ex).collect();
            let verdict = if diffs.iter().any(|v| !v.is_finite()) {
                Verdict::Inconclusive
            } else {
                Verdict::Pass
            };
            let excess = McEstimate::from_samples(&diffs, seed);
            let verdict = match verdict {
                Verdict::Pass if excess.half_width == 0.0 => Verdict::from_bool(excess.mean.abs() <= 1e-12 * ex.abs().max(1.0)),
                Verdict::Pass => Verdict::from_bool(excess.contains(0.0)),
                v => v,
            };
            pairs.push(PairDifference { i, j, exact: ex, excess, verdict });
        }
    }
    let verdict = if pairs.iter().any(|p| p.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if pairs.iter().any(|p| p.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(ConstancyReport { pairs, verdict })
}
