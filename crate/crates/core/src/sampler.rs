//! Backward-in-time generation.
//!
//! The Euler-Maruyama scheme runs
//! `Y_{k+1} = Y_k + gamma (Y_k + 2 s(T - t_k, theta_hat, Y_k)) + sqrt(2 gamma) Z_{k+1}`
//! from `Y_0 ~ N(0, I)`. For the affine family every process involved is a
//! linear SDE with additive noise, so its law is Gaussian and the moments
//! are available in closed form.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{dist_sq, GaussianProblem};
use crate::ou::{OuSchedule, TimeGrid};
use crate::rng;
use crate::score::ScoreFamily;
use crate::stats::{self, McEstimate};

/// How far the backward chain runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Steps cover `[0, T]`; no early stopping.
    Full,
    /// Steps cover `[0, T - epsilon]`.
    EarlyStopped,
}

impl Horizon {
    pub fn span(self, schedule: &OuSchedule) -> f64 {
        match self {
            Horizon::Full => schedule.horizon(),
            Horizon::EarlyStopped => schedule.span(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmRunConfig {
    pub schedule: OuSchedule,
    pub grid: TimeGrid,
    pub theta_hat: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: Horizon,
}

impl EmRunConfig {
    /// Fails unless `gamma` divides the horizon's span exactly.
    pub fn new(
        schedule: OuSchedule,
        gamma: f64,
        theta_hat: Vec<f64>,
        n_paths: usize,
        seed: u64,
        horizon: Horizon,
    ) -> Result<Self> {
        let grid = TimeGrid::new(gamma, horizon.span(&schedule))?;
        Self::with_grid(schedule, grid, theta_hat, n_paths, seed, horizon)
    }

    pub fn with_grid(
        schedule: OuSchedule,
        grid: TimeGrid,
        theta_hat: Vec<f64>,
        n_paths: usize,
        seed: u64,
        horizon: Horizon,
    ) -> Result<Self> {
        let span = horizon.span(&schedule);
        if (grid.span() - span).abs() > 1e-9 * span {
            return Err(Error::InvalidArgument(format!(
                "grid covers {} but the horizon needs {span}",
                grid.span()
            )));
        }
        if n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be positive".into()));
        }
        if theta_hat.is_empty() || theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("theta_hat must be a non-empty finite vector".into()));
        }
        Ok(EmRunConfig { schedule, grid, theta_hat, n_paths, seed, horizon })
    }

    pub fn d(&self) -> usize {
        self.theta_hat.len()
    }
}

/// Terminal states of a batch of paths, row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmSamples {
    pub d: usize,
    pub data: Vec<f64>,
    /// Paths dropped because their state became non-finite.
    pub n_diverged: usize,
}

impl EmSamples {
    pub fn from_rows(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 || data.len() % d != 0 {
            return Err(Error::InvalidArgument("sample buffer is not a whole number of rows".into()));
        }
        Ok(EmSamples { d, data, n_diverged: 0 })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.d).map(|j| stats::mean(&self.column(j))).collect()
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let m = self.mean();
        let cols: Vec<Vec<f64>> = (0..self.d).map(|j| self.column(j)).collect();
        let mut c = DMatrix::zeros(self.d, self.d);
        for a in 0..self.d {
            for b in a..self.d {
                let prods: Vec<f64> = cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - m[a]) * (y - m[b])).collect();
                let v = stats::pairwise_sum(&prods) / (n as f64 - 1.0);
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        c
    }

    /// CSV with header `y_0,...,y_{d-1}`, one row per path.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.d).map(|j| format!("y_{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// One update `y + gamma (y + 2 s(t_score, theta, y)) + sqrt(2 gamma) z`, in place.
#[inline]
pub fn em_step<F: ScoreFamily + ?Sized>(
    family: &F,
    t_score: f64,
    gamma: f64,
    theta: &[f64],
    y: &mut [f64],
    z: &[f64],
    scratch: &mut [f64],
) {
    family.score_into(t_score, theta, y, scratch);
    let noise = (2.0 * gamma).sqrt();
    for i in 0..y.len() {
        y[i] += gamma * (y[i] + 2.0 * scratch[i]) + noise * z[i];
    }
}

/// Runs one path over `grid`, calling `observe(k, y)` at every grid point.
pub(crate) fn em_path<F, R, O>(
    family: &F,
    horizon_t: f64,
    grid: &TimeGrid,
    theta: &[f64],
    y: &mut [f64],
    rng: &mut R,
    mut observe: O,
) -> bool
where
    F: ScoreFamily + ?Sized,
    R: rand::Rng + ?Sized,
    O: FnMut(usize, &[f64]),
{
    let d = y.len();
    let mut z = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    observe(0, y);
    for k in 0..grid.n_steps() {
        rng::fill_standard_normal(rng, &mut z);
        let ts = (horizon_t - grid.t(k)).max(0.0);
        em_step(family, ts, grid.gamma(), theta, y, &z, &mut scratch);
        observe(k + 1, y);
    }
    y.iter().all(|v| v.is_finite())
}

/// Terminal samples of the Euler-Maruyama chain. Path `i` uses the stream
/// `(seed, "em", i)` for its initial draw and all increments.
pub fn em_backward_run<F: ScoreFamily + ?Sized>(config: &EmRunConfig, family: &F) -> Result<EmSamples> {
    let d = config.d();
    check_dim(family.dim(), d)?;
    check_dim(family.n_params(), config.theta_hat.len())?;
    let t_end = config.schedule.horizon();
    let mut data = vec![0.0; config.n_paths * d];
    let ok: Vec<bool> = data
        .par_chunks_mut(d)
        .enumerate()
        .map(|(i, y)| {
            let mut r = rng::stream(config.seed, "em", i as u64);
            rng::fill_standard_normal(&mut r, y);
            em_path(family, t_end, &config.grid, &config.theta_hat, y, &mut r, |_, _| {})
        })
        .collect();
    let n_diverged = ok.iter().filter(|o| !**o).count();
    if n_diverged > 0 {
        data = data
            .chunks_exact(d)
            .zip(&ok)
            .filter(|(_, o)| **o)
            .flat_map(|(r, _)| r.iter().copied())
            .collect();
    }
    Ok(EmSamples { d, data, n_diverged })
}

/// Mean vector and isotropic variance of a Gaussian law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSdeMoments {
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl LinearSdeMoments {
    /// `E|Y|^2 = |mean|^2 + d variance`.
    pub fn second_moment(&self) -> f64 {
        self.mean.iter().map(|m| m * m).sum::<f64>() + self.mean.len() as f64 * self.variance
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::identity(self.mean.len(), self.mean.len()) * self.variance
    }
}

fn backward_moments(t: f64, schedule: &OuSchedule, target: &[f64]) -> Result<LinearSdeMoments> {
    let big_t = schedule.horizon();
    if !(0.0..=big_t).contains(&t) {
        return Err(Error::TimeOutOfRange { t, lo: 0.0, hi: big_t });
    }
    let c = (t - big_t).exp() - (-t - big_t).exp();
    Ok(LinearSdeMoments { mean: target.iter().map(|m| c * m).collect(), variance: 1.0 })
}

/// Law of the ideal backward process started from `N(0, I)`:
/// mean `mu (e^{t-T} - e^{-t-T})`, variance 1.
pub fn ideal_backward_moments(t: f64, schedule: &OuSchedule, problem: &GaussianProblem) -> Result<LinearSdeMoments> {
    backward_moments(t, schedule, problem.mu())
}

/// Law of the auxiliary process, which replaces the true score by `s(., theta_hat, .)`.
pub fn auxiliary_moments(t: f64, schedule: &OuSchedule, theta_hat: &[f64]) -> Result<LinearSdeMoments> {
    backward_moments(t, schedule, theta_hat)
}

/// Exact law of the affine-family Euler-Maruyama chain at every grid point:
/// `mean_{k+1} = (1 - gamma) mean_k + 2 gamma m_{T - t_k} theta_hat`,
/// `var_{k+1} = (1 - gamma)^2 var_k + 2 gamma`.
pub fn em_exact_moments(config: &EmRunConfig) -> Vec<LinearSdeMoments> {
    let g = config.grid.gamma();
    let big_t = config.schedule.horizon();
    let mut mean = vec![0.0; config.d()];
    let mut var = 1.0;
    let mut out = Vec::with_capacity(config.grid.n_steps() + 1);
    out.push(LinearSdeMoments { mean: mean.clone(), variance: var });
    for k in 0..config.grid.n_steps() {
        let m = (-(big_t - config.grid.t(k)).max(0.0)).exp();
        for (mi, th) in mean.iter_mut().zip(&config.theta_hat) {
            *mi = (1.0 - g) * *mi + 2.0 * g * m * th;
        }
        var = (1.0 - g) * (1.0 - g) * var + 2.0 * g;
        out.push(LinearSdeMoments { mean: mean.clone(), variance: var });
    }
    out
}

/// Fine-step simulation of the auxiliary process up to time `until`, with
/// step at most `gamma_fine`.
pub fn simulate_auxiliary<F: ScoreFamily + ?Sized>(
    schedule: &OuSchedule,
    family: &F,
    theta_hat: &[f64],
    gamma_fine: f64,
    until: f64,
    n_paths: usize,
    seed: u64,
) -> Result<EmSamples> {
    let grid = TimeGrid::covering(gamma_fine, until)?;
    if until > schedule.horizon() * (1.0 + 1e-12) {
        return Err(Error::TimeOutOfRange { t: until, lo: 0.0, hi: schedule.horizon() });
    }
    let d = theta_hat.len();
    check_dim(family.dim(), d)?;
    let mut data = vec![0.0; n_paths * d];
    data.par_chunks_mut(d).enumerate().for_each(|(i, y)| {
        let mut r = rng::stream(seed, "aux", i as u64);
        rng::fill_standard_normal(&mut r, y);
        em_path(family, schedule.horizon(), &grid, theta_hat, y, &mut r, |_, _| {});
    });
    EmSamples::from_rows(d, data)
}

/// `(e^{-2 epsilon} - e^{-2T})` times the sample mean of `|theta_hat - mu|^2`.
pub fn estimate_epsilon_sn(schedule: &OuSchedule, problem: &GaussianProblem, theta_hat_samples: &[Vec<f64>]) -> Result<McEstimate> {
    if theta_hat_samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let factor = (-2.0 * schedule.epsilon()).exp() - (-2.0 * schedule.horizon()).exp();
    let errs: Vec<f64> = theta_hat_samples
        .iter()
        .map(|th| {
            check_dim(problem.d(), th.len())?;
            Ok(factor * dist_sq(th, problem.mu()))
        })
        .collect::<Result<_>>()?;
    let mut est = McEstimate::from_samples(&errs, 0);
    if errs.len() == 1 {
        est.half_width = 0.0;
    }
    Ok(est)
}

/// Left-point Riemann estimate of
/// `int_0^{T - eps} E|grad log p_{T-r}(Y_r) - s(T - r, theta_hat, Y_r)|^2 dr`
/// along fine-step auxiliary paths.
pub fn epsilon_sn_path_integral<F: ScoreFamily + ?Sized>(
    schedule: &OuSchedule,
    problem: &GaussianProblem,
    family: &F,
    theta_hat: &[f64],
    gamma_fine: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let d = problem.d();
    check_dim(d, theta_hat.len())?;
    check_dim(family.dim(), d)?;
    let grid = TimeGrid::covering(gamma_fine, schedule.span())?;
    let big_t = schedule.horizon();
    let per_path: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, "aux-integral", i as u64);
            let mut y = rng::standard_normal_vec(&mut r, d);
            let mut s_model = vec![0.0; d];
            let mut s_true = vec![0.0; d];
            let mut acc = 0.0;
            em_path(family, big_t, &grid, theta_hat, &mut y, &mut r, |k, y| {
                if k < grid.n_steps() {
                    let ts = big_t - grid.t(k);
                    family.score_into(ts, theta_hat, y, &mut s_model);
                    family.score_into(ts, problem.mu(), y, &mut s_true);
                    acc += grid.gamma() * dist_sq(&s_true, &s_model);
                }
            });
            acc
        })
        .collect();
    Ok(McEstimate::from_samples(&per_path, seed))
}
