//! Monte Carlo checks of the moment lemmas, the exact identities and the
//! end-to-end bounds.
//!
//! An inequality `E[X] <= c` passes when the upper 95% confidence limit of
//! the estimate lies at or below `c`, fails when the lower limit lies above
//! it, and is inconclusive otherwise. Identities compare a worst-case
//! discrepancy against a tolerance. Checks that hold along a curve (a sup
//! over time, or one constant per time) report the point closest to
//! violation.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bounds::{c_em_p, c_emose_p, theorem1_bound, theorem2_bound, Theorem1Params, Theorem2Params};
use crate::error::{check_dim, Error, Result};
use crate::ext::ExtFloat;
use crate::gaussian::{affine_constants, dist_sq, norm_sq, GaussianProblem};
use crate::metrics::w2_gaussian_fit;
use crate::ou::{self, OuSchedule, TimeGrid};
use crate::rng;
use crate::sampler::{em_backward_run, EmRunConfig, Horizon};
use crate::score::{AffineFamily, ScoreFamily};
use crate::score_matching::{
    explicit_vs_denoising_check, exp_error_bound, sgld_error_bound, sgld_replicas, sgld_second_moment_bound,
    stochastic_gradient_gaussian, SgldConfig, SgldRun, TrainingSample,
};
use crate::stats::{McEstimate, Verdict};

/// Relative tolerance of the exact identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative slack granted to finite-difference gradients.
pub const FD_TOL: f64 = 1e-6;
/// Number of evaluation times used to approximate a sup over time.
pub const SUP_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LemmaId {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    C1,
    C2,
    C3cor,
    C4,
    AIdentity,
    T1,
    T2,
}

impl LemmaId {
    pub const ALL: [LemmaId; 14] = [
        LemmaId::B1,
        LemmaId::B2,
        LemmaId::B3,
        LemmaId::B4,
        LemmaId::B5,
        LemmaId::B6,
        LemmaId::B7,
        LemmaId::C1,
        LemmaId::C2,
        LemmaId::C3cor,
        LemmaId::C4,
        LemmaId::AIdentity,
        LemmaId::T1,
        LemmaId::T2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::B1 => "B1",
            LemmaId::B2 => "B2",
            LemmaId::B3 => "B3",
            LemmaId::B4 => "B4",
            LemmaId::B5 => "B5",
            LemmaId::B6 => "B6",
            LemmaId::B7 => "B7",
            LemmaId::C1 => "C1",
            LemmaId::C2 => "C2",
            LemmaId::C3cor => "C3cor",
            LemmaId::C4 => "C4",
            LemmaId::AIdentity => "A-identity",
            LemmaId::T1 => "T1",
            LemmaId::T2 => "T2",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        let id = match key.as_str() {
            "a" | "aidentity" => LemmaId::AIdentity,
            "c3" | "c3cor" => LemmaId::C3cor,
            other => match LemmaId::ALL.iter().find(|id| id.as_str().to_ascii_lowercase() == other) {
                Some(id) => *id,
                None => {
                    let names: Vec<&str> = LemmaId::ALL.iter().map(|id| id.as_str()).collect();
                    return Err(Error::InvalidArgument(format!(
                        "unknown check '{s}'; expected one of {}",
                        names.join(", ")
                    )));
                }
            },
        };
        Ok(id)
    }
}

impl Serialize for LemmaId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LemmaId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lhs {
    Exact(f64),
    Estimate(McEstimate),
}

impl Lhs {
    pub fn value(&self) -> f64 {
        match self {
            Lhs::Exact(v) => *v,
            Lhs::Estimate(e) => e.mean,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Lhs::Exact(v) => *v,
            Lhs::Estimate(e) => e.upper(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma_id: LemmaId,
    /// Distinguishes repeated checks of one lemma, e.g. `gamma=0.1`.
    pub label: String,
    /// Time or iteration count of the reported point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    pub lhs: Lhs,
    pub rhs: ExtFloat,
    pub verdict: Verdict,
}

/// Verdict of `E[X] <= rhs` from a confidence interval.
pub fn inequality_verdict(lhs: &McEstimate, rhs: ExtFloat) -> Verdict {
    let upper = lhs.upper();
    let lower = lhs.lower();
    if lhs.mean.is_nan() {
        return Verdict::Inconclusive;
    }
    if upper.is_finite() && ExtFloat::from(upper) <= rhs {
        Verdict::Pass
    } else if lower.is_finite() && ExtFloat::from(lower) > rhs {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Fail beats inconclusive beats pass.
pub fn combine<I: IntoIterator<Item = Verdict>>(verdicts: I) -> Verdict {
    let mut out = Verdict::Pass;
    for v in verdicts {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Pass => {}
        }
    }
    out
}

struct Point {
    at: f64,
    est: McEstimate,
    rhs: ExtFloat,
}

/// `ln(upper / rhs)`, larger is closer to violation.
fn tightness(p: &Point) -> f64 {
    let u = p.est.upper();
    if !(u > 0.0) {
        return f64::NEG_INFINITY;
    }
    if p.rhs.is_zero() || p.rhs.is_sign_negative() {
        return f64::INFINITY;
    }
    u.ln() - p.rhs.ln()
}

fn aggregate(id: LemmaId, label: String, points: &[Point]) -> Result<LemmaCheck> {
    let worst = points
        .iter()
        .max_by(|a, b| tightness(a).total_cmp(&tightness(b)))
        .ok_or(Error::EmptySample)?;
    Ok(LemmaCheck {
        lemma_id: id,
        label,
        at: Some(worst.at),
        lhs: Lhs::Estimate(worst.est),
        rhs: worst.rhs,
        verdict: combine(points.iter().map(|p| inequality_verdict(&p.est, p.rhs))),
    })
}

fn estimates(per_time: &[Vec<f64>], seed: u64) -> Vec<McEstimate> {
    per_time.iter().map(|v| McEstimate::from_samples(v, seed)).collect()
}

#[inline]
fn norm_pow(sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        sq
    } else if p == 4.0 {
        sq * sq
    } else {
        sq.powf(0.5 * p)
    }
}

/// Lipschitz and monotonicity identities of the Gaussian stochastic gradient
/// on `n_trials` random `(tau, theta, theta_bar, x0, z)`; some trials use
/// `tau = 0` or `theta = theta_bar`. The left side is the largest relative
/// discrepancy, the right side [`IDENTITY_TOL`].
pub fn check_prop_b1(d: usize, n_trials: usize, seed: u64) -> Result<LemmaCheck> {
    if d == 0 || n_trials == 0 {
        return Err(Error::InvalidArgument("B1 needs d >= 1 and at least one trial".into()));
    }
    let problem = GaussianProblem::new(vec![0.0; d])?;
    const BLOCK: usize = 4096;
    let n_blocks = n_trials.div_ceil(BLOCK);
    let worst: Vec<f64> = (0..n_blocks)
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let mut r = rng::stream(seed, "b1", b as u64);
            let mut worst = 0.0f64;
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_trials) {
                let tau = if i % 16 == 0 { 0.0 } else { 5.0 * r.gen::<f64>() };
                let theta: Vec<f64> = (0..d).map(|_| 3.0 * rng::standard_normal(&mut r)).collect();
                let theta_bar: Vec<f64> = if i % 13 == 0 {
                    theta.clone()
                } else {
                    (0..d).map(|_| 3.0 * rng::standard_normal(&mut r)).collect()
                };
                let sample = TrainingSample {
                    tau,
                    x0: rng::standard_normal_vec(&mut r, d),
                    z: rng::standard_normal_vec(&mut r, d),
                };
                let h = stochastic_gradient_gaussian(&theta, &sample, &problem)?;
                let hb = stochastic_gradient_gaussian(&theta_bar, &sample, &problem)?;
                let (m, s) = ou::coeffs(tau);
                let k = 2.0 * s * s * m * m;
                let diff: Vec<f64> = h.iter().zip(&hb).map(|(a, b)| a - b).collect();
                let dtheta: Vec<f64> = theta.iter().zip(&theta_bar).map(|(a, b)| a - b).collect();
                let dn = norm_sq(&dtheta).sqrt();
                let hn = norm_sq(&h).sqrt().max(norm_sq(&hb).sqrt());

                let lip = norm_sq(&diff).sqrt();
                let lip_rhs = k * dn;
                let scale = hn.max(lip_rhs);
                if scale > 0.0 {
                    worst = worst.max((lip - lip_rhs).abs() / scale);
                }
                let mono: f64 = diff.iter().zip(&dtheta).map(|(a, b)| a * b).sum();
                let mono_rhs = k * dn * dn;
                let scale = (hn * dn).max(mono_rhs);
                if scale > 0.0 {
                    worst = worst.max((mono - mono_rhs).abs() / scale);
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let worst = worst.into_iter().fold(0.0f64, f64::max);
    Ok(LemmaCheck {
        lemma_id: LemmaId::B1,
        label: format!("d={d}, trials={n_trials}"),
        at: None,
        lhs: Lhs::Exact(worst),
        rhs: ExtFloat::from(IDENTITY_TOL),
        verdict: Verdict::from_bool(worst <= IDENTITY_TOL),
    })
}

/// Gaussian-example setup shared by the optimizer, sampler and theorem checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCheckConfig {
    pub mu: Vec<f64>,
    pub horizon: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub beta: f64,
    pub n_iters: u64,
    pub theta0: Vec<f64>,
    /// Iterations at which the optimizer lemmas are checked.
    pub checkpoints: Vec<u64>,
    /// Independent optimizer replicas; each is one Monte Carlo unit.
    pub n_replicas: usize,
    /// Sampler paths per replica.
    pub paths_per_replica: usize,
    pub zeta: f64,
    pub nu: f64,
    pub seed: u64,
    /// Skips the optimizer and uses this parameter in every replica.
    #[serde(default)]
    pub fixed_theta_hat: Option<Vec<f64>>,
}

impl GaussianCheckConfig {
    /// `d`-dimensional example with `mu = (1, ..., 1)`, `T = 1` and a short
    /// optimizer run.
    pub fn example(d: usize, seed: u64) -> Self {
        GaussianCheckConfig {
            mu: vec![1.0; d],
            horizon: 1.0,
            epsilon: 0.0,
            lambda: 0.05,
            beta: 1e4,
            n_iters: 500,
            theta0: vec![0.0; d],
            checkpoints: vec![10, 50, 100, 500],
            n_replicas: 200,
            paths_per_replica: 64,
            zeta: 0.5,
            nu: 0.5,
            seed,
            fixed_theta_hat: None,
        }
    }
}

/// Optimizer output for a [`GaussianCheckConfig`], computed once and shared by
/// the checks.
#[derive(Debug, Clone)]
pub struct GaussianExperiment {
    pub config: GaussianCheckConfig,
    problem: GaussianProblem,
    schedule: OuSchedule,
    sgld: SgldConfig,
    runs: Vec<SgldRun>,
    theta_hats: Vec<Vec<f64>>,
}

impl GaussianExperiment {
    pub fn new(config: GaussianCheckConfig) -> Result<Self> {
        if config.n_replicas < 2 {
            return Err(Error::InvalidArgument("at least two replicas are needed for a confidence interval".into()));
        }
        if config.paths_per_replica == 0 {
            return Err(Error::InvalidArgument("paths_per_replica must be positive".into()));
        }
        let problem = GaussianProblem::new(config.mu.clone())?;
        let schedule = OuSchedule::new(config.horizon, config.epsilon)?;
        let mut cps = config.checkpoints.clone();
        cps.retain(|&n| n <= config.n_iters);
        let sgld = SgldConfig::new(
            schedule,
            problem.clone(),
            config.lambda,
            config.beta,
            config.n_iters,
            config.theta0.clone(),
        )?
        .with_checkpoints(cps);
        let (runs, theta_hats) = match &config.fixed_theta_hat {
            Some(th) => {
                check_dim(problem.d(), th.len())?;
                (Vec::new(), vec![th.clone(); config.n_replicas])
            }
            None => {
                let runs = sgld_replicas(&sgld, config.seed, config.n_replicas)?;
                let th = runs.iter().map(|r| r.theta.clone()).collect();
                (runs, th)
            }
        };
        Ok(GaussianExperiment { config, problem, schedule, sgld, runs, theta_hats })
    }

    pub fn problem(&self) -> &GaussianProblem {
        &self.problem
    }

    pub fn schedule(&self) -> &OuSchedule {
        &self.schedule
    }

    pub fn sgld_config(&self) -> &SgldConfig {
        &self.sgld
    }

    pub fn runs(&self) -> &[SgldRun] {
        &self.runs
    }

    pub fn theta_hats(&self) -> &[Vec<f64>] {
        &self.theta_hats
    }

    pub fn e0(&self) -> f64 {
        self.sgld.e0()
    }

    /// `e^{-2 n lambda E} e0 + d C1 / beta + lambda C2`.
    pub fn q(&self) -> f64 {
        let c = &self.sgld;
        exp_error_bound(c.lambda, c.beta, self.problem.d(), c.moments().e_s2m2, c.constants(), c.n_iters, self.e0())
    }

    fn q_plus(&self) -> f64 {
        self.q() + self.problem.theta_star_norm_sq()
    }

    pub fn c_aux(&self) -> f64 {
        8.0 / 3.0 * self.q_plus() + 2.0 * self.problem.d() as f64
    }

    pub fn c_em(&self) -> f64 {
        3.0 * self.problem.d() as f64 + 20.0 * self.q_plus()
    }

    pub fn c_emose(&self) -> f64 {
        8.0 * self.problem.d() as f64 + 56.0 * self.q_plus()
    }

    pub fn c_em_hat(&self) -> f64 {
        18.0 * self.problem.d() as f64 + 128.0 * self.q_plus()
    }
}

/// Optimizer lemmas at every checkpoint: `B2` compares `E|theta_n - theta*|^2`
/// and `B3` compares `E|theta_n|^2` with their bounds.
pub fn check_sgld(id: LemmaId, exp: &GaussianExperiment) -> Result<Vec<LemmaCheck>> {
    if exp.runs.is_empty() {
        return Err(Error::InvalidArgument(format!("{id} needs optimizer runs, not a fixed parameter")));
    }
    let cfg = &exp.sgld;
    let e0 = exp.e0();
    let mu = exp.problem.theta_star();
    let mut out = Vec::new();
    for (c, &n) in cfg.checkpoints.iter().enumerate() {
        let vals: Vec<f64> = match id {
            LemmaId::B2 => exp.runs.iter().map(|r| dist_sq(&r.checkpoints[c].theta, mu)).collect(),
            LemmaId::B3 => exp.runs.iter().map(|r| norm_sq(&r.checkpoints[c].theta)).collect(),
            _ => return Err(Error::InvalidArgument(format!("{id} is not an optimizer lemma"))),
        };
        let rhs = match id {
            LemmaId::B2 => sgld_error_bound(cfg, n, e0),
            _ => sgld_second_moment_bound(cfg, n, e0),
        };
        let est = McEstimate::from_samples(&vals, exp.config.seed);
        let rhs = ExtFloat::from(rhs);
        out.push(LemmaCheck {
            lemma_id: id,
            label: format!("n={n}"),
            at: Some(n as f64),
            lhs: Lhs::Estimate(est),
            rhs,
            verdict: inequality_verdict(&est, rhs),
        });
    }
    Ok(out)
}

/// Per-time, per-unit averages of `|Y_hat_t|^p` and of the interpolation gap
/// `|Y_hat_t - Y_hat_{floor(t / gamma) gamma}|^p`.
struct Curves {
    times: Vec<f64>,
    on_grid: Vec<bool>,
    level: Vec<Vec<f64>>,
    gap: Vec<Vec<f64>>,
}

/// Simulates the continuous-time interpolation of the Euler-Maruyama chain,
/// `Y_hat_{t_k + s} = Y_k + s b_k + sqrt(2) (W_{t_k + s} - W_{t_k})` with
/// `b_k = Y_k + 2 s(T - t_k, theta, Y_k)`, at `sub` offsets inside every step.
/// Intermediate Brownian values are bridge draws conditioned on the step
/// increment, so the grid-point chain is exactly the scheme.
#[allow(clippy::too_many_arguments)]
fn interpolation_curves<F: ScoreFamily + ?Sized>(
    family: &F,
    horizon_t: f64,
    grid: &TimeGrid,
    thetas: &[Vec<f64>],
    paths: usize,
    sub: usize,
    p: f64,
    seed: u64,
    tag: &str,
) -> Curves {
    let d = family.dim();
    let g = grid.gamma();
    let n_times = 1 + grid.n_steps() * sub;
    let mut times = Vec::with_capacity(n_times);
    let mut on_grid = Vec::with_capacity(n_times);
    times.push(0.0);
    on_grid.push(true);
    for k in 0..grid.n_steps() {
        for j in 1..=sub {
            times.push(grid.t(k) + g * j as f64 / sub as f64);
            on_grid.push(j == sub);
        }
    }
    let per_unit: Vec<(Vec<f64>, Vec<f64>)> = thetas
        .par_iter()
        .enumerate()
        .map(|(u, theta)| {
            let mut r = rng::stream(seed, tag, u as u64);
            let mut level = vec![0.0; n_times];
            let mut gap_acc = vec![0.0; n_times];
            let mut y = vec![0.0; d];
            let mut b = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut gap = vec![0.0; d];
            for _ in 0..paths {
                rng::fill_standard_normal(&mut r, &mut y);
                level[0] += norm_pow(norm_sq(&y), p);
                for k in 0..grid.n_steps() {
                    let ts = (horizon_t - grid.t(k)).max(0.0);
                    family.score_into(ts, theta, &y, &mut b);
                    for i in 0..d {
                        b[i] = y[i] + 2.0 * b[i];
                    }
                    rng::fill_standard_normal(&mut r, &mut z);
                    for j in 1..=sub {
                        let s = g * j as f64 / sub as f64;
                        let (wz, wn) = (s / g.sqrt(), (s * (g - s) / g).max(0.0).sqrt());
                        let mut gsq = 0.0;
                        let mut ysq = 0.0;
                        for i in 0..d {
                            let w = if j == sub { g.sqrt() * z[i] } else { wz * z[i] + wn * rng::standard_normal(&mut r) };
                            gap[i] = s * b[i] + std::f64::consts::SQRT_2 * w;
                            gsq += gap[i] * gap[i];
                            let yh = y[i] + gap[i];
                            ysq += yh * yh;
                        }
                        let idx = 1 + k * sub + (j - 1);
                        level[idx] += norm_pow(ysq, p);
                        gap_acc[idx] += norm_pow(gsq, p);
                    }
                    for i in 0..d {
                        y[i] += gap[i];
                    }
                }
            }
            let inv = 1.0 / paths as f64;
            level.iter_mut().chain(gap_acc.iter_mut()).for_each(|v| *v *= inv);
            (level, gap_acc)
        })
        .collect();
    let mut level = vec![Vec::with_capacity(thetas.len()); n_times];
    let mut gap = vec![Vec::with_capacity(thetas.len()); n_times];
    for (l, gp) in per_unit {
        for t in 0..n_times {
            level[t].push(l[t]);
            gap[t].push(gp[t]);
        }
    }
    Curves { times, on_grid, level, gap }
}

fn sub_steps(grid: &TimeGrid) -> usize {
    SUP_GRID.div_ceil(grid.n_steps()).max(1)
}

/// Per-time, per-unit averages of `|Y_t|^2` for the auxiliary process of the
/// affine family, simulated with exact Gaussian transitions.
fn auxiliary_curves(horizon: f64, times: &[f64], thetas: &[Vec<f64>], paths: usize, seed: u64) -> Vec<Vec<f64>> {
    let per_unit: Vec<Vec<f64>> = thetas
        .par_iter()
        .enumerate()
        .map(|(u, theta)| {
            let d = theta.len();
            let mut r = rng::stream(seed, "b4-aux", u as u64);
            let mut acc = vec![0.0; times.len()];
            let mut y = vec![0.0; d];
            for _ in 0..paths {
                rng::fill_standard_normal(&mut r, &mut y);
                acc[0] += norm_sq(&y);
                for w in 1..times.len() {
                    let (t0, t1) = (times[w - 1], times[w]);
                    let h = t1 - t0;
                    let decay = (-h).exp();
                    let drift = (-t1 - horizon).exp() * ((2.0 * t1).exp() - (2.0 * t0).exp());
                    let sd = (-(-2.0 * h).exp_m1()).sqrt();
                    for i in 0..d {
                        y[i] = decay * y[i] + drift * theta[i] + sd * rng::standard_normal(&mut r);
                    }
                    acc[w] += norm_sq(&y);
                }
            }
            acc.iter_mut().for_each(|v| *v /= paths as f64);
            acc
        })
        .collect();
    (0..times.len()).map(|w| per_unit.iter().map(|u| u[w]).collect()).collect()
}

/// Uniform times on `[0, span]` merged with the grid points.
fn sup_times(grid: &TimeGrid, span: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=SUP_GRID).map(|i| span * i as f64 / SUP_GRID as f64).collect();
    t.extend((0..=grid.n_steps()).map(|k| grid.t(k)));
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
    t
}

/// Sampler moment lemmas of the Gaussian example at step size `gamma`:
/// `B4` (auxiliary process), `B5` (chain), `B6` (one-step gap, scaled by
/// `gamma`) and `B7` (interpolated chain), each as a sup over `[0, T]`.
pub fn check_moment_lemma(id: LemmaId, exp: &GaussianExperiment, gamma: f64) -> Result<LemmaCheck> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1/2], got {gamma}")));
    }
    let big_t = exp.config.horizon;
    let grid = TimeGrid::new(gamma, big_t)?;
    let seed = rng::derive_seed(exp.config.seed, id.as_str(), gamma.to_bits());
    let label = format!("gamma={gamma}");
    let paths = exp.config.paths_per_replica;
    let points: Vec<Point> = match id {
        LemmaId::B4 => {
            let times = sup_times(&grid, big_t);
            let curves = auxiliary_curves(big_t, &times, &exp.theta_hats, paths, seed);
            let rhs = ExtFloat::from(exp.c_aux());
            times
                .iter()
                .zip(estimates(&curves, seed))
                .map(|(&at, est)| Point { at, est, rhs })
                .collect()
        }
        LemmaId::B5 | LemmaId::B6 | LemmaId::B7 => {
            let fam = AffineFamily::new(exp.problem.d());
            let curves = interpolation_curves(&fam, big_t, &grid, &exp.theta_hats, paths, sub_steps(&grid), 2.0, seed, id.as_str());
            let (values, rhs) = match id {
                LemmaId::B5 => (&curves.level, exp.c_em()),
                LemmaId::B6 => (&curves.gap, gamma * exp.c_emose()),
                _ => (&curves.level, exp.c_em_hat()),
            };
            let rhs = ExtFloat::from(rhs);
            let ests = estimates(values, seed);
            curves
                .times
                .iter()
                .enumerate()
                .filter(|(i, _)| match id {
                    LemmaId::B5 => curves.on_grid[*i],
                    LemmaId::B6 => *i > 0,
                    _ => true,
                })
                .map(|(i, &at)| Point { at, est: ests[i], rhs })
                .collect()
        }
        _ => return Err(Error::InvalidArgument(format!("{id} is not a sampler moment lemma"))),
    };
    aggregate(id, label, &points)
}

/// Setup of the general-family checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheckConfig {
    pub params: Theorem2Params,
    /// Parameter plugged into the family; `params` must bound its moments.
    pub theta_hat: Vec<f64>,
    pub n_units: usize,
    pub paths_per_unit: usize,
    /// Random points for the gradient and remainder checks.
    pub n_trials: usize,
    pub seed: u64,
}

/// Bound parameters for the affine family with a fixed `theta_hat` on
/// `N(mu, I)` data: `eps_al = |theta_hat - mu|^2` and `E|theta_hat|^4 = |theta_hat|^4`.
pub fn affine_theorem2_params(
    problem: &GaussianProblem,
    schedule: &OuSchedule,
    theta_hat: &[f64],
    zeta: f64,
    nu: f64,
    gamma: f64,
) -> Result<Theorem2Params> {
    check_dim(problem.d(), theta_hat.len())?;
    let eps_al = dist_sq(theta_hat, problem.theta_star());
    let n4 = norm_sq(theta_hat).powi(2);
    gaussian_theorem2_params(problem, schedule, eps_al, n4, zeta, nu, gamma)
}

/// Bound parameters for the affine family on `N(mu, I)` data given the
/// optimizer accuracy and fourth moment. The score error along the auxiliary
/// process is `eps_al (e^{-2 epsilon} - e^{-2T})`.
pub fn gaussian_theorem2_params(
    problem: &GaussianProblem,
    schedule: &OuSchedule,
    eps_al: f64,
    e_theta4: f64,
    zeta: f64,
    nu: f64,
    gamma: f64,
) -> Result<Theorem2Params> {
    let k = affine_constants(problem);
    let factor = (-2.0 * schedule.epsilon()).exp() - (-2.0 * schedule.horizon()).exp();
    let p = Theorem2Params {
        m: problem.d(),
        horizon: schedule.horizon(),
        epsilon: schedule.epsilon(),
        alpha: k.alpha,
        zeta,
        nu,
        l_mo: k.l_mo,
        k1: k.k1,
        k2: k.k2,
        k3: k.k3,
        k4: k.k4,
        k_total: k.k_total,
        eps_al,
        eps_sn: factor * eps_al,
        theta_star_norm_sq: problem.theta_star_norm_sq(),
        ex0sq: problem.ex0sq(),
        e_theta4,
        gamma,
    };
    p.validate()?;
    Ok(p)
}

fn fd_gradient_row<F: ScoreFamily + ?Sized>(family: &F, t: f64, theta: &[f64], x: &[f64], k: usize) -> f64 {
    let d = family.dim();
    let mut xp = x.to_vec();
    let mut sp = vec![0.0; d];
    let mut sm = vec![0.0; d];
    let mut sq = 0.0;
    for j in 0..d {
        let h = 1e-5 * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        family.score_into(t, theta, &xp, &mut sp);
        xp[j] = x[j] - h;
        family.score_into(t, theta, &xp, &mut sm);
        xp[j] = x[j];
        let g = (sp[k] - sm[k]) / (2.0 * h);
        sq += g * g;
    }
    sq.sqrt()
}

/// General-family checks: `C1` (`p`-th moment of the interpolated chain
/// against `C_EM,p(t)` at every `t`), `C2` (gap against
/// `gamma^{p/2} C_EMose,p`), `C3cor` (finite-difference `x`-gradients against
/// `K3 (1 + 2 t^alpha)`) and `C4` (first-order Taylor remainder against
/// `K4 (1 + 2 t^alpha) |x - x_bar|^2`, after subtracting a roundoff allowance).
pub fn check_family_lemma<F: ScoreFamily + ?Sized>(id: LemmaId, p: f64, cfg: &FamilyCheckConfig, family: &F) -> Result<LemmaCheck> {
    let params = &cfg.params;
    params.validate()?;
    let d = family.dim();
    check_dim(params.m, d)?;
    check_dim(family.n_params(), cfg.theta_hat.len())?;
    let seed = rng::derive_seed(cfg.seed, id.as_str(), p.to_bits());
    match id {
        LemmaId::C1 | LemmaId::C2 => {
            if cfg.n_units < 2 || cfg.paths_per_unit == 0 {
                return Err(Error::InvalidArgument("need at least two units with one path each".into()));
            }
            if !(params.gamma > 0.0) {
                return Err(Error::InvalidArgument("gamma must be positive".into()));
            }
            let grid = TimeGrid::covering(params.gamma, params.span())?;
            let thetas = vec![cfg.theta_hat.clone(); cfg.n_units];
            let curves = interpolation_curves(family, params.horizon, &grid, &thetas, cfg.paths_per_unit, sub_steps(&grid), p, seed, id.as_str());
            let label = format!("p={p}");
            if id == LemmaId::C1 {
                let ests = estimates(&curves.level, seed);
                let mut running = ests[0];
                let mut points = Vec::with_capacity(ests.len() - 1);
                for (i, est) in ests.iter().enumerate().skip(1) {
                    if est.upper() > running.upper() {
                        running = *est;
                    }
                    let t = curves.times[i].min(params.span());
                    points.push(Point { at: t, est: running, rhs: c_em_p(t, p, params)? });
                }
                aggregate(id, label, &points)
            } else {
                let rhs = c_emose_p(p, params)? * grid.gamma().powf(0.5 * p);
                let ests = estimates(&curves.gap, seed);
                let points: Vec<Point> = (1..ests.len()).map(|i| Point { at: curves.times[i], est: ests[i], rhs }).collect();
                aggregate(id, label, &points)
            }
        }
        LemmaId::C3cor | LemmaId::C4 => {
            if cfg.n_trials == 0 {
                return Err(Error::InvalidArgument("need at least one trial".into()));
            }
            let mut r = rng::stream(seed, "trials", 0);
            let np = family.n_params();
            let mut worst = 0.0f64;
            let mut s_x = vec![0.0; d];
            let mut s_xb = vec![0.0; d];
            for _ in 0..cfg.n_trials {
                let t = params.horizon * r.gen::<f64>();
                let theta: Vec<f64> = (0..np).map(|_| 2.0 * rng::standard_normal(&mut r)).collect();
                let x: Vec<f64> = (0..d).map(|_| 2.0 * rng::standard_normal(&mut r)).collect();
                let growth = 1.0 + 2.0 * t.powf(params.alpha);
                if id == LemmaId::C3cor {
                    for k in 0..d {
                        worst = worst.max(fd_gradient_row(family, t, &theta, &x, k) / growth);
                    }
                } else {
                    let scale = 10f64.powf(-3.0 + 4.0 * r.gen::<f64>());
                    let dx: Vec<f64> = (0..d).map(|_| scale * rng::standard_normal(&mut r)).collect();
                    let xb: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
                    family.score_into(t, &theta, &x, &mut s_x);
                    family.score_into(t, &theta, &xb, &mut s_xb);
                    let jac = family.x_jacobian(t, &theta, &x);
                    let dn2 = norm_sq(&dx);
                    for k in 0..d {
                        let lin: f64 = (0..d).map(|j| jac[k * d + j] * dx[j]).sum();
                        let rem = (s_xb[k] - s_x[k] - lin).abs();
                        // Rounding in the scores and in forming `x_bar` itself.
                        let jx: f64 = (0..d).map(|j| jac[k * d + j].abs() * (x[j].abs() + xb[j].abs())).sum();
                        let allowance = 8.0 * f64::EPSILON * (s_xb[k].abs() + s_x[k].abs() + lin.abs() + jx);
                        worst = worst.max((rem - allowance).max(0.0) / (growth * dn2));
                    }
                }
            }
            let (rhs, slack) = if id == LemmaId::C3cor { (params.k3, 1.0 + FD_TOL) } else { (params.k4, 1.0) };
            Ok(LemmaCheck {
                lemma_id: id,
                label: format!("trials={}", cfg.n_trials),
                at: None,
                lhs: Lhs::Exact(worst),
                rhs: ExtFloat::from(rhs),
                verdict: Verdict::from_bool(worst <= rhs * slack),
            })
        }
        _ => Err(Error::InvalidArgument(format!("{id} is not a general-family lemma"))),
    }
}

/// Denoising objective minus exact objective is constant across
/// `{0, mu, 2 mu}` (`{0, 1, 2}` times the ones vector when `mu = 0`). The
/// reported pair is the one whose interval is least centred on zero.
pub fn check_a_identity(exp: &GaussianExperiment, mc_n: usize) -> Result<LemmaCheck> {
    let mu = exp.problem.mu();
    let base: Vec<f64> = if norm_sq(mu) > 0.0 { mu.to_vec() } else { vec![1.0; mu.len()] };
    let thetas = vec![vec![0.0; mu.len()], base.clone(), base.iter().map(|v| 2.0 * v).collect()];
    let seed = rng::derive_seed(exp.config.seed, "A-identity", 0);
    let rep = explicit_vs_denoising_check(&thetas, &exp.schedule, &exp.problem, mc_n, seed, 1.0)?;
    let worst = rep
        .pairs
        .iter()
        .max_by(|a, b| {
            let za = a.excess.mean.abs() / a.excess.half_width;
            let zb = b.excess.mean.abs() / b.excess.half_width;
            za.total_cmp(&zb)
        })
        .ok_or(Error::EmptySample)?;
    Ok(LemmaCheck {
        lemma_id: LemmaId::AIdentity,
        label: format!("pair=({}, {}), samples={mc_n}", worst.i, worst.j),
        at: None,
        lhs: Lhs::Estimate(worst.excess),
        rhs: ExtFloat::ZERO,
        verdict: rep.verdict,
    })
}

/// Empirical W2 of the sampler output against `N(mu, I)`. Each replica's
/// conditional law is Gaussian and measured by a Gaussian fit; the mixture
/// over replicas is bounded by `sqrt(mean_r W2_r^2)`, whose interval comes
/// from the replica spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalW2 {
    pub per_replica: Vec<f64>,
    pub squared: McEstimate,
    pub w2: McEstimate,
    pub n_diverged: usize,
}

pub fn empirical_w2(exp: &GaussianExperiment, grid: TimeGrid, horizon: Horizon, n_paths: usize, seed: u64) -> Result<EmpiricalW2> {
    let d = exp.problem.d();
    let fam = AffineFamily::new(d);
    let target_cov = DMatrix::identity(d, d);
    let runs: Vec<(f64, usize)> = exp
        .theta_hats
        .iter()
        .enumerate()
        .map(|(r, th)| {
            let cfg = EmRunConfig::with_grid(exp.schedule, grid, th.clone(), n_paths, rng::derive_seed(seed, "replica-em", r as u64), horizon)?;
            let samples = em_backward_run(&cfg, &fam)?;
            Ok((w2_gaussian_fit(&samples, exp.problem.mu(), &target_cov)?, samples.n_diverged))
        })
        .collect::<Result<_>>()?;
    let per_replica: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let sq: Vec<f64> = per_replica.iter().map(|w| w * w).collect();
    let squared = McEstimate::from_samples(&sq, seed);
    let mean = squared.mean.max(0.0).sqrt();
    let w2 = McEstimate {
        mean,
        n: squared.n,
        half_width: squared.upper().max(0.0).sqrt() - mean,
        seed,
    };
    Ok(EmpiricalW2 { per_replica, squared, w2, n_diverged: runs.iter().map(|r| r.1).sum() })
}

/// End-to-end comparison of the sampler's W2 with the bound: `T1` runs to
/// `T` and uses the Gaussian-example bound, `T2` stops at `T - epsilon` and
/// uses the general bound with the affine family's constants.
pub fn check_theorem(id: LemmaId, exp: &GaussianExperiment, gamma: f64, n_paths: usize) -> Result<LemmaCheck> {
    let cfg = &exp.config;
    let seed = rng::derive_seed(cfg.seed, id.as_str(), gamma.to_bits());
    let d = exp.problem.d();
    let (horizon, rhs) = match id {
        LemmaId::T1 => {
            if cfg.epsilon != 0.0 {
                return Err(Error::InvalidArgument("T1 needs epsilon = 0".into()));
            }
            let p = Theorem1Params::for_problem(&exp.problem, cfg.horizon, cfg.beta, cfg.lambda, cfg.n_iters, gamma, exp.e0())?;
            (Horizon::Full, theorem1_bound(&p)?.total())
        }
        LemmaId::T2 => {
            let (eps_al, e4) = if exp.runs.is_empty() {
                let th = &exp.theta_hats[0];
                (dist_sq(th, exp.problem.theta_star()), norm_sq(th).powi(2))
            } else {
                let n4: Vec<f64> = exp.theta_hats.iter().map(|t| norm_sq(t).powi(2)).collect();
                (sgld_error_bound(&exp.sgld, cfg.n_iters, exp.e0()), McEstimate::from_samples(&n4, seed).upper())
            };
            let p = gaussian_theorem2_params(&exp.problem, &exp.schedule, eps_al, e4, cfg.zeta, cfg.nu, gamma)?;
            (Horizon::EarlyStopped, theorem2_bound(&p)?.total())
        }
        _ => return Err(Error::InvalidArgument(format!("{id} is not a theorem"))),
    };
    let grid = TimeGrid::new(gamma, horizon.span(&exp.schedule))?;
    let w = empirical_w2(exp, grid, horizon, n_paths, seed)?;
    let verdict = if w.n_diverged > 0 { Verdict::Inconclusive } else { inequality_verdict(&w.w2, rhs) };
    Ok(LemmaCheck {
        lemma_id: id,
        label: format!("d={d}, gamma={gamma}"),
        at: None,
        lhs: Lhs::Estimate(w.w2),
        rhs,
        verdict,
    })
}

/// Everything `verify all` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub experiment: GaussianCheckConfig,
    /// Step sizes of the sampler moment lemmas.
    pub gammas: Vec<f64>,
    /// Moment orders of the general-family lemmas.
    pub powers: Vec<f64>,
    pub b1_dims: Vec<usize>,
    pub b1_trials: usize,
    pub denoise_samples: usize,
    /// Step size of the general-family and theorem checks.
    pub theorem_gamma: f64,
    pub theorem_paths: usize,
    pub c_trials: usize,
}

impl SuiteConfig {
    pub fn example(d: usize, seed: u64) -> Self {
        SuiteConfig {
            experiment: GaussianCheckConfig::example(d, seed),
            gammas: vec![0.5, 0.1, 0.02],
            powers: vec![2.0, 4.0],
            b1_dims: vec![1, 3, 10],
            b1_trials: 100_000,
            denoise_samples: 1_000_000,
            theorem_gamma: 0.01,
            theorem_paths: 2000,
            c_trials: 1000,
        }
    }
}

/// Runs the requested checks; checks are independent and run in parallel.
pub fn run_suite(ids: &[LemmaId], cfg: &SuiteConfig) -> Result<Vec<LemmaCheck>> {
    let needs_exp = ids.iter().any(|id| !matches!(id, LemmaId::B1));
    let exp = if needs_exp { Some(GaussianExperiment::new(cfg.experiment.clone())?) } else { None };
    let exp = exp.as_ref();
    let seed = cfg.experiment.seed;
    let out: Vec<Vec<LemmaCheck>> = ids
        .par_iter()
        .map(|&id| -> Result<Vec<LemmaCheck>> {
            let exp = || exp.ok_or_else(|| Error::InvalidArgument("experiment missing".into()));
            match id {
                LemmaId::B1 => cfg.b1_dims.iter().map(|&d| check_prop_b1(d, cfg.b1_trials, rng::derive_seed(seed, "B1", d as u64))).collect(),
                LemmaId::B2 | LemmaId::B3 => check_sgld(id, exp()?),
                LemmaId::B4 | LemmaId::B5 | LemmaId::B6 | LemmaId::B7 => {
                    cfg.gammas.iter().map(|&g| check_moment_lemma(id, exp()?, g)).collect()
                }
                LemmaId::C1 | LemmaId::C2 | LemmaId::C3cor | LemmaId::C4 => {
                    let e = exp()?;
                    let params = affine_theorem2_params(e.problem(), e.schedule(), &e.theta_hats[0], cfg.experiment.zeta, cfg.experiment.nu, cfg.theorem_gamma)?;
                    let c = FamilyCheckConfig {
                        params,
                        theta_hat: e.theta_hats[0].clone(),
                        n_units: cfg.experiment.n_replicas.min(64),
                        paths_per_unit: cfg.experiment.paths_per_replica,
                        n_trials: cfg.c_trials,
                        seed,
                    };
                    let fam = AffineFamily::new(e.problem().d());
                    if matches!(id, LemmaId::C1 | LemmaId::C2) {
                        cfg.powers.iter().map(|&p| check_family_lemma(id, p, &c, &fam)).collect()
                    } else {
                        Ok(vec![check_family_lemma(id, 2.0, &c, &fam)?])
                    }
                }
                LemmaId::AIdentity => Ok(vec![check_a_identity(exp()?, cfg.denoise_samples)?]),
                LemmaId::T1 | LemmaId::T2 => Ok(vec![check_theorem(id, exp()?, cfg.theorem_gamma, cfg.theorem_paths)?]),
            }
        })
        .collect::<Result<_>>()?;
    Ok(out.into_iter().flatten().collect())
}

/// Fixed-width table, one row per check.
pub fn render_table(checks: &[LemmaCheck]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<11} {:<24} {:>10} {:>26} {:>14}  verdict", "check", "case", "at", "lhs", "rhs");
    for c in checks {
        let at = c.at.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        let lhs = match c.lhs {
            Lhs::Exact(v) => format!("{v:.4e}"),
            Lhs::Estimate(e) => format!("{:.4e} +- {:.2e}", e.mean, e.half_width),
        };
        let _ = writeln!(
            s,
            "{:<11} {:<24} {:>10} {:>26} {:>14}  {}",
            c.lemma_id.as_str(),
            c.label,
            at,
            lhs,
            c.rhs.to_string(),
            c.verdict.as_str()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_exp(seed: u64) -> GaussianExperiment {
        let mut c = GaussianCheckConfig::example(1, seed);
        c.n_replicas = 16;
        c.paths_per_replica = 32;
        c.n_iters = 100;
        c.checkpoints = vec![10, 100];
        GaussianExperiment::new(c).unwrap()
    }

    #[test]
    fn lemma_ids_round_trip() {
        for id in LemmaId::ALL {
            assert_eq!(id.as_str().parse::<LemmaId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(serde_json::from_str::<LemmaId>(&j).unwrap(), id);
        }
        assert_eq!("a-identity".parse::<LemmaId>().unwrap(), LemmaId::AIdentity);
        assert!("B9".parse::<LemmaId>().is_err());
    }

    #[test]
    fn verdict_rule() {
        let est = McEstimate { mean: 1.0, n: 10, half_width: 0.1, seed: 0 };
        assert_eq!(inequality_verdict(&est, ExtFloat::from(1.2)), Verdict::Pass);
        assert_eq!(inequality_verdict(&est, ExtFloat::from(1.1)), Verdict::Pass);
        assert_eq!(inequality_verdict(&est, ExtFloat::from(1.05)), Verdict::Inconclusive);
        assert_eq!(inequality_verdict(&est, ExtFloat::from(0.8)), Verdict::Fail);
        assert_eq!(combine([Verdict::Pass, Verdict::Inconclusive]), Verdict::Inconclusive);
        assert_eq!(combine([Verdict::Inconclusive, Verdict::Fail, Verdict::Pass]), Verdict::Fail);
    }

    #[test]
    fn b1_passes() {
        let c = check_prop_b1(3, 20_000, 1).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        assert!(c.lhs.value() < 1e-13);
    }

    #[test]
    fn b5_at_step_zero_is_the_initial_law() {
        let exp = small_exp(3);
        let grid = TimeGrid::new(0.5, 1.0).unwrap();
        let fam = AffineFamily::new(1);
        let thetas = vec![vec![0.0]; 64];
        let c = interpolation_curves(&fam, 1.0, &grid, &thetas, 500, 2, 2.0, 9, "t");
        let e = McEstimate::from_samples(&c.level[0], 9);
        assert!(e.contains(1.0) || (e.mean - 1.0).abs() < 4.0 * e.half_width, "{e:?}");
        assert!(exp.c_em() >= 3.0);
    }

    #[test]
    fn stationary_auxiliary_process() {
        // theta_hat = 0 leaves N(0, I) invariant.
        let thetas = vec![vec![0.0]; 32];
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let c = auxiliary_curves(1.0, &times, &thetas, 400, 5);
        for e in estimates(&c, 5) {
            assert!((e.mean - 1.0).abs() < 5.0 * e.half_width, "{e:?}");
        }
    }

    #[test]
    fn interpolation_gap_matches_closed_form() {
        // theta = 0, d = 1: E|gap_s|^2 = s^2 E|Y_k|^2 + 2 s with E|Y_k|^2 from the variance recursion.
        let grid = TimeGrid::new(0.5, 1.0).unwrap();
        let fam = AffineFamily::new(1);
        let thetas = vec![vec![0.0]; 64];
        let c = interpolation_curves(&fam, 1.0, &grid, &thetas, 2000, 2, 2.0, 11, "gap");
        let s = 0.5;
        let want = s * s * 1.0 + 2.0 * s;
        let e = McEstimate::from_samples(&c.gap[2], 11);
        assert!((e.mean - want).abs() < 5.0 * e.half_width, "{e:?} vs {want}");
    }

    #[test]
    fn moment_lemmas_pass_on_small_example() {
        let exp = small_exp(7);
        for id in [LemmaId::B4, LemmaId::B5, LemmaId::B6, LemmaId::B7] {
            let c = check_moment_lemma(id, &exp, 0.1).unwrap();
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        }
        for c in check_sgld(LemmaId::B2, &exp).unwrap().into_iter().chain(check_sgld(LemmaId::B3, &exp).unwrap()) {
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        }
    }

    #[test]
    fn family_lemmas_affine() {
        let exp = small_exp(2);
        let params = affine_theorem2_params(exp.problem(), exp.schedule(), &[0.9], 0.5, 0.5, 0.05).unwrap();
        let cfg = FamilyCheckConfig { params, theta_hat: vec![0.9], n_units: 8, paths_per_unit: 32, n_trials: 200, seed: 4 };
        let fam = AffineFamily::new(1);
        let c3 = check_family_lemma(LemmaId::C3cor, 2.0, &cfg, &fam).unwrap();
        assert_eq!(c3.verdict, Verdict::Pass);
        assert!(c3.lhs.value() > 0.9 && c3.lhs.value() <= 1.0 + FD_TOL);
        let c4 = check_family_lemma(LemmaId::C4, 2.0, &cfg, &fam).unwrap();
        assert_eq!(c4.lhs.value(), 0.0);
        for p in [2.0, 4.0] {
            for id in [LemmaId::C1, LemmaId::C2] {
                let c = check_family_lemma(id, p, &cfg, &fam).unwrap();
                assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
            }
        }
    }

    #[test]
    fn wrong_ids_are_rejected() {
        let exp = small_exp(1);
        assert!(check_moment_lemma(LemmaId::B1, &exp, 0.1).is_err());
        assert!(check_moment_lemma(LemmaId::B5, &exp, 0.7).is_err());
        assert!(check_sgld(LemmaId::B4, &exp).is_err());
    }

    #[test]
    fn checks_are_reproducible() {
        let a = check_moment_lemma(LemmaId::B6, &small_exp(5), 0.1).unwrap();
        let b = check_moment_lemma(LemmaId::B6, &small_exp(5), 0.1).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn ci_shrinks_with_sample_size() {
        let draw = |n: usize| {
            let mut r = rng::stream(42, "ci", n as u64);
            let xs: Vec<f64> = (0..n).map(|_| rng::standard_normal(&mut r)).collect();
            McEstimate::from_samples(&xs, 42).half_width
        };
        let ratio = draw(40_000) / draw(160_000);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn perfect_score_theorem1() {
        let mut c = GaussianCheckConfig::example(2, 8);
        c.fixed_theta_hat = Some(c.mu.clone());
        c.n_replicas = 4;
        c.horizon = 2.0;
        let exp = GaussianExperiment::new(c).unwrap();
        let t = check_theorem(LemmaId::T1, &exp, 0.05, 4000).unwrap();
        assert_eq!(t.verdict, Verdict::Pass, "{t:?}");
    }
}
