//! Forward Ornstein-Uhlenbeck kernel.
//!
//! The forward process `dX = -X dt + sqrt(2) dB` has the closed-form marginal
//! `X_t = m_t X_0 + sigma_t Z` with `m_t = e^{-t}` and `sigma_t^2 = 1 - e^{-2t}`.
//! Training times are drawn uniformly from `[epsilon, T]`; expectations over
//! that law are computed with Gauss-Legendre quadrature.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_QUADRATURE_NODES: usize = 64;

/// `m_t = e^{-t}`.
pub fn mean_coeff(t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-t).exp())
}

/// `sigma_t = sqrt(1 - e^{-2t})`.
pub fn std_coeff(t: f64) -> Result<f64> {
    check_time(t)?;
    Ok((-(-2.0 * t).exp_m1()).sqrt())
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() {
        return Err(Error::NonFinite("time".into()));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Unchecked `(m_t, sigma_t)` for hot loops; `t >= 0` is the caller's job.
#[inline]
pub(crate) fn coeffs(t: f64) -> (f64, f64) {
    debug_assert!(t >= 0.0);
    ((-t).exp(), (-(-2.0 * t).exp_m1()).sqrt())
}

/// Draw `m_t x0 + sigma_t z` with a fresh standard Gaussian `z`.
pub fn forward_marginal_sample<R: Rng + ?Sized>(x0: &[f64], t: f64, rng: &mut R) -> Result<Vec<f64>> {
    let m = mean_coeff(t)?;
    let s = std_coeff(t)?;
    let mut out = rng::standard_normal_vec(rng, x0.len());
    for (o, x) in out.iter_mut().zip(x0) {
        *o = m * x + s * *o;
    }
    Ok(out)
}

/// Time horizon `T` and early-stopping time `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuSchedule {
    horizon: f64,
    epsilon: f64,
}

impl OuSchedule {
    pub fn new(horizon: f64, epsilon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon T must be positive, got {horizon}")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0 && epsilon < 1.0 && epsilon < horizon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in [0, min(1, T)), got {epsilon} with T = {horizon}"
            )));
        }
        Ok(OuSchedule { horizon, epsilon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Length of the training-time window, `T - epsilon`.
    pub fn span(&self) -> f64 {
        self.horizon - self.epsilon
    }

    pub fn sample_tau<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.epsilon + self.span() * rng.gen::<f64>()
    }

    /// `E[f(tau)]` under the default rule.
    pub fn tau_mean<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        tau_expectation(f, self, &Quadrature::for_schedule(self, DEFAULT_QUADRATURE_NODES))
    }

    /// `E[f(tau)]` after substituting `tau = v^2`. Use for integrands with
    /// odd powers of `sigma_t`, which behave like `sqrt(t)` near zero and
    /// defeat plain Gauss-Legendre.
    pub fn tau_mean_sqrt<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let rule = Quadrature::gauss_legendre(DEFAULT_QUADRATURE_NODES, self.epsilon.sqrt(), self.horizon.sqrt())?;
        Ok(rule.integrate(|v| 2.0 * v * f(v * v))? / self.span())
    }
}

/// Gauss-Legendre rule mapped onto an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl Quadrature {
    /// `n`-node rule on `[lo, hi]`; exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<Self> {
        let n = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidArgument("quadrature needs at least one node".into()))?;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("bad quadrature interval [{lo}, {hi}]")));
        }
        let rule = GaussLegendre::new(n);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (mid + half * x, half * w))
            .unzip();
        Ok(Quadrature { nodes, weights, lo, hi })
    }

    pub fn for_schedule(schedule: &OuSchedule, n: usize) -> Self {
        Self::gauss_legendre(n, schedule.epsilon, schedule.horizon).expect("schedule interval is valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.nodes.len());
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand at t = {x}")));
            }
            terms.push(w * v);
        }
        Ok(crate::stats::pairwise_sum(&terms))
    }
}

/// `E[f(tau)]` for `tau ~ Uniform([epsilon, T])`.
pub fn tau_expectation<F: Fn(f64) -> f64>(integrand: F, schedule: &OuSchedule, rule: &Quadrature) -> Result<f64> {
    let tol = 1e-12 * schedule.horizon.max(1.0);
    if (rule.lo - schedule.epsilon).abs() > tol || (rule.hi - schedule.horizon).abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "quadrature on [{}, {}] does not match schedule [{}, {}]",
            rule.lo, rule.hi, schedule.epsilon, schedule.horizon
        )));
    }
    Ok(rule.integrate(integrand)? / schedule.span())
}

/// Uniform Euler-Maruyama grid `t_k = k * gamma`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    gamma: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid whose steps exactly cover `span`; fails when `span / gamma` is not an integer.
    pub fn new(gamma: f64, span: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::InvalidArgument(format!("grid span must be positive, got {span}")));
        }
        let k = (span / gamma).round();
        if k < 1.0 || (k * gamma - span).abs() > 1e-9 * span {
            return Err(Error::InvalidArgument(format!(
                "span {span} is not an integer multiple of gamma {gamma}"
            )));
        }
        Ok(TimeGrid { gamma, n_steps: k as usize })
    }

    /// Uniform grid on `span` with step strictly below `gamma_bound`.
    pub fn finer_than(gamma_bound: f64, span: f64) -> Result<Self> {
        if !(gamma_bound > 0.0 && span > 0.0) {
            return Err(Error::InvalidArgument("grid bound and span must be positive".into()));
        }
        let n = (span / gamma_bound).floor() + 1.0;
        let gamma = span / n;
        check_gamma(gamma)?;
        Ok(TimeGrid { gamma, n_steps: n as usize })
    }

    /// Uniform grid on `span` with the fewest steps not exceeding `max_step`.
    pub fn covering(max_step: f64, span: f64) -> Result<Self> {
        if !(max_step > 0.0 && span > 0.0) {
            return Err(Error::InvalidArgument("grid step and span must be positive".into()));
        }
        let n = (span / max_step * (1.0 - 1e-12)).ceil().max(1.0);
        let gamma = span / n;
        check_gamma(gamma)?;
        Ok(TimeGrid { gamma, n_steps: n as usize })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of update steps.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.gamma
    }

    pub fn span(&self) -> f64 {
        self.n_steps as f64 * self.gamma
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size gamma must lie in (0, 1), got {gamma}")))
    }
}
