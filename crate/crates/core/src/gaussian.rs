//! Gaussian data with unknown mean: `X_0 ~ N(mu, I_d)`.
//!
//! Everything about this example is available in closed form: the score of
//! every forward marginal, the exact score-matching objective of the affine
//! family, and Wasserstein-2 distances between Gaussian laws.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ou::{self, OuSchedule};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProblem {
    mu: Vec<f64>,
}

impl GaussianProblem {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mu".into()));
        }
        Ok(GaussianProblem { mu })
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// The unique minimiser of the score-matching objective.
    pub fn theta_star(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta_star_norm_sq(&self) -> f64 {
        norm_sq(&self.mu)
    }

    /// `E|X_0|^2 = |mu|^2 + d`.
    pub fn ex0sq(&self) -> f64 {
        self.theta_star_norm_sq() + self.d() as f64
    }

    /// `E|X_0|`, the mean of a noncentral chi variable.
    pub fn mean_norm_x0(&self) -> f64 {
        noncentral_chi_mean(self.d(), self.theta_star_norm_sq())
    }

    pub fn sample_x0<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = rng::standard_normal_vec(rng, self.d());
        for (v, m) in x.iter_mut().zip(&self.mu) {
            *v += m;
        }
        x
    }

    /// `grad log p_t(x) = -x + m_t mu`.
    pub fn true_score(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d(), x.len())?;
        approx_score(t, &self.mu, x)
    }

    /// `E[sigma_tau^2 m_tau^2] |theta - mu|^2` for the weight `kappa = sigma^2`.
    pub fn exact_objective(&self, theta: &[f64], schedule: &OuSchedule) -> Result<f64> {
        check_dim(self.d(), theta.len())?;
        let e = schedule.tau_mean(|t| {
            let (m, s) = ou::coeffs(t);
            s * s * m * m
        })?;
        Ok(e * dist_sq(theta, &self.mu))
    }
}

/// The affine family `s(t, theta, x) = -x + m_t theta`.
pub fn approx_score(t: f64, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dim(theta.len(), x.len())?;
    let m = ou::mean_coeff(t)?;
    Ok(x.iter().zip(theta).map(|(x, th)| -x + m * th).collect())
}

/// Growth and regularity constants of a score family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineScoreConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k_total: f64,
    pub alpha: f64,
    pub l_mo: f64,
}

/// Any positive value is admissible for the affine family, whose second
/// x-derivatives vanish identically.
pub const AFFINE_K4: f64 = 1e-12;

impl AffineScoreConstants {
    /// `K_total = K1 + K2 + K3 + |s(0, 0, 0)|`.
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, s000_norm: f64, alpha: f64, l_mo: f64) -> Result<Self> {
        for (name, v) in [("k1", k1), ("k2", k2), ("k3", k3), ("|s(0,0,0)|", s000_norm)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(k4.is_finite() && k4 > 0.0) {
            return Err(Error::InvalidArgument(format!("k4 must be positive, got {k4}")));
        }
        if !(0.5..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [1/2, 1], got {alpha}")));
        }
        if !(l_mo.is_finite() && l_mo > 0.0) {
            return Err(Error::InvalidArgument(format!("L_mo must be positive, got {l_mo}")));
        }
        Ok(AffineScoreConstants { k1, k2, k3, k4, k_total: k1 + k2 + k3 + s000_norm, alpha, l_mo })
    }
}

pub fn affine_constants(_problem: &GaussianProblem) -> AffineScoreConstants {
    AffineScoreConstants::new(1.0, 1.0, 1.0, AFFINE_K4, 0.0, 1.0, 1.0).expect("valid constants")
}

/// Wasserstein-2 distance between `N(mu1, cov1)` and `N(mu2, cov2)`.
pub fn w2_gaussian(mu1: &[f64], cov1: &DMatrix<f64>, mu2: &[f64], cov2: &DMatrix<f64>) -> Result<f64> {
    let d = mu1.len();
    check_dim(d, mu2.len())?;
    for c in [cov1, cov2] {
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.nrows() });
        }
    }
    let r2 = psd_sqrt(cov2)?;
    let inner = &r2 * cov1 * &r2;
    let cross = psd_sqrt(&inner)?;
    let trace = cov1.trace() + cov2.trace() - 2.0 * cross.trace();
    Ok((dist_sq(mu1, mu2) + trace.max(0.0)).sqrt())
}

/// Symmetric square root with eigenvalues clipped at zero. Inputs must be
/// symmetric and PSD up to a small relative tolerance.
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::NotPositiveSemiDefinite);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance".into()));
    }
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).abs().max();
    if asym > 1e-9 * scale {
        return Err(Error::NotPositiveSemiDefinite);
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.min() < -1e-9 * scale {
        return Err(Error::NotPositiveSemiDefinite);
    }
    let roots = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `E|Z|` for `Z ~ N(0, I_k)`: `sqrt(2) Gamma((k+1)/2) / Gamma(k/2)`.
pub fn chi_mean(k: usize) -> f64 {
    let k = k as f64;
    std::f64::consts::SQRT_2 * (libm::lgamma(0.5 * (k + 1.0)) - libm::lgamma(0.5 * k)).exp()
}

/// `E|X|` for `X ~ N(v, I_k)` with `|v|^2 = nc`, as a Poisson mixture of chi means.
pub fn noncentral_chi_mean(k: usize, nc: f64) -> f64 {
    if nc == 0.0 {
        return chi_mean(k);
    }
    let half = 0.5 * nc;
    let last = (half + 40.0 * (half + 1.0).sqrt() + 50.0).ceil() as usize;
    let terms: Vec<f64> = (0..=last)
        .map(|j| {
            let jf = j as f64;
            let logw = -half + jf * half.ln() - libm::lgamma(jf + 1.0);
            logw.exp() * chi_mean(k + 2 * j)
        })
        .collect();
    crate::stats::pairwise_sum(&terms)
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
