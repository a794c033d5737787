//! Wasserstein-2 estimators between a sample cloud and a target.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::gaussian::w2_gaussian;
use crate::rng;
use crate::sampler::EmSamples;
use crate::stats;

/// Exact W2 between two empirical laws on the line: sorted samples are
/// the optimal coupling.
pub fn w2_empirical_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_dim(xs.len(), ys.len())?;
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let sq: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).collect();
    Ok(stats::mean(&sq).sqrt())
}

/// W2 between the Gaussian fitted to `samples` and `N(target_mean, target_cov)`.
pub fn w2_gaussian_fit(samples: &EmSamples, target_mean: &[f64], target_cov: &DMatrix<f64>) -> Result<f64> {
    check_dim(samples.d, target_mean.len())?;
    if samples.len() <= samples.d {
        return Err(Error::InvalidArgument(format!(
            "need more than {} samples to fit a covariance, got {}",
            samples.d,
            samples.len()
        )));
    }
    w2_gaussian(&samples.mean(), &samples.covariance(), target_mean, target_cov)
}

/// Root mean of squared one-dimensional W2 over random unit directions.
pub fn sliced_w2<R: Rng + ?Sized>(xs: &EmSamples, ys: &EmSamples, n_projections: usize, rng: &mut R) -> Result<f64> {
    check_dim(xs.d, ys.d)?;
    check_dim(xs.len(), ys.len())?;
    if n_projections == 0 {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    if xs.d == 1 {
        return w2_empirical_1d(&xs.data, &ys.data);
    }
    let mut acc = Vec::with_capacity(n_projections);
    for _ in 0..n_projections {
        let mut dir = rng::standard_normal_vec(rng, xs.d);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let project = |s: &EmSamples| -> Vec<f64> { s.rows().map(|r| r.iter().zip(&dir).map(|(a, b)| a * b).sum()).collect() };
        let w = w2_empirical_1d(&project(xs), &project(ys))?;
        acc.push(w * w);
    }
    Ok(stats::mean(&acc).sqrt())
}
