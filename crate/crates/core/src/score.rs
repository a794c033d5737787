//! Parametric score families `s(t, theta, x)`.

use crate::error::{check_dim, Result};
use crate::ou;

pub trait ScoreFamily: Sync {
    /// Dimension of `x` and of the score.
    fn dim(&self) -> usize;

    /// Number of parameters.
    fn n_params(&self) -> usize;

    /// Writes `s(t, theta, x)` into `out`. Callers guarantee `t >= 0` and
    /// matching lengths.
    fn score_into(&self, t: f64, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Row-major `dim x n_params` Jacobian `d s^(i) / d theta_j`.
    fn theta_jacobian(&self, t: f64, theta: &[f64], x: &[f64]) -> Vec<f64>;

    /// Row-major `dim x dim` Jacobian `d s^(i) / d x_j`; central differences
    /// unless a family knows better.
    fn x_jacobian(&self, t: f64, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut jac = vec![0.0; d * d];
        let mut xp = x.to_vec();
        let mut sp = vec![0.0; d];
        let mut sm = vec![0.0; d];
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.score_into(t, theta, &xp, &mut sp);
            xp[j] = x[j] - h;
            self.score_into(t, theta, &xp, &mut sm);
            xp[j] = x[j];
            for i in 0..d {
                jac[i * d + j] = (sp[i] - sm[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn score(&self, t: f64, theta: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        ou::mean_coeff(t)?;
        check_dim(self.n_params(), theta.len())?;
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; self.dim()];
        self.score_into(t, theta, x, &mut out);
        Ok(out)
    }
}

/// `s(t, theta, x) = -x + e^{-t} theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AffineFamily {
    d: usize,
}

impl AffineFamily {
    pub fn new(d: usize) -> Self {
        AffineFamily { d }
    }
}

impl ScoreFamily for AffineFamily {
    fn dim(&self) -> usize {
        self.d
    }

    fn n_params(&self) -> usize {
        self.d
    }

    #[inline]
    fn score_into(&self, t: f64, theta: &[f64], x: &[f64], out: &mut [f64]) {
        let m = (-t).exp();
        for ((o, x), th) in out.iter_mut().zip(x).zip(theta) {
            *o = -x + m * th;
        }
    }

    fn theta_jacobian(&self, t: f64, _theta: &[f64], _x: &[f64]) -> Vec<f64> {
        let m = (-t).exp();
        let d = self.d;
        let mut j = vec![0.0; d * d];
        for i in 0..d {
            j[i * d + i] = m;
        }
        j
    }

    fn x_jacobian(&self, _t: f64, _theta: &[f64], _x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut j = vec![0.0; d * d];
        for i in 0..d {
            j[i * d + i] = -1.0;
        }
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::approx_score;

    struct Numeric(AffineFamily);

    impl ScoreFamily for Numeric {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn n_params(&self) -> usize {
            self.0.n_params()
        }
        fn score_into(&self, t: f64, theta: &[f64], x: &[f64], out: &mut [f64]) {
            self.0.score_into(t, theta, x, out)
        }
        fn theta_jacobian(&self, t: f64, theta: &[f64], x: &[f64]) -> Vec<f64> {
            self.0.theta_jacobian(t, theta, x)
        }
    }

    #[test]
    fn affine_family_matches_closed_form() {
        let f = AffineFamily::new(2);
        let got = f.score(0.3, &[1.0, -2.0], &[0.5, 0.5]).unwrap();
        assert_eq!(got, approx_score(0.3, &[1.0, -2.0], &[0.5, 0.5]).unwrap());
        assert!(f.score(-0.1, &[1.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(f.score(0.1, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn finite_difference_x_jacobian_agrees() {
        let n = Numeric(AffineFamily::new(3));
        let j = n.x_jacobian(0.7, &[0.1, 0.2, 0.3], &[1.0, -4.0, 2.0]);
        let exact = AffineFamily::new(3).x_jacobian(0.7, &[], &[]);
        for (a, b) in j.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
