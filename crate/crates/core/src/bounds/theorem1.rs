//! Bound for the Gaussian example:
//!
//! `W2(law(Y_{K+1}), pi_D) <= 2 e^{-T} (sqrt(E|X0|^2) + sqrt(3d/2))`
//! `    + c (e^{-n lambda E} sqrt(e0) + sqrt(d C1 / beta) + sqrt(lambda C2))`
//! `    + gamma (sqrt(18 d) + sqrt(132 |theta*|^2))`
//!
//! with `c = sqrt(4/3) + 2 sqrt(33)` and `E = E[sigma_tau^2 m_tau^2]`.

use serde::{Deserialize, Serialize};

use super::{require, BoundReport};
use crate::error::Result;
use crate::gaussian::GaussianProblem;
use crate::ou::OuSchedule;
use crate::score_matching::{c_sgld2_numerator, SgldConstants, TauMoments};

/// `sqrt(4/3) + 2 sqrt(33)`.
pub fn opt_factor() -> f64 {
    (4.0f64 / 3.0).sqrt() + 2.0 * 33f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    pub d: usize,
    pub horizon: f64,
    /// `f64::INFINITY` is accepted.
    pub beta: f64,
    pub lambda: f64,
    pub n: u64,
    pub gamma: f64,
    /// `E|theta0 - theta*|^2`.
    pub e0: f64,
    /// `E|X0|^2`.
    pub ex0sq: f64,
    pub theta_star_norm_sq: f64,
    pub e_s2m2: f64,
    pub e_s4m4: f64,
    pub c_sgld1: f64,
    pub c_sgld2: f64,
}

impl Theorem1Params {
    /// Fills in the schedule expectations for `N(mu, I_d)` data and horizon `T`.
    pub fn for_problem(
        problem: &GaussianProblem,
        horizon: f64,
        beta: f64,
        lambda: f64,
        n: u64,
        gamma: f64,
        e0: f64,
    ) -> Result<Self> {
        let moments = TauMoments::new(&OuSchedule::new(horizon, 0.0)?)?;
        let c = SgldConstants::new(&moments, problem);
        let p = Theorem1Params {
            d: problem.d(),
            horizon,
            beta,
            lambda,
            n,
            gamma,
            e0,
            ex0sq: problem.ex0sq(),
            theta_star_norm_sq: problem.theta_star_norm_sq(),
            e_s2m2: moments.e_s2m2,
            e_s4m4: moments.e_s4m4,
            c_sgld1: c.c1,
            c_sgld2: c.c2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.d >= 1, || "d must be positive".into())?;
        require(self.horizon.is_finite() && self.horizon > 0.0, || format!("T must be positive, got {}", self.horizon))?;
        require(self.beta > 0.0, || format!("beta must be positive, got {}", self.beta))?;
        for (name, v) in [
            ("e0", self.e0),
            ("ex0sq", self.ex0sq),
            ("theta_star_norm_sq", self.theta_star_norm_sq),
            ("c_sgld1", self.c_sgld1),
            ("c_sgld2", self.c_sgld2),
        ] {
            require(v.is_finite() && v >= 0.0, || format!("{name} must be finite and nonnegative, got {v}"))?;
        }
        require(self.e_s2m2 > 0.0 && self.e_s4m4 > 0.0, || "schedule expectations must be positive".into())?;
        let lmax = (self.e_s2m2 / (4.0 * self.e_s4m4)).min(1.0 / (2.0 * self.e_s2m2));
        require(self.lambda >= 0.0 && self.lambda <= lmax, || format!("lambda must lie in [0, {lmax}], got {}", self.lambda))?;
        require((0.0..=0.5).contains(&self.gamma), || format!("gamma must lie in [0, 1/2], got {}", self.gamma))
    }
}

pub fn init_term(horizon: f64, d: usize, ex0sq: f64) -> f64 {
    2.0 * (-horizon).exp() * (ex0sq.sqrt() + (1.5 * d as f64).sqrt())
}

pub fn opt_term(p: &Theorem1Params) -> f64 {
    let decay = if p.n == 0 || p.lambda == 0.0 {
        1.0
    } else {
        (-(p.n as f64) * p.lambda * p.e_s2m2).exp()
    };
    opt_factor() * (decay * p.e0.sqrt() + (p.d as f64 * p.c_sgld1 / p.beta).sqrt() + (p.lambda * p.c_sgld2).sqrt())
}

pub fn disc_term(gamma: f64, d: usize, theta_star_norm_sq: f64) -> f64 {
    gamma * ((18.0 * d as f64).sqrt() + (132.0 * theta_star_norm_sq).sqrt())
}

pub fn theorem1_bound(p: &Theorem1Params) -> Result<BoundReport> {
    p.validate()?;
    let init = init_term(p.horizon, p.d, p.ex0sq);
    let opt = opt_term(p);
    let disc = disc_term(p.gamma, p.d, p.theta_star_norm_sq);
    Ok(BoundReport::new(
        "theorem1",
        vec![("init", init.into()), ("opt", opt.into()), ("disc", disc.into())],
        vec![
            ("E_sigma2_m2", p.e_s2m2.into()),
            ("E_sigma4_m4", p.e_s4m4.into()),
            ("C_SGLD_1", p.c_sgld1.into()),
            ("C_SGLD_2", p.c_sgld2.into()),
        ],
        serde_json::to_value(p).expect("params serialize"),
    ))
}

/// `ln(8 (sqrt(E|X0|^2) + sqrt(3d/2)) / delta)`.
pub fn t_delta(delta: f64, d: usize, ex0sq: f64) -> f64 {
    (8.0 * (ex0sq.sqrt() + (1.5 * d as f64).sqrt()) / delta).ln()
}

/// `144 d c^2 / (delta^2 E[sigma^2 m^2])`.
pub fn beta_delta(delta: f64, d: usize, e_s2m2: f64) -> f64 {
    144.0 * d as f64 * opt_factor().powi(2) / (delta * delta * e_s2m2)
}

/// `min{E / (4 E4), 1 / (2E), delta^2 E / (576 c^2 G)}` where `G` is the
/// expectation inside the second SGLD constant.
pub fn lambda_delta(delta: f64, e_s2m2: f64, e_s4m4: f64, c2_numerator: f64) -> f64 {
    let third = delta * delta * e_s2m2 / (576.0 * opt_factor().powi(2) * c2_numerator);
    (e_s2m2 / (4.0 * e_s4m4)).min(1.0 / (2.0 * e_s2m2)).min(third)
}

/// `(lambda E)^{-1} ln(12 c sqrt(e0) / delta)`, clamped at zero.
pub fn n_delta(delta: f64, lambda: f64, e_s2m2: f64, e0: f64) -> f64 {
    if e0 == 0.0 {
        return 0.0;
    }
    ((12.0 * opt_factor() * e0.sqrt() / delta).ln() / (lambda * e_s2m2)).max(0.0)
}

/// `min{delta / (4 sqrt(18 d + 132 |theta*|^2)), 1/2}`.
pub fn gamma_delta(delta: f64, d: usize, theta_star_norm_sq: f64) -> f64 {
    (delta / (4.0 * (18.0 * d as f64 + 132.0 * theta_star_norm_sq).sqrt())).min(0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Budget {
    pub delta: f64,
    #[serde(rename = "T_delta")]
    pub t_delta: f64,
    /// Horizon at which the schedule expectations below were evaluated.
    pub horizon: f64,
    pub beta_delta: f64,
    pub lambda_delta: f64,
    pub n_delta: f64,
    pub gamma_delta: f64,
}

/// Evaluates every row of the budget table. The horizon is chosen as
/// `T_delta + t_margin` and the expectations are taken at that horizon,
/// since `beta`, `lambda` and `n` depend on it.
pub fn table1_budget(delta: f64, problem: &GaussianProblem, e0: f64, t_margin: f64) -> Result<Table1Budget> {
    require(delta.is_finite() && delta > 0.0, || format!("delta must be positive, got {delta}"))?;
    require(t_margin.is_finite() && t_margin >= 0.0, || "horizon margin must be nonnegative".into())?;
    require(e0.is_finite() && e0 >= 0.0, || "e0 must be nonnegative".into())?;
    let d = problem.d();
    let td = t_delta(delta, d, problem.ex0sq());
    let horizon = td.max(0.0) + t_margin;
    let moments = TauMoments::new(&OuSchedule::new(horizon, 0.0)?)?;
    let g = c_sgld2_numerator(&moments, problem);
    let lambda = lambda_delta(delta, moments.e_s2m2, moments.e_s4m4, g);
    Ok(Table1Budget {
        delta,
        t_delta: td,
        horizon,
        beta_delta: beta_delta(delta, d, moments.e_s2m2),
        lambda_delta: lambda,
        n_delta: n_delta(delta, lambda, moments.e_s2m2, e0),
        gamma_delta: gamma_delta(delta, d, problem.theta_star_norm_sq()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ExtFloat;

    fn problem(mu: &[f64]) -> GaussianProblem {
        GaussianProblem::new(mu.to_vec()).unwrap()
    }

    #[test]
    fn table_rows_examples() {
        assert!((t_delta(0.1, 1, 1.0) - 5.181_668_879_174_498).abs() < 1e-12);
        assert!((gamma_delta(0.1, 1, 0.0) - 0.005_892_556_509_887_896).abs() < 1e-15);
        assert_eq!(gamma_delta(100.0, 1, 0.0), 0.5);
        let g1 = gamma_delta(0.1, 3, 2.0);
        assert!((gamma_delta(0.2, 3, 2.0) - 2.0 * g1).abs() < 1e-15);
    }

    #[test]
    fn init_term_at_t_delta_is_quarter_delta() {
        let td = t_delta(0.1, 1, 1.0);
        assert!((init_term(td, 1, 1.0) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn limits_leave_only_the_init_term() {
        let p = problem(&[1.0, 2.0]);
        let params = Theorem1Params::for_problem(&p, 3.0, f64::INFINITY, 0.0, u64::MAX, 0.0, 0.0).unwrap();
        let r = theorem1_bound(&params).unwrap();
        assert_eq!(r.term("opt").unwrap(), ExtFloat::ZERO);
        assert_eq!(r.term("disc").unwrap(), ExtFloat::ZERO);
        assert_eq!(r.total(), r.term("init").unwrap());
    }

    #[test]
    fn total_is_sum_of_terms() {
        let p = problem(&[0.5]);
        let params = Theorem1Params::for_problem(&p, 2.0, 1e4, 0.01, 100, 0.1, 1.0).unwrap();
        let r = theorem1_bound(&params).unwrap();
        let sum = r.terms().iter().fold(ExtFloat::ZERO, |a, (_, v)| a + *v);
        assert_eq!(sum, r.total());
        let json = serde_json::to_value(&r).unwrap();
        for k in ["init", "opt", "disc"] {
            assert!(json["terms"][k].is_number());
        }
        assert!(json["total"].is_number());
    }

    #[test]
    fn invalid_parameters_rejected() {
        let p = problem(&[0.0]);
        assert!(Theorem1Params::for_problem(&p, 1.0, 1.0, 10.0, 1, 0.1, 0.0).is_err());
        assert!(Theorem1Params::for_problem(&p, 1.0, 1.0, 0.01, 1, 0.6, 0.0).is_err());
        assert!(Theorem1Params::for_problem(&p, 1.0, 0.0, 0.01, 1, 0.1, 0.0).is_err());
    }

    #[test]
    fn monotone_sweeps() {
        let p = problem(&[1.0, -1.0]);
        let base = Theorem1Params::for_problem(&p, 3.0, 1e3, 0.01, 100, 0.1, 2.0).unwrap();
        let total = |q: &Theorem1Params| theorem1_bound(q).unwrap().total().to_f64();
        let mut prev = f64::INFINITY;
        for n in [0u64, 1, 10, 100, 1000, 100_000] {
            let v = total(&Theorem1Params { n, ..base.clone() });
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for beta in [1.0, 10.0, 1e3, 1e6, f64::INFINITY] {
            let v = total(&Theorem1Params { beta, ..base.clone() });
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for gamma in [0.0, 0.01, 0.1, 0.3, 0.5] {
            let v = total(&Theorem1Params { gamma, ..base.clone() });
            assert!(v >= prev);
            prev = v;
        }
        // With the initial error already gone, a larger step only adds noise.
        let mut prev = 0.0;
        for lambda in [0.0, 1e-4, 1e-3, 1e-2, 0.05] {
            let v = total(&Theorem1Params { lambda, e0: 0.0, ..base.clone() });
            assert!(v >= prev);
            prev = v;
        }
        // At fixed schedule expectations only the init term depends on T.
        let mut prev = f64::INFINITY;
        for horizon in [0.5, 1.0, 3.0, 10.0] {
            let v = total(&Theorem1Params { horizon, ..base.clone() });
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn budget_round_trip() {
        let p = problem(&[1.0, 1.0]);
        let b = table1_budget(0.5, &p, 2.0, 0.01).unwrap();
        let params = Theorem1Params::for_problem(
            &p,
            b.horizon,
            b.beta_delta,
            b.lambda_delta,
            b.n_delta.ceil() as u64,
            b.gamma_delta / 2.0,
            2.0,
        )
        .unwrap();
        let r = theorem1_bound(&params).unwrap();
        assert!(r.total().to_f64() < 0.5, "{}", r.total());
    }
}
