//! Bound for general score families:
//!
//! `W2(law(Y_K), pi_D) <= C1 sqrt(eps) + C2 e^{-(2 L_mo - 1)(T - eps)}`
//! `    + C3(T, eps) sqrt(eps_SN) + C4(T, eps) gamma^alpha`.
//!
//! `C4` contains the moment constants `C_EM,p` and `C_EMose,p`, which grow
//! like `e^{t (p M + 2^{2p-1} K^p ...)}` and are carried as [`ExtFloat`].

use serde::{Deserialize, Serialize};

use super::{require, BoundReport};
use crate::error::Result;
use crate::ext::ExtFloat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    /// Data dimension.
    pub m: usize,
    pub horizon: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub zeta: f64,
    /// Accepted and recorded; no constant depends on it.
    pub nu: f64,
    pub l_mo: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k_total: f64,
    /// Optimizer accuracy: `E|theta_hat - theta*|^2 < eps_al`.
    pub eps_al: f64,
    /// Score error along the auxiliary process.
    pub eps_sn: f64,
    pub theta_star_norm_sq: f64,
    pub ex0sq: f64,
    /// `E|theta_hat|^4`.
    pub e_theta4: f64,
    pub gamma: f64,
}

impl Theorem2Params {
    pub fn validate(&self) -> Result<()> {
        require(self.m >= 1, || "M must be positive".into())?;
        require(self.horizon.is_finite() && self.horizon > 0.0, || format!("T must be positive, got {}", self.horizon))?;
        require(
            self.epsilon >= 0.0 && self.epsilon < 1.0 && self.epsilon < self.horizon,
            || format!("epsilon must lie in [0, min(1, T)), got {}", self.epsilon),
        )?;
        require((0.5..=1.0).contains(&self.alpha), || format!("alpha must lie in [1/2, 1], got {}", self.alpha))?;
        require(self.zeta > 0.0 && self.zeta < 1.0, || format!("zeta must lie in (0, 1), got {}", self.zeta))?;
        require(self.nu > 0.0 && self.nu < 1.0, || format!("nu must lie in (0, 1), got {}", self.nu))?;
        require(self.l_mo.is_finite() && self.l_mo > 0.5, || format!("L_mo must exceed 1/2, got {}", self.l_mo))?;
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k_total", self.k_total),
            ("eps_al", self.eps_al),
            ("eps_sn", self.eps_sn),
            ("theta_star_norm_sq", self.theta_star_norm_sq),
            ("ex0sq", self.ex0sq),
            ("e_theta4", self.e_theta4),
        ] {
            require(v.is_finite() && v >= 0.0, || format!("{name} must be finite and nonnegative, got {v}"))?;
        }
        require(self.k4.is_finite() && self.k4 > 0.0, || format!("k4 must be positive, got {}", self.k4))?;
        require((0.0..1.0).contains(&self.gamma), || format!("gamma must lie in [0, 1), got {}", self.gamma))
    }

    /// `T - epsilon`.
    pub fn span(&self) -> f64 {
        self.horizon - self.epsilon
    }

    /// `E|theta_hat|^p` for `p` in `[2, 4]`: `2 eps_al + 2 |theta*|^2` at
    /// `p = 2`, `e_theta4` at `p = 4`, log-linear in between (an upper bound,
    /// since `log E|X|^p` is convex in `p`).
    pub fn theta_moment(&self, p: f64) -> f64 {
        let m2 = 2.0 * self.eps_al + 2.0 * self.theta_star_norm_sq;
        log_interpolate(m2, self.e_theta4, p)
    }

    /// `E|Y_0|^p` for the standard Gaussian start in dimension `M`.
    pub fn start_moment(&self, p: f64) -> f64 {
        gaussian_norm_moment(self.m, p)
    }

    fn t_alpha(&self, power: f64) -> f64 {
        self.horizon.powf(self.alpha * power)
    }
}

fn log_interpolate(at2: f64, at4: f64, p: f64) -> f64 {
    if p == 2.0 {
        return at2;
    }
    if p == 4.0 {
        return at4;
    }
    if at2 <= 0.0 || at4 <= 0.0 {
        return if at4 <= 0.0 && at2 <= 0.0 { 0.0 } else { at2.max(at4) };
    }
    let w = (p - 2.0) / 2.0;
    ((1.0 - w) * at2.ln() + w * at4.ln()).exp()
}

/// `E|Z|^p = 2^{p/2} Gamma((M + p)/2) / Gamma(M/2)` for `Z ~ N(0, I_M)`.
pub fn gaussian_norm_moment(m: usize, p: f64) -> f64 {
    let m = m as f64;
    (0.5 * p * 2f64.ln() + libm::lgamma(0.5 * (m + p)) - libm::lgamma(0.5 * m)).exp()
}

fn check_p(p: f64) -> Result<()> {
    require((2.0..=4.0).contains(&p), || format!("p must lie in [2, 4], got {p}"))
}

/// Exponent rate of `C_EM,p`: `3(p-1) + p(M + p - 2) + 1 + 2^{2p-1} K^p (1 + T^{alpha p})`.
pub fn c_em_rate(p: f64, params: &Theorem2Params) -> f64 {
    let m = params.m as f64;
    3.0 * (p - 1.0) + p * (m + p - 2.0) + 1.0 + 2f64.powf(2.0 * p - 1.0) * params.k_total.powf(p) * (1.0 + params.t_alpha(p))
}

/// Moment bound of the interpolated Euler-Maruyama process:
/// `e^{t rate} (E|Y_0|^p + 2^{3p-2} K^p t (1 + E|theta_hat|^p)(1 + T^{alpha p}))`.
///
/// Defined for `t` in `[0, T]`; the step-gap constant needs it at `t = T`.
pub fn c_em_p(t: f64, p: f64, params: &Theorem2Params) -> Result<ExtFloat> {
    check_p(p)?;
    params.validate()?;
    require((0.0..=params.horizon).contains(&t), || format!("t must lie in [0, T], got {t}"))?;
    let kp = params.k_total.powf(p);
    let additive = params.start_moment(p)
        + 2f64.powf(3.0 * p - 2.0) * kp * t * (1.0 + params.theta_moment(p)) * (1.0 + params.t_alpha(p));
    Ok(ExtFloat::exp(t * c_em_rate(p, params)) * additive)
}

/// Pure-diffusion floor of `C_EMose,p`: `(M p (p - 1))^{p/2}`.
pub fn c_emose_floor(p: f64, m: usize) -> f64 {
    (m as f64 * p * (p - 1.0)).powf(0.5 * p)
}

/// `2^{p-1} (C_EM,p(T) + K^p (1 + T^{alpha p}) (2^{3p-2} C_EM,p(T) + 2^{4p-3} (1 + E|theta_hat|^p))) + (M p (p-1))^{p/2}`.
pub fn c_emose_p(p: f64, params: &Theorem2Params) -> Result<ExtFloat> {
    let cem = c_em_p(params.horizon, p, params)?;
    let kp = params.k_total.powf(p) * (1.0 + params.t_alpha(p));
    let inner = cem * 2f64.powf(3.0 * p - 2.0) + 2f64.powf(4.0 * p - 3.0) * (1.0 + params.theta_moment(p));
    Ok((cem + inner * kp) * 2f64.powf(p - 1.0) + c_emose_floor(p, params.m))
}

/// The pieces of `C4` shared with the step-size budget.
#[derive(Debug, Clone, Copy)]
struct C4Parts {
    /// `(1 + zeta + K3 (1 + 2 T^alpha + 4 K3 (1 + 4 T^{2 alpha})))`.
    rate: f64,
    /// The bracketed sum under the square root.
    big: ExtFloat,
}

fn c4_parts(params: &Theorem2Params) -> Result<C4Parts> {
    let m = params.m as f64;
    let (k1, k3, k4, kt) = (params.k1, params.k3, params.k4, params.k_total);
    let (zeta, t) = (params.zeta, params.horizon);
    let ta = params.t_alpha(1.0);
    let t2a = params.t_alpha(2.0);
    let ts = params.theta_star_norm_sq;
    let eal = params.eps_al;
    let rate = 1.0 + zeta + k3 * (1.0 + 2.0 * ta + 4.0 * k3 * (1.0 + 4.0 * t2a));

    let cem2 = c_em_p(t, 2.0, params)?;
    let cose2 = c_emose_p(2.0, params)?;
    let cose4 = c_emose_p(4.0, params)?;

    let a1 = cose4 * (k4 * k4 / zeta * (1.0 + 4.0 * t2a));
    let a2 = 2.0 * (m + 2.0 * k3 * k3 * (1.0 + 4.0 * t2a) * m);
    let a3 = 2.0 / zeta * k1 * k1 * (1.0 + 8.0 * (eal + ts));
    let a4_pre = 2.0 * m / zeta * (m + 4.0 * k3 * k3 * (1.0 + 4.0 * t2a));
    let a4_bracket = cem2 * (1.0 + 16.0 * kt * kt * (1.0 + t2a)) + 32.0 * kt * kt * (1.0 + t2a) * (1.0 + 2.0 * eal + 2.0 * ts);
    let a4 = a4_bracket * a4_pre;
    let a5_left = cose2.sqrt() * (1.0 + 8.0 * k3 * k3 * (1.0 + 4.0 * t2a)).sqrt() + 2.0 * k1 * (1.0 + 8.0 * eal + 8.0 * ts).sqrt();
    let a5_right = m * 2f64.sqrt() * (m + 8.0 * k3 * k3 * (1.0 + 4.0 * t2a) * m).sqrt();
    let a5 = a5_left * (2.0 * a5_right);
    let big = a1 + a2 + a3 + a4 + a5;
    Ok(C4Parts { rate, big })
}

pub fn c1(params: &Theorem2Params) -> f64 {
    2.0 * (params.ex0sq.sqrt() + (params.m as f64).sqrt())
}

pub fn c2(params: &Theorem2Params) -> f64 {
    2.0 * (params.ex0sq.sqrt() + (1.5 * params.m as f64).sqrt())
}

/// `sqrt(2 / zeta) e^{(1 + zeta - 2 L_mo)(T - eps)}`.
pub fn c3(params: &Theorem2Params) -> ExtFloat {
    ExtFloat::exp((1.0 + params.zeta - 2.0 * params.l_mo) * params.span()) * (2.0 / params.zeta).sqrt()
}

/// `sqrt(2) e^{2 rate (T - eps)} sqrt(T - eps) big^{1/2}`.
pub fn c4(params: &Theorem2Params) -> Result<ExtFloat> {
    params.validate()?;
    let parts = c4_parts(params)?;
    let span = params.span();
    Ok(ExtFloat::exp(2.0 * parts.rate * span) * parts.big.sqrt() * (2.0 * span).sqrt())
}

pub fn theorem2_bound(params: &Theorem2Params) -> Result<BoundReport> {
    theorem2_bound_at(params, ExtFloat::from(params.gamma))
}

/// Same as [`theorem2_bound`] with the step size supplied separately, for
/// step sizes below the smallest positive `f64`.
pub fn theorem2_bound_at(params: &Theorem2Params, gamma: ExtFloat) -> Result<BoundReport> {
    params.validate()?;
    require(!gamma.is_sign_negative() && gamma < ExtFloat::ONE, || format!("gamma must lie in [0, 1), got {gamma}"))?;
    let span = params.span();
    let c1v = c1(params);
    let c2v = c2(params);
    let c3v = c3(params);
    let c4v = c4(params)?;
    let early_stop = ExtFloat::from(c1v * params.epsilon.sqrt());
    let init = ExtFloat::exp(-(2.0 * params.l_mo - 1.0) * span) * c2v;
    let score = c3v * params.eps_sn.sqrt();
    let disc = if gamma.is_zero() {
        ExtFloat::ZERO
    } else {
        c4v * gamma.powf(params.alpha)
    };
    Ok(BoundReport::new(
        "theorem2",
        vec![("early_stop", early_stop), ("init", init), ("score", score), ("disc", disc)],
        vec![
            ("C1", c1v.into()),
            ("C2", c2v.into()),
            ("C3", c3v),
            ("C4", c4v),
            ("C_EM_2_T", c_em_p(params.horizon, 2.0, params)?),
            ("C_EMose_2", c_emose_p(2.0, params)?),
            ("C_EMose_4", c_emose_p(4.0, params)?),
        ],
        serde_json::to_value(params).expect("params serialize"),
    ))
}

/// `delta^2 / (64 (sqrt(E|X0|^2) + sqrt(M))^2)`.
pub fn epsilon_delta(delta: f64, ex0sq: f64, m: usize) -> f64 {
    delta * delta / (64.0 * (ex0sq.sqrt() + (m as f64).sqrt()).powi(2))
}

/// `(2 L_mo - 1)^{-1} ln(8 (sqrt(E|X0|^2) + sqrt(3M/2)) / delta) + eps`.
pub fn t_delta(delta: f64, l_mo: f64, ex0sq: f64, m: usize, epsilon: f64) -> f64 {
    (8.0 * (ex0sq.sqrt() + (1.5 * m as f64).sqrt()) / delta).ln() / (2.0 * l_mo - 1.0) + epsilon
}

/// `(zeta delta^2 / 32) e^{-2 (1 + zeta - 2 L_mo)(T - eps)}`.
pub fn eps_sn_delta(delta: f64, zeta: f64, l_mo: f64, horizon: f64, epsilon: f64) -> ExtFloat {
    ExtFloat::exp(-2.0 * (1.0 + zeta - 2.0 * l_mo) * (horizon - epsilon)) * (zeta * delta * delta / 32.0)
}

/// `min{(delta / (4 sqrt 2))^{1/alpha} (T - eps)^{-1/(2 alpha)} e^{-(2/alpha) rate (T - eps)} big^{-1/(2 alpha)}, 1}`.
pub fn gamma_delta(delta: f64, params: &Theorem2Params) -> Result<ExtFloat> {
    params.validate()?;
    let parts = c4_parts(params)?;
    let a = params.alpha;
    let span = params.span();
    let v = ExtFloat::from(delta / (4.0 * 2f64.sqrt())).powf(1.0 / a)
        * ExtFloat::from(span).powf(-0.5 / a)
        * ExtFloat::exp(-(2.0 / a) * parts.rate * span)
        * parts.big.powf(-0.5 / a);
    Ok(v.min(ExtFloat::ONE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Budget {
    pub delta: f64,
    pub epsilon_delta: f64,
    #[serde(rename = "T_delta")]
    pub t_delta: f64,
    pub eps_sn_delta: ExtFloat,
    pub gamma_delta: ExtFloat,
}

/// Evaluates every budget row. `T_delta` uses `params.epsilon`; the score and
/// step-size rows are evaluated at `params.horizon` and `params.epsilon`.
pub fn table2_budget(delta: f64, params: &Theorem2Params) -> Result<Table2Budget> {
    require(delta.is_finite() && delta > 0.0, || format!("delta must be positive, got {delta}"))?;
    params.validate()?;
    Ok(Table2Budget {
        delta,
        epsilon_delta: epsilon_delta(delta, params.ex0sq, params.m),
        t_delta: t_delta(delta, params.l_mo, params.ex0sq, params.m, params.epsilon),
        eps_sn_delta: eps_sn_delta(delta, params.zeta, params.l_mo, params.horizon, params.epsilon),
        gamma_delta: gamma_delta(delta, params)?,
    })
}
