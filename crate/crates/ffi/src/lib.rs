//! C interface to the sgmcert bound evaluators, optimizer and sampler.
//!
//! Every function returns an [`SgmStatus`]. On failure a message is kept per
//! thread and can be read with [`sgm_last_error`]. Results are written
//! through caller-owned out-pointers; the only heap object is the opaque
//! [`SgmProblem`] handle, released with [`sgm_problem_free`].
//!
//! Quantities that can exceed the `double` range are returned as
//! [`SgmExtValue`]: the value as a `double` (possibly `inf` or `0`) together
//! with its base-10 logarithm, which is always exact.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sgmcert::bounds::{table1_budget, theorem1_bound, theorem2_bound, Theorem1Params, Theorem2Params};
use sgmcert::gaussian::w2_gaussian;
use sgmcert::rng;
use sgmcert::sampler::{em_backward_run, EmRunConfig, Horizon};
use sgmcert::score_matching::{sgld_run, SgldConfig};
use sgmcert::{AffineFamily, Error, ExtFloat, GaussianProblem, OuSchedule};

use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Diverged = 5,
    NumericalError = 6,
    Panic = 7,
}

/// Gaussian data `N(mu, I_d)`.
pub struct SgmProblem {
    inner: GaussianProblem,
}

/// A value that may lie outside the `double` range.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmExtValue {
    /// Nearest `double`; `inf` on overflow, `0` on underflow.
    pub value: f64,
    /// `log10(value)`; `-inf` for zero.
    pub log10: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmTheorem1Bound {
    pub init: SgmExtValue,
    pub opt: SgmExtValue,
    pub disc: SgmExtValue,
    pub total: SgmExtValue,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmTheorem2Params {
    pub m: usize,
    pub horizon: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub nu: f64,
    pub l_mo: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k_total: f64,
    pub eps_al: f64,
    pub eps_sn: f64,
    pub theta_star_norm_sq: f64,
    pub ex0sq: f64,
    pub e_theta4: f64,
    pub gamma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmTheorem2Bound {
    pub early_stop: SgmExtValue,
    pub init: SgmExtValue,
    pub score: SgmExtValue,
    pub disc: SgmExtValue,
    pub total: SgmExtValue,
    pub c1: SgmExtValue,
    pub c2: SgmExtValue,
    pub c3: SgmExtValue,
    pub c4: SgmExtValue,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgmTable1Budget {
    pub t_delta: f64,
    pub horizon: f64,
    pub beta_delta: f64,
    pub lambda_delta: f64,
    pub n_delta: f64,
    pub gamma_delta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SgmStatus {
    match e {
        Error::DimensionMismatch { .. } => SgmStatus::DimensionMismatch,
        Error::NonFinite(_) => SgmStatus::NonFinite,
        Error::Diverged { .. } => SgmStatus::Diverged,
        Error::NotPositiveSemiDefinite | Error::SingularTime | Error::EmptySample => SgmStatus::NumericalError,
        _ => SgmStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> SgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SgmStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            SgmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SgmStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `n` readable doubles.
unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or point to `n` writable doubles.
unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn ext(v: ExtFloat) -> SgmExtValue {
    SgmExtValue { value: v.to_f64(), log10: v.log10() }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sgm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates the problem `N(mu, I_d)`.
///
/// # Safety
/// `mu` must point to `d` doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn sgm_problem_new(mu: *const f64, d: usize, out: *mut *mut SgmProblem) -> SgmStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let mu = slice(mu, d, "mu")?;
        let inner = GaussianProblem::new(mu.to_vec())?;
        *out = Box::into_raw(Box::new(SgmProblem { inner }));
        Ok(())
    })
}

/// Releases a handle from [`sgm_problem_new`]; null is ignored.
///
/// # Safety
/// `problem` must be null or a live handle, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sgm_problem_free(problem: *mut SgmProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_problem_dim(problem: *const SgmProblem, out: *mut usize) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        *out = (*problem).inner.d();
        Ok(())
    })
}

/// True score `-x + e^{-t} mu` of the forward marginal at time `t`.
///
/// # Safety
/// `x` and `out` must point to `d` doubles.
#[no_mangle]
pub unsafe extern "C" fn sgm_true_score(problem: *const SgmProblem, t: f64, x: *const f64, d: usize, out: *mut f64) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        let x = slice(x, d, "x")?;
        let out = slice_mut(out, d, "out")?;
        let s = (*problem).inner.true_score(t, x)?;
        out.copy_from_slice(&s);
        Ok(())
    })
}

/// Exact score-matching objective of the affine family at `theta` with
/// training times uniform on `[epsilon, horizon]`.
///
/// # Safety
/// `theta` must point to `d` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_exact_objective(
    problem: *const SgmProblem,
    theta: *const f64,
    d: usize,
    horizon: f64,
    epsilon: f64,
    out: *mut f64,
) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        let theta = slice(theta, d, "theta")?;
        let sched = OuSchedule::new(horizon, epsilon)?;
        *out = (*problem).inner.exact_objective(theta, &sched)?;
        Ok(())
    })
}

/// W2 between `N(mu1, cov1)` and `N(mu2, cov2)`; covariances are row-major `d x d`.
///
/// # Safety
/// Mean pointers must hold `d` doubles, covariance pointers `d * d`.
#[no_mangle]
pub unsafe extern "C" fn sgm_w2_gaussian(
    mu1: *const f64,
    cov1: *const f64,
    mu2: *const f64,
    cov2: *const f64,
    d: usize,
    out: *mut f64,
) -> SgmStatus {
    guard(|| {
        non_null(out, "out")?;
        let n = d.checked_mul(d).ok_or(Error::InvalidArgument("dimension overflow".into()))?;
        let c1 = DMatrix::from_row_slice(d, d, slice(cov1, n, "cov1")?);
        let c2 = DMatrix::from_row_slice(d, d, slice(cov2, n, "cov2")?);
        *out = w2_gaussian(slice(mu1, d, "mu1")?, &c1, slice(mu2, d, "mu2")?, &c2)?;
        Ok(())
    })
}

/// Gaussian-example bound at horizon `T`, inverse temperature `beta`
/// (`inf` allowed), step `lambda`, `n` optimizer steps, sampler step `gamma`
/// and initial error `e0 = E|theta0 - mu|^2`.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_theorem1_bound(
    problem: *const SgmProblem,
    horizon: f64,
    beta: f64,
    lambda: f64,
    n: u64,
    gamma: f64,
    e0: f64,
    out: *mut SgmTheorem1Bound,
) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        let p = Theorem1Params::for_problem(&(*problem).inner, horizon, beta, lambda, n, gamma, e0)?;
        let r = theorem1_bound(&p)?;
        let term = |name| ext(r.term(name).unwrap_or(ExtFloat::ZERO));
        *out = SgmTheorem1Bound { init: term("init"), opt: term("opt"), disc: term("disc"), total: ext(r.total()) };
        Ok(())
    })
}

/// General-family bound.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_theorem2_bound(params: *const SgmTheorem2Params, out: *mut SgmTheorem2Bound) -> SgmStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let q = &*params;
        let p = Theorem2Params {
            m: q.m,
            horizon: q.horizon,
            epsilon: q.epsilon,
            alpha: q.alpha,
            zeta: q.zeta,
            nu: q.nu,
            l_mo: q.l_mo,
            k1: q.k1,
            k2: q.k2,
            k3: q.k3,
            k4: q.k4,
            k_total: q.k_total,
            eps_al: q.eps_al,
            eps_sn: q.eps_sn,
            theta_star_norm_sq: q.theta_star_norm_sq,
            ex0sq: q.ex0sq,
            e_theta4: q.e_theta4,
            gamma: q.gamma,
        };
        let r = theorem2_bound(&p)?;
        let term = |name| ext(r.term(name).unwrap_or(ExtFloat::ZERO));
        let constant = |name| ext(r.constant(name).unwrap_or(ExtFloat::ZERO));
        *out = SgmTheorem2Bound {
            early_stop: term("early_stop"),
            init: term("init"),
            score: term("score"),
            disc: term("disc"),
            total: ext(r.total()),
            c1: constant("C1"),
            c2: constant("C2"),
            c3: constant("C3"),
            c4: constant("C4"),
        };
        Ok(())
    })
}

/// Parameter budget of the Gaussian-example bound for accuracy `delta`.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_table1_budget(
    problem: *const SgmProblem,
    delta: f64,
    e0: f64,
    t_margin: f64,
    out: *mut SgmTable1Budget,
) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        let b = table1_budget(delta, &(*problem).inner, e0, t_margin)?;
        *out = SgmTable1Budget {
            t_delta: b.t_delta,
            horizon: b.horizon,
            beta_delta: b.beta_delta,
            lambda_delta: b.lambda_delta,
            n_delta: b.n_delta,
            gamma_delta: b.gamma_delta,
        };
        Ok(())
    })
}

/// One optimizer replica; replica `r` of master seed `seed` matches the
/// library's replica streams. Writes the final parameter into `theta_out`.
///
/// # Safety
/// `theta0` and `theta_out` must point to `d` doubles, `d` being the problem dimension.
#[no_mangle]
pub unsafe extern "C" fn sgm_sgld_run(
    problem: *const SgmProblem,
    horizon: f64,
    epsilon: f64,
    lambda: f64,
    beta: f64,
    n_iters: u64,
    theta0: *const f64,
    seed: u64,
    replica: u64,
    theta_out: *mut f64,
) -> SgmStatus {
    guard(|| {
        non_null(problem, "problem")?;
        let prob = &(*problem).inner;
        let d = prob.d();
        let theta0 = slice(theta0, d, "theta0")?;
        let out = slice_mut(theta_out, d, "theta_out")?;
        let cfg = SgldConfig::new(OuSchedule::new(horizon, epsilon)?, prob.clone(), lambda, beta, n_iters, theta0.to_vec())?;
        let run = sgld_run(&cfg, &mut rng::stream(seed, "sgld", replica))?;
        out.copy_from_slice(&run.theta);
        Ok(())
    })
}

/// Backward Euler-Maruyama sampler with the affine score `-x + e^{-t} theta_hat`.
/// Runs to `horizon`, or to `horizon - epsilon` when `early_stopped` is
/// non-zero; `gamma` must divide that span. Writes `n_paths x d` terminal
/// states row-major into `out` and the number of finite paths into `n_valid`;
/// diverged paths are dropped and the rows compacted.
///
/// # Safety
/// `theta_hat` must hold `d` doubles, `out` `n_paths * d`, `n_valid` writable.
#[no_mangle]
pub unsafe extern "C" fn sgm_em_run(
    horizon: f64,
    epsilon: f64,
    gamma: f64,
    early_stopped: i32,
    theta_hat: *const f64,
    d: usize,
    n_paths: usize,
    seed: u64,
    out: *mut f64,
    n_valid: *mut usize,
) -> SgmStatus {
    guard(|| {
        non_null(n_valid, "n_valid")?;
        let total = n_paths.checked_mul(d).ok_or(Error::InvalidArgument("buffer size overflow".into()))?;
        let theta = slice(theta_hat, d, "theta_hat")?;
        let out = slice_mut(out, total, "out")?;
        let h = if early_stopped != 0 { Horizon::EarlyStopped } else { Horizon::Full };
        let cfg = EmRunConfig::new(OuSchedule::new(horizon, epsilon)?, gamma, theta.to_vec(), n_paths, seed, h)?;
        let s = em_backward_run(&cfg, &AffineFamily::new(d))?;
        out[..s.data.len()].copy_from_slice(&s.data);
        *n_valid = s.len();
        Ok(())
    })
}
