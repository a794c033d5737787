#ifndef SGMCERT_H
#define SGMCERT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgmStatus {
  SGM_STATUS_OK = 0,
  SGM_STATUS_NULL_POINTER = 1,
  SGM_STATUS_INVALID_ARGUMENT = 2,
  SGM_STATUS_DIMENSION_MISMATCH = 3,
  SGM_STATUS_NON_FINITE = 4,
  SGM_STATUS_DIVERGED = 5,
  SGM_STATUS_NUMERICAL_ERROR = 6,
  SGM_STATUS_PANIC = 7,
} SgmStatus;

/**
 * Gaussian data `N(mu, I_d)`.
 */
typedef struct SgmProblem SgmProblem;

/**
 * A value that may lie outside the `double` range.
 */
typedef struct SgmExtValue {
  /**
   * Nearest `double`; `inf` on overflow, `0` on underflow.
   */
  double value;
  /**
   * `log10(value)`; `-inf` for zero.
   */
  double log10;
} SgmExtValue;

typedef struct SgmTheorem1Bound {
  struct SgmExtValue init;
  struct SgmExtValue opt;
  struct SgmExtValue disc;
  struct SgmExtValue total;
} SgmTheorem1Bound;

typedef struct SgmTheorem2Params {
  size_t m;
  double horizon;
  double epsilon;
  double alpha;
  double zeta;
  double nu;
  double l_mo;
  double k1;
  double k2;
  double k3;
  double k4;
  double k_total;
  double eps_al;
  double eps_sn;
  double theta_star_norm_sq;
  double ex0sq;
  double e_theta4;
  double gamma;
} SgmTheorem2Params;

typedef struct SgmTheorem2Bound {
  struct SgmExtValue early_stop;
  struct SgmExtValue init;
  struct SgmExtValue score;
  struct SgmExtValue disc;
  struct SgmExtValue total;
  struct SgmExtValue c1;
  struct SgmExtValue c2;
  struct SgmExtValue c3;
  struct SgmExtValue c4;
} SgmTheorem2Bound;

typedef struct SgmTable1Budget {
  double t_delta;
  double horizon;
  double beta_delta;
  double lambda_delta;
  double n_delta;
  double gamma_delta;
} SgmTable1Budget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sgm_last_error(void);

/**
 * Creates the problem `N(mu, I_d)`.
 *
 * # Safety
 * `mu` must point to `d` doubles and `out` to a writable handle slot.
 */
enum SgmStatus sgm_problem_new(const double *mu, size_t d, struct SgmProblem **out);

/**
 * Releases a handle from [`sgm_problem_new`]; null is ignored.
 *
 * # Safety
 * `problem` must be null or a live handle, and is invalid afterwards.
 */
void sgm_problem_free(struct SgmProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum SgmStatus sgm_problem_dim(const struct SgmProblem *problem, size_t *out);

/**
 * True score `-x + e^{-t} mu` of the forward marginal at time `t`.
 *
 * # Safety
 * `x` and `out` must point to `d` doubles.
 */
enum SgmStatus sgm_true_score(const struct SgmProblem *problem,
                              double t,
                              const double *x,
                              size_t d,
                              double *out);

/**
 * Exact score-matching objective of the affine family at `theta` with
 * training times uniform on `[epsilon, horizon]`.
 *
 * # Safety
 * `theta` must point to `d` doubles and `out` be writable.
 */
enum SgmStatus sgm_exact_objective(const struct SgmProblem *problem,
                                   const double *theta,
                                   size_t d,
                                   double horizon,
                                   double epsilon,
                                   double *out);

/**
 * W2 between `N(mu1, cov1)` and `N(mu2, cov2)`; covariances are row-major `d x d`.
 *
 * # Safety
 * Mean pointers must hold `d` doubles, covariance pointers `d * d`.
 */
enum SgmStatus sgm_w2_gaussian(const double *mu1,
                               const double *cov1,
                               const double *mu2,
                               const double *cov2,
                               size_t d,
                               double *out);

/**
 * Gaussian-example bound at horizon `T`, inverse temperature `beta`
 * (`inf` allowed), step `lambda`, `n` optimizer steps, sampler step `gamma`
 * and initial error `e0 = E|theta0 - mu|^2`.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum SgmStatus sgm_theorem1_bound(const struct SgmProblem *problem,
                                  double horizon,
                                  double beta,
                                  double lambda,
                                  uint64_t n,
                                  double gamma,
                                  double e0,
                                  struct SgmTheorem1Bound *out);

/**
 * General-family bound.
 *
 * # Safety
 * `params` must be readable and `out` writable.
 */
enum SgmStatus sgm_theorem2_bound(const struct SgmTheorem2Params *params,
                                  struct SgmTheorem2Bound *out);

/**
 * Parameter budget of the Gaussian-example bound for accuracy `delta`.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum SgmStatus sgm_table1_budget(const struct SgmProblem *problem,
                                 double delta,
                                 double e0,
                                 double t_margin,
                                 struct SgmTable1Budget *out);

/**
 * One optimizer replica; replica `r` of master seed `seed` matches the
 * library's replica streams. Writes the final parameter into `theta_out`.
 *
 * # Safety
 * `theta0` and `theta_out` must point to `d` doubles, `d` being the problem dimension.
 */
enum SgmStatus sgm_sgld_run(const struct SgmProblem *problem,
                            double horizon,
                            double epsilon,
                            double lambda,
                            double beta,
                            uint64_t n_iters,
                            const double *theta0,
                            uint64_t seed,
                            uint64_t replica,
                            double *theta_out);

/**
 * Backward Euler-Maruyama sampler with the affine score `-x + e^{-t} theta_hat`.
 * Runs to `horizon`, or to `horizon - epsilon` when `early_stopped` is
 * non-zero; `gamma` must divide that span. Writes `n_paths x d` terminal
 * states row-major into `out` and the number of finite paths into `n_valid`;
 * diverged paths are dropped and the rows compacted.
 *
 * # Safety
 * `theta_hat` must hold `d` doubles, `out` `n_paths * d`, `n_valid` writable.
 */
enum SgmStatus sgm_em_run(double horizon,
                          double epsilon,
                          double gamma,
                          int32_t early_stopped,
                          const double *theta_hat,
                          size_t d,
                          size_t n_paths,
                          uint64_t seed,
                          double *out,
                          size_t *n_valid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGMCERT_H */
