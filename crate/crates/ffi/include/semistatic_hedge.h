#ifndef SEMISTATIC_HEDGE_H
#define SEMISTATIC_HEDGE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ShMethod {
  SH_METHOD_LEAPS_AND_BOUNDS = 0,
  SH_METHOD_BRUTE_FORCE = 1,
  SH_METHOD_GREEDY_FORWARD = 2,
} ShMethod;

typedef enum ShOptionKind {
  SH_OPTION_KIND_CALL = 0,
  SH_OPTION_KIND_PUT = 1,
} ShOptionKind;

/**
 * Result code of every fallible call.
 */
typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  SH_STATUS_INVALID_ARGUMENT = 2,
  SH_STATUS_INVALID_PARAMS = 3,
  SH_STATUS_INVALID_CLAIM = 4,
  SH_STATUS_DOMAIN_VIOLATION = 5,
  SH_STATUS_QUADRATURE_FAILURE = 6,
  SH_STATUS_NUMERICAL_FAILURE = 7,
  SH_STATUS_BUDGET_EXCEEDED = 8,
  SH_STATUS_BUFFER_TOO_SMALL = 9,
  SH_STATUS_IO = 10,
  SH_STATUS_PANIC = 11,
} ShStatus;

/**
 * Target claim plus supplementary options.
 */
typedef struct ShClaims ShClaims;

/**
 * Moments `A`, `B`, `C` of a claim set.
 */
typedef struct ShMoments ShMoments;

/**
 * Heston parameters.
 */
typedef struct ShParams ShParams;

/**
 * Characteristic exponents and their `w` derivatives.
 */
typedef struct ShCharExponents {
  double phi_re;
  double phi_im;
  double psi_re;
  double psi_im;
  double dphi_dw_re;
  double dphi_dw_im;
  double dpsi_dw_re;
  double dpsi_dw_im;
} ShCharExponents;

/**
 * Quadrature settings for [`sh_moments_compute`].
 */
typedef struct ShQuadrature {
  size_t time_nodes;
  double strip_tol;
  double entry_tol;
  double c_y_max;
  size_t c_panel_order;
  size_t max_evals;
} ShQuadrature;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *sh_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void sh_string_free(char *s);

/**
 * Validated parameters from individual values.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ShStatus sh_params_new(double kappa,
                            double lambda,
                            double rho,
                            double sigma,
                            double v0,
                            double s0,
                            double maturity,
                            struct ShParams **out);

/**
 * The stylized parameter set used in the examples.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ShStatus sh_params_stylized(struct ShParams **out);

/**
 * Parameters from a JSON object.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ShStatus sh_params_from_json(const char *json, struct ShParams **out);

/**
 * # Safety
 * `p` must come from this library and not be freed twice.
 */
void sh_params_free(struct ShParams *p);

/**
 * Fair variance swap strike.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ShStatus sh_swap_rate(const struct ShParams *params, double *out);

/**
 * `phi_t(u, w)`, `psi_t(u, w)` and their `w` derivatives.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ShStatus sh_char_exponents(const struct ShParams *params,
                                double t,
                                double u_re,
                                double u_im,
                                double w_re,
                                double w_im,
                                struct ShCharExponents *out);

/**
 * Price of a European option by Fourier inversion.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ShStatus sh_option_price(const struct ShParams *params,
                              enum ShOptionKind kind,
                              double strike,
                              double *out);

/**
 * Out-of-the-money options on `k_min, k_min + dk, ..., k_max`: puts below
 * spot, calls at and above.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ShStatus sh_claims_otm_grid(const struct ShParams *params,
                                 double k_min,
                                 double k_max,
                                 double dk,
                                 struct ShClaims **out);

/**
 * Claim set from JSON (`{"target": ..., "options": [...]}`).
 *
 * # Safety
 * `json` must be NUL-terminated; pointers must be valid.
 */
enum ShStatus sh_claims_from_json(const struct ShParams *params,
                                  const char *json,
                                  struct ShClaims **out);

/**
 * Number of supplementary options; 0 for a null handle.
 *
 * # Safety
 * `claims` must be null or valid.
 */
size_t sh_claims_len(const struct ShClaims *claims);

/**
 * # Safety
 * `c` must come from this library and not be freed twice.
 */
void sh_claims_free(struct ShClaims *c);

struct ShQuadrature sh_quadrature_default(void);

struct ShQuadrature sh_quadrature_coarse(void);

/**
 * Computes `A`, `B`, `C`; `quad` may be null for the default settings.
 *
 * # Safety
 * Pointers must be valid (`quad` may be null).
 */
enum ShStatus sh_moments_compute(const struct ShParams *params,
                                 const struct ShClaims *claims,
                                 const struct ShQuadrature *quad,
                                 struct ShMoments **out);

/**
 * Moments from their JSON serialization.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be valid.
 */
enum ShStatus sh_moments_from_json(const char *json, struct ShMoments **out);

/**
 * JSON serialization; release the string with [`sh_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum ShStatus sh_moments_to_json(const struct ShMoments *m, char **out);

/**
 * # Safety
 * `m` must come from this library and not be freed twice.
 */
void sh_moments_free(struct ShMoments *m);

/**
 * Number of options; 0 for a null handle.
 *
 * # Safety
 * `m` must be null or valid.
 */
size_t sh_moments_dim(const struct ShMoments *m);

/**
 * `A`, the swap rate `k*` and the reciprocal condition number of `C`.
 *
 * # Safety
 * Pointers must be valid; any output pointer may be null to skip it.
 */
enum ShStatus sh_moments_scalars(const struct ShMoments *m,
                                 double *a,
                                 double *k_star,
                                 double *rcond);

/**
 * Copies `B` into `buf` (length at least `n`).
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum ShStatus sh_moments_b(const struct ShMoments *m, double *buf, size_t len);

/**
 * Copies `C` row-major into `buf` (length at least `n * n`).
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum ShStatus sh_moments_c(const struct ShMoments *m, double *buf, size_t len);

/**
 * `A - 2 v'B + v'Cv` for weights `v` of length `n`.
 *
 * # Safety
 * `v` must hold `len` doubles; `out` must be valid.
 */
enum ShStatus sh_hedging_error(const struct ShMoments *m, const double *v, size_t len, double *out);

/**
 * Optimal weights on all options, optionally restricted to `v >= 0`.
 * Writes `n` weights to `v_out` and the squared error to `eps2`.
 *
 * # Safety
 * `v_out` must hold `len` doubles; `eps2` may be null.
 */
enum ShStatus sh_solve(const struct ShMoments *m,
                       bool nonneg,
                       double *v_out,
                       size_t len,
                       double *eps2);

/**
 * Best portfolio with at most `d` options by the given method.
 *
 * # Safety
 * `v_out` must hold `len` doubles; `eps2` may be null.
 */
enum ShStatus sh_select(const struct ShMoments *m,
                        enum ShMethod method,
                        size_t d,
                        bool nonneg,
                        double *v_out,
                        size_t len,
                        double *eps2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMISTATIC_HEDGE_H */
