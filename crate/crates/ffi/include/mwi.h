#ifndef MWI_H
#define MWI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Family of a pair, which selects the constant in [`mwi_verify_pair`].
 */
typedef enum MwiCase {
  MWI_CASE_ONE_D = 0,
  /**
   * Uses the `lambda` argument.
   */
  MWI_CASE_SCALING = 1,
  MWI_CASE_TENSOR = 2,
  MWI_CASE_RADIAL = 3,
  MWI_CASE_DIRECTION = 4,
  MWI_CASE_GENERIC = 5,
} MwiCase;

/**
 * Selects the coupling of the positive and negative parts used by the
 * inverse-transform construction.
 */
typedef enum MwiQChoice {
  MWI_Q_CHOICE_COMONOTONE = 0,
  MWI_Q_CHOICE_CONDITIONED_PRODUCT = 1,
} MwiQChoice;

typedef enum MwiStatus {
  MWI_STATUS_OK = 0,
  MWI_STATUS_NULL_POINTER = 1,
  MWI_STATUS_DOMAIN = 2,
  MWI_STATUS_INVALID_MEASURE = 3,
  MWI_STATUS_DIMENSION_MISMATCH = 4,
  MWI_STATUS_NOT_IN_CONVEX_ORDER = 5,
  MWI_STATUS_EQUAL_MEASURES = 6,
  MWI_STATUS_DEGENERATE = 7,
  MWI_STATUS_LINEAR_PROGRAM = 8,
  MWI_STATUS_INTERNAL = 9,
  MWI_STATUS_PANIC = 10,
} MwiStatus;

/**
 * Opaque coupling between two measures.
 */
typedef struct MwiCoupling MwiCoupling;

/**
 * Opaque finitely supported probability measure on `R^d`.
 */
typedef struct MwiMeasure MwiMeasure;

typedef struct MwiConstants {
  double rho;
  double f_sup;
  double x_star;
  double k_est;
  double k_lower;
  double k_upper;
  double gamma1_star;
  double gamma2_star;
} MwiConstants;

/**
 * Absent optional values are NaN.
 */
typedef struct MwiReport {
  double rho;
  double w_rho;
  double sigma_rho;
  double m_rho;
  double itm_cost;
  double ratio;
  double bound;
  double slack;
  bool surrogate;
} MwiReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a measure from `n` points stored row-major in `points`
 * (`n * dim` values) and `n` weights summing to one.
 *
 * # Safety
 * `points` and `weights` must be valid for reads of `n * dim` and `n`
 * doubles; `out` must be valid for a pointer write.
 */
enum MwiStatus mwi_measure_new(size_t dim,
                               size_t n,
                               const double *points,
                               const double *weights,
                               struct MwiMeasure **out);

/**
 * # Safety
 * `m` must be null or a handle from `mwi_measure_new` not yet freed.
 */
void mwi_measure_free(struct MwiMeasure *m);

/**
 * Number of distinct atoms (after merging), or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live measure handle.
 */
size_t mwi_measure_len(const struct MwiMeasure *m);

/**
 * # Safety
 * `m` must be null or a live measure handle.
 */
size_t mwi_measure_dim(const struct MwiMeasure *m);

/**
 * `W_rho` for the `L^norm_r` norm (`INFINITY` selects the sup norm).
 *
 * # Safety
 * `mu`, `nu` must be live handles and `out` writable.
 */
enum MwiStatus mwi_wasserstein(const struct MwiMeasure *mu,
                               const struct MwiMeasure *nu,
                               double rho,
                               double norm_r,
                               double *out);

/**
 * `M_rho`; when `coupling` is non-null an optimal coupling handle is stored there.
 *
 * # Safety
 * `mu`, `nu` must be live handles, `out` writable, `coupling` null or writable.
 */
enum MwiStatus mwi_martingale_cost(const struct MwiMeasure *mu,
                                   const struct MwiMeasure *nu,
                                   double rho,
                                   double norm_r,
                                   double *out,
                                   struct MwiCoupling **coupling);

/**
 * Cost `sum m_ij |x_i - y_j|^rho` of the inverse-transform martingale
 * coupling of two measures on the line.
 *
 * # Safety
 * `mu`, `nu` must be live handles and `out` writable.
 */
enum MwiStatus mwi_itm_cost(const struct MwiMeasure *mu,
                            const struct MwiMeasure *nu,
                            double rho,
                            enum MwiQChoice q,
                            double *out);

/**
 * # Safety
 * `c` must be null or a live coupling handle.
 */
size_t mwi_coupling_rows(const struct MwiCoupling *c);

/**
 * # Safety
 * `c` must be null or a live coupling handle.
 */
size_t mwi_coupling_cols(const struct MwiCoupling *c);

/**
 * Copies the `rows * cols` weights, row-major, into `out`.
 *
 * # Safety
 * `c` must be a live handle and `out` valid for `len` writes.
 */
enum MwiStatus mwi_coupling_weights(const struct MwiCoupling *c, double *out, size_t len);

/**
 * # Safety
 * `c` must be null or a coupling handle not yet freed.
 */
void mwi_coupling_free(struct MwiCoupling *c);

/**
 * `sigma_rho` and a minimising centre (`dim` values written to `center`, which may be null).
 *
 * # Safety
 * `m` must be a live handle, `sigma` writable, `center` null or valid for `dim` writes.
 */
enum MwiStatus mwi_centred_moment(const struct MwiMeasure *m,
                                  double rho,
                                  double norm_r,
                                  double *sigma,
                                  double *center);

/**
 * Stores whether `mu <=_cx nu` in `ordered`.
 *
 * # Safety
 * `mu`, `nu` must be live handles and `ordered` writable.
 */
enum MwiStatus mwi_cx_check(const struct MwiMeasure *mu,
                            const struct MwiMeasure *nu,
                            bool *ordered);

/**
 * `K_rho` with its bounds; `gamma_step` is the grid spacing (1e-4 is a good default).
 *
 * # Safety
 * `out` must be writable.
 */
enum MwiStatus mwi_k_rho(double rho, double gamma_step, struct MwiConstants *out);

/**
 * Inequality report for an ordered pair. `lambda` is read for [`MwiCase::Scaling`] only.
 *
 * # Safety
 * `mu`, `nu` must be live handles and `out` writable.
 */
enum MwiStatus mwi_verify_pair(const struct MwiMeasure *mu,
                               const struct MwiMeasure *nu,
                               double rho,
                               double norm_r,
                               enum MwiCase case_,
                               double lambda,
                               struct MwiReport *out);

/**
 * Message of the last failure on this thread; empty if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mwi_last_error(void);

/**
 * Static description of a status code.
 */
const char *mwi_status_string(enum MwiStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWI_H */
