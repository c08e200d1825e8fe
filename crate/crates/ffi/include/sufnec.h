#ifndef SUFNEC_H
#define SUFNEC_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum SufnecStatus {
  SUFNEC_STATUS_OK = 0,
  SUFNEC_STATUS_NULL_POINTER = 1,
  SUFNEC_STATUS_INVALID_STRING = 2,
  SUFNEC_STATUS_SHAPE = 3,
  SUFNEC_STATUS_SINGULAR = 4,
  SUFNEC_STATUS_CONDITIONING = 5,
  SUFNEC_STATUS_CAPABILITY = 6,
  SUFNEC_STATUS_DOMAIN = 7,
  SUFNEC_STATUS_BUDGET = 8,
  SUFNEC_STATUS_CONFIG = 9,
  SUFNEC_STATUS_DEGENERATE_INPUT = 10,
  SUFNEC_STATUS_IO = 11,
  SUFNEC_STATUS_PARSE = 12,
  SUFNEC_STATUS_BUFFER_TOO_SMALL = 13,
  SUFNEC_STATUS_PANIC = 14,
} SufnecStatus;

typedef enum SufnecEmpiricalMode {
  SUFNEC_EMPIRICAL_MODE_JOINT_ROW_RESAMPLE = 0,
  SUFNEC_EMPIRICAL_MODE_PER_FEATURE_MARGINAL = 1,
} SufnecEmpiricalMode;

typedef enum SufnecMetric {
  SUFNEC_METRIC_ABSOLUTE_DIFFERENCE = 0,
  SUFNEC_METRIC_SQUARED_DIFFERENCE = 1,
} SufnecMetric;

typedef enum SufnecStrategy {
  SUFNEC_STRATEGY_EXHAUSTIVE = 0,
  SUFNEC_STRATEGY_GREEDY_FORWARD = 1,
  SUFNEC_STRATEGY_RELAXED_MASK = 2,
} SufnecStrategy;

/**
 * Opaque predictor.
 */
typedef struct SufnecModel SufnecModel;

/**
 * Opaque reference distribution.
 */
typedef struct SufnecReference SufnecReference;

/**
 * Deviations of one subset, with Monte-Carlo standard errors.
 */
typedef struct SufnecDeviations {
  double prediction;
  double delta_suf;
  double delta_nec;
  double delta_uni;
  double stderr_suf;
  double stderr_nec;
  double stderr_uni;
} SufnecDeviations;

/**
 * Solver settings. `grid_height * grid_width` must equal the dimension when
 * the relaxed strategy is used; 0 for both means no grid.
 */
typedef struct SufnecSolverOptions {
  size_t tau;
  double alpha;
  size_t samples;
  uint64_t seed;
  enum SufnecStrategy strategy;
  enum SufnecMetric metric;
  size_t grid_height;
  size_t grid_width;
} SufnecSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *sufnec_last_error(void);

/**
 * Linear model `w·x + b`.
 *
 * # Safety
 * `weights` points to `dim` doubles; `out` is writable.
 */
enum SufnecStatus sufnec_model_linear_new(const double *weights,
                                          size_t dim,
                                          double intercept,
                                          struct SufnecModel **out);

/**
 * Model from its JSON document.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum SufnecStatus sufnec_model_from_json(const char *json, struct SufnecModel **out);

/**
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum SufnecStatus sufnec_model_load(const char *path, struct SufnecModel **out);

/**
 * Input dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t sufnec_model_dimension(const struct SufnecModel *model);

/**
 * # Safety
 * `model` is a live handle, `x` points to `dim` doubles and `out` is writable.
 */
enum SufnecStatus sufnec_model_predict(const struct SufnecModel *model,
                                       const double *x,
                                       size_t dim,
                                       double *out);

/**
 * # Safety
 * `model` is null or a handle not yet freed.
 */
void sufnec_model_free(struct SufnecModel *model);

/**
 * Gaussian reference `N(mean, cov)`.
 *
 * # Safety
 * `mean` points to `dim` doubles, `cov` to `dim * dim`; `out` is writable.
 */
enum SufnecStatus sufnec_reference_gaussian_new(const double *mean,
                                                const double *cov,
                                                size_t dim,
                                                struct SufnecReference **out);

/**
 * Gaussian reference from its JSON document.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum SufnecStatus sufnec_reference_gaussian_from_json(const char *json,
                                                      struct SufnecReference **out);

/**
 * Fixed baseline values.
 *
 * # Safety
 * `values` points to `dim` doubles; `out` is writable.
 */
enum SufnecStatus sufnec_reference_constant_new(const double *values,
                                                size_t dim,
                                                struct SufnecReference **out);

/**
 * Rows of a data matrix as the reference.
 *
 * # Safety
 * `data` points to `rows * cols` doubles; `out` is writable.
 */
enum SufnecStatus sufnec_reference_empirical_new(const double *data,
                                                 size_t rows,
                                                 size_t cols,
                                                 enum SufnecEmpiricalMode mode,
                                                 struct SufnecReference **out);

/**
 * Dimension, or 0 for a null handle.
 *
 * # Safety
 * `reference` is null or a live handle.
 */
size_t sufnec_reference_dimension(const struct SufnecReference *reference);

/**
 * # Safety
 * `reference` is null or a handle not yet freed.
 */
void sufnec_reference_free(struct SufnecReference *reference);

/**
 * Sufficiency, necessity and unified deviations of the subset given by
 * `indices`.
 *
 * # Safety
 * Handles are live, `x` points to `dim` doubles, `indices` to `len` indices
 * and `out` is writable.
 */
enum SufnecStatus sufnec_deviations(const struct SufnecModel *model,
                                    const struct SufnecReference *reference,
                                    const double *x,
                                    size_t dim,
                                    const size_t *indices,
                                    size_t len,
                                    enum SufnecMetric metric_kind,
                                    double alpha,
                                    size_t samples,
                                    uint64_t seed,
                                    struct SufnecDeviations *out);

/**
 * Defaults matching the command-line solver.
 */
struct SufnecSolverOptions sufnec_solver_options_default(void);

/**
 * Solves the unified problem and writes the chosen 0-based indices into
 * `indices`. `*len` receives the subset size even when `capacity` is too
 * small, in which case the call fails with `BUFFER_TOO_SMALL`.
 *
 * # Safety
 * Handles are live, `x` points to `dim` doubles, `indices` to `capacity`
 * writable slots; `len` and `objective` are writable (`objective` may be
 * null).
 */
enum SufnecStatus sufnec_solve(const struct SufnecModel *model,
                               const struct SufnecReference *reference,
                               const double *x,
                               size_t dim,
                               const struct SufnecSolverOptions *options,
                               size_t *indices,
                               size_t capacity,
                               size_t *len,
                               double *objective);

/**
 * Shapley value of the subset in the two-player game against its
 * complement.
 *
 * # Safety
 * Handles are live, `x` points to `dim` doubles, `indices` to `len` indices
 * and `out` is writable.
 */
enum SufnecStatus sufnec_two_player_shapley(const struct SufnecModel *model,
                                            const struct SufnecReference *reference,
                                            const double *x,
                                            size_t dim,
                                            const size_t *indices,
                                            size_t len,
                                            enum SufnecMetric metric_kind,
                                            size_t samples,
                                            uint64_t seed,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUFNEC_H */
