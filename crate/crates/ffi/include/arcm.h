#ifndef ARCM_H
#define ARCM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArcmAcceptance {
  ARCM_ACCEPTANCE_VERY_SUCCESS = 0,
  ARCM_ACCEPTANCE_SUCCESS = 1,
  ARCM_ACCEPTANCE_FAIL = 2,
} ArcmAcceptance;

typedef enum ArcmOptimizer {
  ARCM_OPTIMIZER_ARCM = 0,
  ARCM_OPTIMIZER_ARC = 1,
  ARCM_OPTIMIZER_CR = 2,
  ARCM_OPTIMIZER_CRM = 3,
  ARCM_OPTIMIZER_TR = 4,
} ArcmOptimizer;

typedef enum ArcmSolver {
  ARCM_SOLVER_EXACT = 0,
  ARCM_SOLVER_KRYLOV = 1,
  ARCM_SOLVER_CAUCHY = 2,
} ArcmSolver;

typedef enum ArcmStatus {
  ARCM_STATUS_OK = 0,
  ARCM_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument or configuration value.
   */
  ARCM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numeric breakdown or solver failure.
   */
  ARCM_STATUS_NUMERIC = 3,
  ARCM_STATUS_IO = 4,
  /**
   * Malformed input file.
   */
  ARCM_STATUS_PARSE = 5,
  ARCM_STATUS_OUT_OF_RANGE = 6,
  ARCM_STATUS_PANIC = 7,
} ArcmStatus;

typedef enum ArcmStopReason {
  ARCM_STOP_REASON_GRAD_TOL = 0,
  ARCM_STOP_REASON_MAX_ITER = 1,
  ARCM_STOP_REASON_MAX_SECONDS = 2,
  ARCM_STOP_REASON_STAGNATION = 3,
  ARCM_STOP_REASON_ERROR = 4,
} ArcmStopReason;

/**
 * Opaque dataset handle.
 */
typedef struct ArcmDataset ArcmDataset;

/**
 * Opaque objective handle.
 */
typedef struct ArcmObjective ArcmObjective;

/**
 * Opaque handle to a finished run.
 */
typedef struct ArcmTrace ArcmTrace;

/**
 * Algorithm hyperparameters. Start from [`arcm_params_default`].
 */
typedef struct ArcmParams {
  double gamma1;
  double gamma2;
  double gamma3;
  double eta1;
  double eta2;
  double sigma0;
  double sigma_min;
  double tau;
  double alpha1;
  double alpha2;
  size_t krylov_max_dim;
  uint32_t momentum_halvings;
  double fixed_m;
  double tr_radius0;
  double tr_radius_max;
} ArcmParams;

/**
 * Stopping rules. `max_seconds <= 0` means no time limit.
 */
typedef struct ArcmStop {
  double grad_tol;
  size_t max_iter;
  double max_seconds;
} ArcmStop;

/**
 * One row of a trace.
 */
typedef struct ArcmRecord {
  size_t k;
  double f;
  double grad_norm;
  double sigma;
  double step_norm;
  double rho;
  enum ArcmAcceptance accepted;
  double beta;
  int8_t momentum_sign;
  size_t krylov_dim;
  double model_decrease;
  double wall_time_s;
} ArcmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *arcm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *arcm_version(void);

struct ArcmParams arcm_params_default(void);

struct ArcmStop arcm_stop_default(void);

/**
 * Seeded synthetic data. `classification` selects 0/1 labels with
 * `label_noise` flips; otherwise heavy-tailed regression targets.
 */
enum ArcmStatus arcm_dataset_synthetic(size_t n,
                                       size_t d,
                                       bool classification,
                                       double label_noise,
                                       uint64_t seed,
                                       struct ArcmDataset **out);

enum ArcmStatus arcm_dataset_load_libsvm(const char *path, struct ArcmDataset **out);

/**
 * `label_col` is the 0-based column holding the label.
 */
enum ArcmStatus arcm_dataset_load_csv(const char *path, size_t label_col, struct ArcmDataset **out);

/**
 * Number of samples; 0 for a null handle.
 */
size_t arcm_dataset_len(const struct ArcmDataset *ds);

/**
 * Number of features; 0 for a null handle.
 */
size_t arcm_dataset_dim(const struct ArcmDataset *ds);

void arcm_dataset_free(struct ArcmDataset *ds);

/**
 * Nonconvex-regularized logistic regression. The dataset handle may be
 * freed afterwards; the objective keeps its own reference.
 */
enum ArcmStatus arcm_objective_logistic(const struct ArcmDataset *ds,
                                        double chi,
                                        struct ArcmObjective **out);

enum ArcmStatus arcm_objective_robust(const struct ArcmDataset *ds, struct ArcmObjective **out);

/**
 * Seeded random positive definite quadratic with condition number 100.
 */
enum ArcmStatus arcm_objective_quadratic(size_t dim, uint64_t seed, struct ArcmObjective **out);

enum ArcmStatus arcm_objective_rosenbrock(size_t dim, struct ArcmObjective **out);

/**
 * Dimension; 0 for a null handle.
 */
size_t arcm_objective_dim(const struct ArcmObjective *obj);

enum ArcmStatus arcm_objective_value(const struct ArcmObjective *obj,
                                     const double *x,
                                     size_t len,
                                     double *out);

/**
 * Writes the gradient at `x` into `grad` (both of length `len`).
 */
enum ArcmStatus arcm_objective_gradient(const struct ArcmObjective *obj,
                                        const double *x,
                                        size_t len,
                                        double *grad);

void arcm_objective_free(struct ArcmObjective *obj);

/**
 * Minimizes `obj` from `x0`. `params` and `stop` may be null for defaults.
 * A run that ends in numeric breakdown still yields a trace, with stop
 * reason `ARCM_STOP_REASON_ERROR`.
 */
enum ArcmStatus arcm_run(const struct ArcmObjective *obj,
                         enum ArcmOptimizer optimizer,
                         enum ArcmSolver solver,
                         const double *x0,
                         size_t len,
                         const struct ArcmParams *params,
                         const struct ArcmStop *stop,
                         struct ArcmTrace **out);

/**
 * Number of recorded iterations; 0 for a null handle.
 */
size_t arcm_trace_len(const struct ArcmTrace *t);

/**
 * Number of successful iterations; 0 for a null handle.
 */
size_t arcm_trace_successful(const struct ArcmTrace *t);

enum ArcmStatus arcm_trace_stop_reason(const struct ArcmTrace *t, enum ArcmStopReason *out);

/**
 * Final objective value and gradient norm; either output may be null.
 */
enum ArcmStatus arcm_trace_final(const struct ArcmTrace *t, double *f, double *grad_norm);

/**
 * Copies the final iterate into `x` (length `len`, equal to the dimension).
 */
enum ArcmStatus arcm_trace_final_x(const struct ArcmTrace *t, double *x, size_t len);

enum ArcmStatus arcm_trace_record(const struct ArcmTrace *t, size_t index, struct ArcmRecord *out);

/**
 * Writes the trace in the CLI's CSV format.
 */
enum ArcmStatus arcm_trace_write_csv(const struct ArcmTrace *t, const char *path);

void arcm_trace_free(struct ArcmTrace *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARCM_H */
