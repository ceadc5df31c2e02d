#ifndef PASSIVE_GD_H
#define PASSIVE_GD_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PgdStatus {
  PGD_STATUS_OK = 0,
  PGD_STATUS_INVALID_ARGUMENT = 1,
  PGD_STATUS_NULL_POINTER = 2,
  PGD_STATUS_SHAPE = 3,
  PGD_STATUS_HORIZON_EXCEEDED = 4,
  PGD_STATUS_CONTRACTION_VIOLATION = 5,
  PGD_STATUS_DEGENERATE_SECTOR = 6,
  PGD_STATUS_ALGEBRAIC_LOOP = 7,
  PGD_STATUS_NON_CONVERGENCE = 8,
  PGD_STATUS_DIVERGENCE = 9,
  PGD_STATUS_LINE_SEARCH_FAILURE = 10,
  PGD_STATUS_IO = 11,
  PGD_STATUS_PANIC = 12,
} PgdStatus;

typedef enum PgdVerdict {
  PGD_VERDICT_STRONG = 0,
  PGD_VERDICT_WEAK = 1,
  PGD_VERDICT_NONE = 2,
} PgdVerdict;

typedef enum PgdClassification {
  PGD_CLASSIFICATION_PASSIVE = 0,
  PGD_CLASSIFICATION_ISP = 1,
  PGD_CLASSIFICATION_VSP = 2,
  PGD_CLASSIFICATION_NONE = 3,
} PgdClassification;

typedef enum PgdScheduleKind {
  PGD_SCHEDULE_KIND_FIXED_ALPHA = 0,
  PGD_SCHEDULE_KIND_FIXED_S = 1,
  PGD_SCHEDULE_KIND_ARMIJO_ALPHA = 2,
  PGD_SCHEDULE_KIND_ARMIJO_S = 3,
} PgdScheduleKind;

typedef enum PgdTermination {
  PGD_TERMINATION_GRAD_NORM = 0,
  PGD_TERMINATION_PAIRED_GRAD = 1,
  PGD_TERMINATION_MAX_ITER = 2,
} PgdTermination;

/**
 * Opaque sector-bounded objective.
 */
typedef struct PgdFunction PgdFunction;

/**
 * Opaque optimizer trace.
 */
typedef struct PgdTrace PgdTrace;

typedef struct PgdCertification {
  enum PgdVerdict verdict;
  /**
   * Candidate certificate scalar `1/alpha`.
   */
  double p;
  bool lmi_feasible;
  double delta;
  double epsilon;
  double d;
  /**
   * False when the transformed indices are undefined.
   */
  bool has_transformed;
  double delta_bar;
  double epsilon_bar;
  enum PgdClassification transformed_class;
} PgdCertification;

/**
 * Step-size or scheduling rule.
 *
 * `value` is the step for `FIXED_ALPHA`, the scheduling value for `FIXED_S`
 * and the cap for `ARMIJO_S` (ignored for `ARMIJO_ALPHA`). Non-positive
 * `armijo_*` fields select the library defaults.
 */
typedef struct PgdSchedule {
  enum PgdScheduleKind kind;
  double value;
  double armijo_initial;
  double armijo_shrink;
  double armijo_c;
} PgdSchedule;

/**
 * Stopping rules; a non-positive tolerance disables that rule and
 * `max_iter == 0` selects the default cap.
 */
typedef struct PgdStopping {
  double grad_tol;
  double paired_tol;
  size_t max_iter;
} PgdStopping;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a
 * successful call. Valid until the next library call on the same thread.
 */
const char *pgd_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *pgd_version(void);

/**
 * Creates a built-in function by name (`paper-oscillatory`, `quadratic`,
 * `diag-quadratic`).
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` valid for writes.
 */
enum PgdStatus pgd_function_new(const char *name, double m, double l, struct PgdFunction **out);

/**
 * # Safety
 * `f` must be null or a handle from [`pgd_function_new`] not yet freed.
 */
void pgd_function_free(struct PgdFunction *f);

/**
 * Dimension of the function, 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t pgd_function_dim(const struct PgdFunction *f);

/**
 * # Safety
 * `f` must be a live handle, `x` must hold `n` doubles and `out` be writable.
 */
enum PgdStatus pgd_function_value(const struct PgdFunction *f,
                                  const double *x,
                                  size_t n,
                                  double *out);

/**
 * Writes `∇f(x)` into `grad` (both of length `n`).
 *
 * # Safety
 * `f` must be a live handle, `x` readable and `grad` writable for `n` doubles.
 */
enum PgdStatus pgd_function_gradient(const struct PgdFunction *f,
                                     const double *x,
                                     size_t n,
                                     double *grad);

/**
 * Certifies step `alpha` for the sector class `(m, L)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PgdStatus pgd_certify_step_size(double m,
                                     double l,
                                     double alpha,
                                     struct PgdCertification *out);

/**
 * Runs gradient descent from `x0` (length `n`).
 *
 * # Safety
 * Pointers must be live/readable as documented; `out` must be writable.
 */
enum PgdStatus pgd_gd_run(const struct PgdFunction *f,
                          const double *x0,
                          size_t n,
                          const struct PgdSchedule *schedule,
                          const struct PgdStopping *stop,
                          struct PgdTrace **out);

/**
 * Runs gain-scheduled gradient descent from `x0` (length `n`).
 *
 * # Safety
 * Same contract as [`pgd_gd_run`].
 */
enum PgdStatus pgd_gsgd_run(const struct PgdFunction *f,
                            const double *x0,
                            size_t n,
                            const struct PgdSchedule *schedule,
                            const struct PgdStopping *stop,
                            struct PgdTrace **out);

/**
 * # Safety
 * `t` must be null or a live trace handle.
 */
void pgd_trace_free(struct PgdTrace *t);

/**
 * Number of updates performed; the trace holds one more iterate.
 *
 * # Safety
 * `t` must be null or a live trace handle.
 */
size_t pgd_trace_iterations(const struct PgdTrace *t);

/**
 * # Safety
 * `t` must be null or a live trace handle.
 */
size_t pgd_trace_dim(const struct PgdTrace *t);

/**
 * # Safety
 * `t` must be a live trace handle and `out` writable.
 */
enum PgdStatus pgd_trace_termination(const struct PgdTrace *t, enum PgdTermination *out);

/**
 * Copies iterate `k` (0 ≤ k ≤ iterations) into `out` of length `n`.
 *
 * # Safety
 * `t` must be a live trace handle and `out` writable for `n` doubles.
 */
enum PgdStatus pgd_trace_iterate(const struct PgdTrace *t, size_t k, double *out, size_t n);

/**
 * Copies the gradient at iterate `k` into `out` of length `n`.
 *
 * # Safety
 * Same contract as [`pgd_trace_iterate`].
 */
enum PgdStatus pgd_trace_gradient(const struct PgdTrace *t, size_t k, double *out, size_t n);

/**
 * Largest state deviation between plain GD and the loop-transformed
 * interconnection with `d = alpha/2` over `steps` steps.
 *
 * # Safety
 * `f` must be a live handle, `x0` readable for `n` doubles, `out` writable.
 */
enum PgdStatus pgd_loop_equivalence(const struct PgdFunction *f,
                                    double alpha,
                                    const double *x0,
                                    size_t n,
                                    size_t steps,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PASSIVE_GD_H */
