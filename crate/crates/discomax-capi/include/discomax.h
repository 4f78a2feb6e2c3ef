#ifndef DISCOMAX_H
#define DISCOMAX_H

/* Generated by cbindgen from discomax-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum DcmStatus {
  /**
   * Success.
   */
  DCM_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DCM_NULL_POINTER = 1,
  /**
   * An argument, dimension or configuration field was invalid.
   */
  DCM_INVALID_ARGUMENT = 2,
  /**
   * The computation failed (degenerate data, singular system, panic).
   */
  DCM_NUMERICAL_ERROR = 3,
} DcmStatus;

/**
 * Opaque fitted model: the training embedding plus the kernel maps used
 * to embed and predict unseen rows.
 */
typedef struct DcmModel DcmModel;

/**
 * Solver knobs, mirroring the library defaults. Fetch a valid baseline with
 * [`dcm_config_default`] and adjust fields from there.
 */
typedef struct DcmConfig {
  /**
   * Embedding dimension (2 <= dim < number of training rows).
   */
  size_t dim;
  /**
   * Outer minorize-maximize iteration cap.
   */
  size_t max_outer;
  /**
   * Fixed-point iteration cap per subproblem solve.
   */
  size_t t_max;
  /**
   * Outer stop: relative squared change of the embedding.
   */
  double outer_tol;
  /**
   * Fixed-point stop: absolute change of the subproblem objective.
   */
  double inner_tol;
  /**
   * Golden-section stop, relative to the initial bracket width.
   */
  double alpha_tol;
  /**
   * Multiplier (> 1) defining the dominating pencil.
   */
  double gamma_margin;
  /**
   * Relative ridge on the degree diagonal.
   */
  double ridge_eps;
  /**
   * Self-distance trace accepted iterates are rescaled to; leave at 1.
   */
  double rescale_margin;
  /**
   * Golden-section bracket top: 0 = conservative bound (default),
   * 1 = largest pencil eigenvalue.
   */
  int32_t alpha_bound;
} DcmConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dcm_version(void);

/**
 * Message describing the most recent failure on the calling thread, as a
 * NUL-terminated string. Never null; empty if nothing failed yet. The
 * pointer stays valid until the next library call on the same thread.
 */
const char *dcm_last_error(void);

/**
 * Writes the recommended solver configuration into `out`.
 *
 * # Safety
 * `out` must point to writable memory for one `DcmConfig`.
 */
enum DcmStatus dcm_config_default(struct DcmConfig *out);

/**
 * Squared distance correlation between two row-aligned samples:
 * `x` is `n` x `px` row-major, `y` is `n` x `py` row-major. Writes a value
 * in [0, 1] to `out`.
 *
 * # Safety
 * `x` must hold `n * px` doubles, `y` must hold `n * py` doubles, and
 * `out` must be writable.
 */
enum DcmStatus dcm_dcorr2(const double *x,
                          size_t n,
                          size_t px,
                          const double *y,
                          size_t py,
                          double *out);

/**
 * Fits an embedding model on training data: `x` is `n` x `p` row-major,
 * `y` holds `n` responses. `config` may be null for defaults. On success
 * writes an owned handle to `out_model`; the caller releases it with
 * [`dcm_model_free`].
 *
 * # Safety
 * `x` must hold `n * p` doubles, `y` must hold `n` doubles, `config` must
 * be null or point to a valid `DcmConfig`, and `out_model` must be
 * writable.
 */
enum DcmStatus dcm_model_fit(const double *x,
                             size_t n,
                             size_t p,
                             const double *y,
                             const struct DcmConfig *config,
                             struct DcmModel **out_model);

/**
 * Embedding dimension of a fitted model; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle from [`dcm_model_fit`].
 */
size_t dcm_model_dim(const struct DcmModel *model);

/**
 * Number of training rows baked into a fitted model; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle from [`dcm_model_fit`].
 */
size_t dcm_model_train_rows(const struct DcmModel *model);

/**
 * Final solver objective (sum of the two squared distance correlations);
 * NaN for null.
 *
 * # Safety
 * `model` must be null or a live handle from [`dcm_model_fit`].
 */
double dcm_model_objective(const struct DcmModel *model);

/**
 * Embeds `n_rows` unseen rows (`x` is `n_rows` x `p` row-major, `p` equal
 * to the training feature count). Writes `n_rows * dim` doubles, row-major,
 * to `out`.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `n_rows * p` doubles, and
 * `out` must have room for `n_rows * dim` doubles.
 */
enum DcmStatus dcm_model_embed(const struct DcmModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t p,
                               double *out);

/**
 * Predicts responses for `n_rows` unseen rows, in original response units.
 * Writes `n_rows` doubles to `out`.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `n_rows * p` doubles, and
 * `out` must have room for `n_rows` doubles.
 */
enum DcmStatus dcm_model_predict(const struct DcmModel *model,
                                 const double *x,
                                 size_t n_rows,
                                 size_t p,
                                 double *out);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle from [`dcm_model_fit`] that has not
 * already been freed.
 */
void dcm_model_free(struct DcmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISCOMAX_H */
