#ifndef MASKBENCH_H
#define MASKBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call in this header.
 */
typedef enum {
  MB_OK = 0,
  /**
   * Input files missing or malformed, or a numeric precondition failed.
   */
  MB_DATA_ERROR = 1,
  /**
   * The run configuration itself is invalid.
   */
  MB_CONFIG_ERROR = 2,
  /**
   * A verification run completed but its checks did not pass.
   */
  MB_ASSERTION_FAILED = 3,
  MB_NULL_POINTER = 4,
  /**
   * An argument was out of range or not understood (bad tag, bad UTF-8).
   */
  MB_INVALID_ARG = 5,
  /**
   * Internal panic; the library state is still sound, the call did nothing.
   */
  MB_PANIC = 6,
} MbStatus;

/**
 * A trained classifier behind an opaque handle.
 */
typedef struct MbModel MbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if the
 * last call succeeded. The pointer stays valid until the next failing
 * call on the same thread.
 */
const char *mb_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *mb_version(void);

/**
 * Runs the pipeline end to end and writes all artifacts to `out_dir`.
 *
 * `config_path` may be null to use `./config.toml` when present and
 * built-in defaults otherwise. A non-negative `seed_override` replaces
 * the configured seed. `tuned` selects the hyperparameter-searched run;
 * otherwise every learner uses its default settings.
 *
 * # Safety
 * `config_path` must be null or a valid nul-terminated string, and
 * `out_dir` a valid nul-terminated string.
 */
MbStatus mb_run_pipeline(const char *config_path,
                         const char *out_dir,
                         int64_t seed_override,
                         bool tuned);

/**
 * Generates synthetic inputs in `work_dir`, runs the pipeline over
 * them, and checks that known labels are recovered. With `shuffle`
 * set, covariates are permuted across counties and every learner must
 * fall back to chance-level accuracy instead.
 *
 * Returns `MB_ASSERTION_FAILED` when the run completes but a check
 * fails; the error text names the first offending learner.
 *
 * # Safety
 * `work_dir` must be a valid nul-terminated string.
 */
MbStatus mb_synth_check(uintptr_t n_counties,
                        double class_balance,
                        double noise_scale,
                        uint64_t seed,
                        const char *work_dir,
                        bool shuffle);

/**
 * Trains one classifier on a row-major matrix.
 *
 * `algorithm` is one of the bench tags (`naive_bayes`,
 * `logistic_regression`, `knn`, `decision_tree`, `random_forest`,
 * `extra_trees`, `gradient_boosting`, `svm_rbf`, `mlp`). `x` holds
 * `n_rows * n_cols` values; `y` holds `n_rows` labels where nonzero
 * means the positive class. On success `*out_model` owns the model and
 * must be released with [`mb_model_free`].
 *
 * # Safety
 * `algorithm` must be a valid nul-terminated string, `x` must point to
 * `n_rows * n_cols` readable doubles, `y` to `n_rows` readable bytes,
 * and `out_model` to a writable pointer slot.
 */
MbStatus mb_train(const char *algorithm,
                  const double *x,
                  uintptr_t n_rows,
                  uintptr_t n_cols,
                  const uint8_t *y,
                  uint64_t seed,
                  MbModel **out_model);

/**
 * Scores a row-major matrix with a trained model, writing one value in
 * [0, 1] per row to `out_scores`.
 *
 * # Safety
 * `model` must come from a successful [`mb_train`] and not yet be
 * freed, `x` must point to `n_rows * n_cols` readable doubles, and
 * `out_scores` to `n_rows` writable doubles.
 */
MbStatus mb_predict_scores(const MbModel *model,
                           const double *x,
                           uintptr_t n_rows,
                           uintptr_t n_cols,
                           double *out_scores);

/**
 * Releases a model returned by [`mb_train`]. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer from [`mb_train`] that has not
 * been freed already.
 */
void mb_model_free(MbModel *model);

/**
 * Area under the ROC curve for scores against byte labels (nonzero
 * means positive). Both classes must be present.
 *
 * # Safety
 * `scores` must point to `n` readable doubles, `labels` to `n`
 * readable bytes, and `out_auc` to a writable double.
 */
MbStatus mb_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out_auc);

/**
 * Half-width of the Wald confidence interval for an accuracy measured
 * on `n_test` samples at critical value `z`.
 *
 * # Safety
 * `out_half_width` must point to a writable double.
 */
MbStatus mb_wald_ci(double score, uintptr_t n_test, double z, double *out_half_width);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MASKBENCH_H */
