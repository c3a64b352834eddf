#ifndef SMEM_H
#define SMEM_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SMEM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SMEM_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SMEM_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad lengths, shapes, ids or probability vectors.
   */
  SMEM_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Spec text, strategy name or configuration rejected.
   */
  SMEM_STATUS_INVALID_CONFIG = 4,
  /**
   * All-zero output or NaN score.
   */
  SMEM_STATUS_NUMERIC = 5,
  SMEM_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary. Indicates a bug.
   */
  SMEM_STATUS_PANIC = 7,
} SmemStatus;

/**
 * Trained or freshly initialized tri-branch model.
 */
typedef struct SmemModel SmemModel;

/**
 * Outcome of `smem_run_spec`: the aggregate CSV text.
 */
typedef struct SmemRun SmemRun;

/**
 * Hyper-parameters for `smem_score`. Obtain defaults from
 * `smem_acquisition_params_default`.
 */
typedef struct {
  double alpha;
  double beta;
  double gamma;
  /**
   * Use epsilon-smoothed KL instead of returning +inf on support mismatch.
   */
  bool smoothed_kl;
} SmemAcquisitionParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *smem_version(void);

/**
 * Message for the most recent failure on this thread, or "" if none.
 * Valid until the next failing call on the same thread.
 */
const char *smem_last_error(void);

SmemAcquisitionParams smem_acquisition_params_default(void);

/**
 * Sum-normalizes `k` raw outputs in `[0, 1]` into `out`.
 *
 * # Safety
 * `raw` must point to `k` readable doubles and `out` to `k` writable doubles.
 */
SmemStatus smem_normalize(const double *raw, size_t k, double *out);

/**
 * Shannon entropy (nats) of a probability vector.
 *
 * # Safety
 * `p` must point to `k` readable doubles; `out` must be writable.
 */
SmemStatus smem_entropy(const double *p, size_t k, double *out);

/**
 * `KL(p || q)`. Without smoothing the result is +inf when `q` misses
 * support of `p`.
 *
 * # Safety
 * `p` and `q` must point to `k` readable doubles; `out` must be writable.
 */
SmemStatus smem_kl_div(const double *p, const double *q, size_t k, bool smoothed, double *out);

/**
 * Jensen-Shannon divergence (nats), in `[0, ln 2]`.
 *
 * # Safety
 * `p` and `q` must point to `k` readable doubles; `out` must be writable.
 */
SmemStatus smem_jsd(const double *p, const double *q, size_t k, double *out);

/**
 * Scores one sample from its raw main, visual and question head outputs.
 * `strategy` is one of the lowercase strategy names (e.g. "smem_full").
 * `params` may be null for defaults. `seed` only affects "random".
 *
 * # Safety
 * `strategy` must be a NUL-terminated string; `main`, `visual` and
 * `question` must point to `k` readable doubles; `out` must be writable.
 */
SmemStatus smem_score(const char *strategy,
                      const double *main,
                      const double *visual,
                      const double *question,
                      size_t k,
                      uint64_t sample_id,
                      uint64_t seed,
                      const SmemAcquisitionParams *params,
                      double *out);

/**
 * Writes the `b` ids with the highest scores to `out_ids`, ordered by
 * descending score then ascending id.
 *
 * # Safety
 * `ids` and `scores` must point to `n` readable elements; `out_ids` must
 * have room for `b` ids.
 */
SmemStatus smem_select_top_b(const uint64_t *ids,
                             const double *scores,
                             size_t n,
                             size_t b,
                             uint64_t *out_ids);

/**
 * `min(counts[predicted] / 3, 1)`.
 *
 * # Safety
 * `counts` must point to `k` readable integers; `out` must be writable.
 */
SmemStatus smem_vqa_accuracy(size_t predicted, const uint32_t *counts, size_t k, double *out);

/**
 * Creates a freshly initialized model. Free with `smem_model_free`.
 *
 * # Safety
 * `out` must be writable.
 */
SmemStatus smem_model_new(size_t dim_v,
                          size_t dim_q,
                          size_t hidden,
                          size_t num_classes,
                          uint64_t seed,
                          SmemModel **out);

/**
 * Loads a model from a parameter checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
SmemStatus smem_model_load(const char *path, SmemModel **out);

/**
 * Writes the model's parameters to a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
SmemStatus smem_model_save(const SmemModel *model, const char *path);

/**
 * Reports the model's input widths, hidden width and class count. Any
 * out-pointer may be null.
 *
 * # Safety
 * `model` must be a live handle; non-null out-pointers must be writable.
 */
SmemStatus smem_model_dims(const SmemModel *model,
                           size_t *dim_v,
                           size_t *dim_q,
                           size_t *hidden,
                           size_t *num_classes);

/**
 * Runs the forward pass and writes the three sigmoid output vectors.
 * Any of `main`, `visual`, `question` may be null to skip that head.
 *
 * # Safety
 * `model` must be a live handle; `x_v` and `x_q` must point to `dim_v` and
 * `dim_q` readable doubles; non-null outputs must have room for `k` doubles.
 */
SmemStatus smem_model_predict(const SmemModel *model,
                              const double *x_v,
                              size_t dim_v,
                              const double *x_q,
                              size_t dim_q,
                              double *main,
                              double *visual,
                              double *question,
                              size_t k);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must come from `smem_model_new`/`smem_model_load` and not have
 * been freed.
 */
void smem_model_free(SmemModel *model);

/**
 * Runs an experiment grid from TOML spec text. `output_dir` overrides the
 * spec's output directory when non-null. Free with `smem_run_free`.
 *
 * # Safety
 * `spec_toml` and non-null `output_dir` must be NUL-terminated strings;
 * `out` must be writable.
 */
SmemStatus smem_run_spec(const char *spec_toml,
                         const char *output_dir,
                         size_t workers,
                         SmemRun **out);

/**
 * Aggregate CSV text of a finished run; owned by the handle.
 *
 * # Safety
 * `run` must be a live handle or null (returns null).
 */
const char *smem_run_csv(const SmemRun *run);

/**
 * Number of data rows in the aggregate CSV.
 *
 * # Safety
 * `run` must be a live handle or null (returns 0).
 */
size_t smem_run_rows(const SmemRun *run);

/**
 * Releases a run handle. Null is a no-op.
 *
 * # Safety
 * `run` must come from `smem_run_spec` and not have been freed.
 */
void smem_run_free(SmemRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMEM_H */
