#ifndef AESA_H
#define AESA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of scores written by the predict functions, in `PQ, PC, CE, CU` order.
 */
#define AESA_AXIS_COUNT 4

typedef enum AesaStatus {
  AESA_STATUS_OK = 0,
  AESA_STATUS_NULL_POINTER = 1,
  AESA_STATUS_INVALID_ARGUMENT = 2,
  AESA_STATUS_FORMAT = 3,
  AESA_STATUS_SHAPE = 4,
  AESA_STATUS_IO = 5,
  AESA_STATUS_NON_FINITE = 6,
  AESA_STATUS_UNDEFINED_METRIC = 7,
  AESA_STATUS_PANIC = 8,
} AesaStatus;

/**
 * Opaque model handle.
 */
typedef struct AesaModel AesaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a checkpoint file. On success `*out` owns a handle that must be
 * released with [`aesa_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AesaStatus aesa_model_load(const char *path, struct AesaModel **out);

/**
 * Release a handle from [`aesa_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle not freed before.
 */
void aesa_model_free(struct AesaModel *model);

/**
 * Feature dimension the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t aesa_model_input_dim(const struct AesaModel *model);

/**
 * Number of frontend layers the model fuses, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t aesa_model_layer_count(const struct AesaModel *model);

/**
 * Predict raw-scale scores for a row-major `layers × frames × dims` float
 * buffer. Writes four values (`PQ, PC, CE, CU`) to `out`.
 *
 * # Safety
 * `values` must point to `layers * frames * dims` floats and `out` to room for
 * [`AESA_AXIS_COUNT`] doubles.
 */
enum AesaStatus aesa_model_predict(const struct AesaModel *model,
                                   const float *values,
                                   size_t layers,
                                   size_t frames,
                                   size_t dims,
                                   double *out);

/**
 * Predict raw-scale scores for a layer-stack file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` point to room for
 * [`AESA_AXIS_COUNT`] doubles.
 */
enum AesaStatus aesa_model_predict_file(const struct AesaModel *model,
                                        const char *path,
                                        double *out);

/**
 * Pearson correlation of two length-`n` arrays.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `out` must be writable.
 */
enum AesaStatus aesa_metric_pcc(const double *x, const double *y, size_t n, double *out);

/**
 * Spearman correlation with average ranks for ties.
 *
 * # Safety
 * Same contract as [`aesa_metric_pcc`].
 */
enum AesaStatus aesa_metric_srcc(const double *x, const double *y, size_t n, double *out);

/**
 * Kendall tau-b.
 *
 * # Safety
 * Same contract as [`aesa_metric_pcc`].
 */
enum AesaStatus aesa_metric_ktau(const double *x, const double *y, size_t n, double *out);

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next `aesa_*` call on the same thread.
 */
const char *aesa_last_error_message(void);

/**
 * Static name of axis `index` (`0..4` → `PQ, PC, CE, CU`), or null.
 */
const char *aesa_axis_name(size_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AESA_H */
