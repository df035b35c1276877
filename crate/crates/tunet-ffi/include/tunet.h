#ifndef TUNET_H
#define TUNET_H

/* Generated by cbindgen from the tunet-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum TunetStatus {
  TUNET_STATUS_OK = 0,
  TUNET_STATUS_NULL_ARGUMENT = 1,
  TUNET_STATUS_INVALID_CONFIG = 2,
  TUNET_STATUS_IO = 3,
  TUNET_STATUS_BAD_CHECKPOINT = 4,
  TUNET_STATUS_SHAPE_MISMATCH = 5,
  TUNET_STATUS_BUFFER_TOO_SMALL = 6,
  TUNET_STATUS_PANIC = 7,
} TunetStatus;

/**
 * Opaque model handle: architecture, parameters, and the normalization
 * statistics the checkpoint carried (if any).
 */
typedef struct TunetModel TunetModel;

/**
 * Architecture description for `tunet_model_new`.
 */
typedef struct TunetConfig {
  uintptr_t input_channels;
  uintptr_t series_length;
  uintptr_t num_classes;
  uintptr_t depth;
  uintptr_t base_channels;
  uintptr_t conv_kernel;
  uint64_t seed;
} TunetConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a freshly initialized model from an architecture description.
 *
 * # Safety
 * `config` and `out` must be valid, non-null pointers.
 */
enum TunetStatus tunet_model_new(const struct TunetConfig *config, struct TunetModel **out);

/**
 * Load a model (and any stored normalization statistics) from a checkpoint.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` non-null.
 */
enum TunetStatus tunet_model_load(const char *path, struct TunetModel **out);

/**
 * Save the model to a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle; `path` a valid NUL-terminated string.
 */
enum TunetStatus tunet_model_save(const struct TunetModel *model, const char *path);

/**
 * Release a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void tunet_model_free(struct TunetModel *model);

/**
 * Number of time samples the model consumes per series (0 on null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t tunet_model_series_length(const struct TunetModel *model);

/**
 * Input channels (CSI carriers) per sample (0 on null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t tunet_model_input_channels(const struct TunetModel *model);

/**
 * Output classes (0 on null).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t tunet_model_num_classes(const struct TunetModel *model);

/**
 * Label every sample of one series.
 *
 * `input` holds `input_channels * series_length` raw values in (channel,
 * time) row-major order; the model's stored normalization statistics are
 * applied when present. `confidences` receives `num_classes *
 * series_length` per-class probabilities in (class, time) order and
 * `labels` receives `series_length` argmax class ids.
 *
 * # Safety
 * All pointers must be valid for the stated lengths.
 */
enum TunetStatus tunet_predict(const struct TunetModel *model,
                               const float *input,
                               uintptr_t input_len,
                               float *confidences,
                               uintptr_t confidences_len,
                               uint32_t *labels,
                               uintptr_t labels_len);

/**
 * Copy the last error message for this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be valid for `cap` bytes, or null (to query the length).
 */
uintptr_t tunet_last_error(char *buf, uintptr_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TUNET_H */
