#ifndef AROUSALNET_H
#define AROUSALNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum AnStatus {
  AN_STATUS_OK = 0,
  // A required pointer was null.
  AN_STATUS_NULL_POINTER = 1,
  AN_STATUS_INVALID_ARGUMENT = 2,
  // Array sizes disagree with each other or with the model.
  AN_STATUS_SHAPE = 3,
  AN_STATUS_IO = 4,
  // A file is truncated, malformed or of the wrong type.
  AN_STATUS_FORMAT = 5,
  AN_STATUS_CHECKSUM = 6,
  AN_STATUS_KIND_MISMATCH = 7,
  AN_STATUS_NON_FINITE = 8,
  // Scoring needs at least one arousal sample.
  AN_STATUS_NO_POSITIVES = 9,
  // A bug inside the library; the message says where.
  AN_STATUS_INTERNAL = 10,
} AnStatus;

// Loaded model or ensemble.
typedef struct AnModel AnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a
// success. Valid until the next call on the same thread.
const char *an_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *an_version(void);

// Loads a model or ensemble file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum AnStatus an_model_load(const char *path, struct AnModel **out);

// Releases a handle from [`an_model_load`]. Null is ignored.
//
// # Safety
// `model` must come from [`an_model_load`] and not be used afterwards.
void an_model_free(struct AnModel *model);

// Member count and input geometry `(channels, window length)`.
//
// # Safety
// `model` must be a live handle; the out pointers must be writable.
enum AnStatus an_model_info(const struct AnModel *model,
                            size_t *members,
                            size_t *channels,
                            size_t *window_len);

// Arousal probability per window, averaged over members.
//
// `windows` holds `n` windows laid out `[n][channels][window_len]`; `out`
// receives `n` values.
//
// # Safety
// `model` must be a live handle and the arrays must hold the stated sizes.
enum AnStatus an_model_predict_windows(struct AnModel *model,
                                       const float *windows,
                                       size_t n,
                                       size_t channels,
                                       size_t window_len,
                                       float *out);

// Full inference on one raw recording: normalize, decimate, window,
// predict and spread window scores back over samples.
//
// `signal` is channel-major, `[channels][n_samples]`, at `fs` Hz; `out`
// receives `n_samples` probabilities.
//
// # Safety
// `model` must be a live handle and the arrays must hold the stated sizes.
enum AnStatus an_model_predict_record(struct AnModel *model,
                                      const float *signal,
                                      size_t channels,
                                      size_t n_samples,
                                      double fs,
                                      float *out);

// Gross AUPRC of scores against labels in `{-1, 0, 1}`; `-1` is skipped.
//
// # Safety
// `scores` and `labels` must hold `n` elements; `out` must be writable.
enum AnStatus an_gross_auprc(const double *scores, const int8_t *labels, size_t n, double *out);

// Gross AUROC, same conventions as [`an_gross_auprc`].
//
// # Safety
// `scores` and `labels` must hold `n` elements; `out` must be writable.
enum AnStatus an_gross_auroc(const double *scores, const int8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AROUSALNET_H */
