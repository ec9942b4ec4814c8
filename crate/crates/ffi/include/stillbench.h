#ifndef STILLBENCH_H
#define STILLBENCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_UTF8 = 2,
  SB_STATUS_DIMENSION = 3,
  SB_STATUS_CONFIG = 4,
  SB_STATUS_VALIDATION = 5,
  SB_STATUS_IO = 6,
  SB_STATUS_FORMAT = 7,
  SB_STATUS_EMPTY_BANK = 8,
  SB_STATUS_NON_FINITE = 9,
  SB_STATUS_PANIC = 10,
  SB_STATUS_OTHER = 11,
} SbStatus;

/**
 * A clip or mask of `C x T x H x W` 32-bit reals.
 */
typedef struct SbVideo SbVideo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sb_last_error_message(void);

/**
 * Copies `c*t*h*w` values from `data` into a new video.
 *
 * # Safety
 * `data` must point to that many readable floats; `out` must be writable.
 */
enum SbStatus sb_video_new(size_t c,
                           size_t t,
                           size_t h,
                           size_t w,
                           const float *data,
                           struct SbVideo **out);

/**
 * Writes `[C, T, H, W]` into `dims`.
 *
 * # Safety
 * `video` must come from this library; `dims` must hold four values.
 */
enum SbStatus sb_video_dims(const struct SbVideo *video, size_t *dims);

/**
 * Read-only view of the values in C, T, H, W order; valid while the
 * video lives. Null for a null handle.
 *
 * # Safety
 * `video` must be null or come from this library.
 */
const float *sb_video_data(const struct SbVideo *video);

/**
 * # Safety
 * `video` must be null or come from this library, and not be used again.
 */
void sb_video_free(struct SbVideo *video);

/**
 * Pastes the masked foreground of `video` onto the one-frame background
 * `bg`. `mask` has one channel with values exactly 0 or 1.
 *
 * # Safety
 * All handles must come from this library; `out` must be writable.
 */
enum SbStatus sb_composite(const struct SbVideo *video,
                           const struct SbVideo *mask,
                           const struct SbVideo *bg,
                           struct SbVideo **out);

/**
 * `lambda * video + (1 - lambda) * frame` with `frame` tiled over time.
 *
 * # Safety
 * All handles must come from this library; `out` must be writable.
 */
enum SbStatus sb_stillmix(const struct SbVideo *video,
                          const struct SbVideo *frame,
                          double lambda,
                          struct SbVideo **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SbStatus sb_video_read_sbvd(const char *path, struct SbVideo **out);

/**
 * # Safety
 * `video` must come from this library; `path` must be NUL-terminated.
 */
enum SbStatus sb_video_write_sbvd(const struct SbVideo *video, const char *path);

/**
 * Runs the full pipeline for a JSON config and returns the report as
 * JSON. Release the string with [`sb_string_free`].
 *
 * # Safety
 * `config_json` must be NUL-terminated; `report_json` must be writable.
 */
enum SbStatus sb_run_experiment(const char *config_json, char **report_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void sb_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STILLBENCH_H */
