#ifndef TSED_H
#define TSED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsedPairStatus {
  TSED_PAIR_STATUS_CONSISTENT = 0,
  TSED_PAIR_STATUS_INSUFFICIENT_MATCHES = 1,
  TSED_PAIR_STATUS_EXCEEDS_ERROR = 2,
  TSED_PAIR_STATUS_DEGENERATE_BASELINE = 3,
} TsedPairStatus;

typedef enum TsedStatus {
  TSED_STATUS_OK = 0,
  TSED_STATUS_NULL_POINTER = 1,
  TSED_STATUS_INVALID_ARGUMENT = 2,
  TSED_STATUS_INVALID_ROTATION = 3,
  TSED_STATUS_DEGENERATE_BASELINE = 4,
  TSED_STATUS_DEGENERATE_LINE = 5,
  TSED_STATUS_EMPTY_INPUT = 6,
  TSED_STATUS_IO = 7,
  TSED_STATUS_PANIC = 8,
} TsedStatus;

/**
 * Opaque pinhole camera.
 */
typedef struct TsedCamera TsedCamera;

/**
 * Opaque accumulator of pair verdicts under fixed thresholds.
 */
typedef struct TsedEvaluator TsedEvaluator;

typedef struct TsedPairResult {
  enum TsedPairStatus status;
  /**
   * Correspondences with a finite distance.
   */
  size_t n_matches;
  /**
   * NaN when no distance was computed.
   */
  double median_sed;
} TsedPairResult;

typedef struct TsedCounts {
  size_t consistent;
  size_t insufficient_matches;
  size_t exceeds_error;
  size_t degenerate_baseline;
} TsedCounts;

/**
 * Library version as a static NUL-terminated string.
 */
const char *tsed_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated, always
 * NUL-terminated when `len > 0`). Returns the buffer size needed for the full message,
 * or 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t tsed_last_error_message(char *buf, size_t len);

/**
 * Creates a camera from intrinsics and a world-to-camera pose `x_cam = R x_world + t`.
 *
 * # Safety
 * `rotation` must point to 9 doubles, `translation` to 3, and `out` must be writable.
 */
enum TsedStatus tsed_camera_new(double fx,
                                double fy,
                                double cx,
                                double cy,
                                uint32_t width,
                                uint32_t height,
                                const double *rotation,
                                const double *translation,
                                struct TsedCamera **out);

/**
 * # Safety
 * `camera` must be null or a handle from [`tsed_camera_new`] not yet freed.
 */
void tsed_camera_free(struct TsedCamera *camera);

/**
 * World position of the camera center.
 *
 * # Safety
 * `camera` must be a live handle and `out` must point to 3 writable doubles.
 */
enum TsedStatus tsed_camera_center(const struct TsedCamera *camera, double *out);

/**
 * Projects a world point. `visible` is set to 0 and `out` left untouched when the point
 * is behind the camera.
 *
 * # Safety
 * `point` must point to 3 doubles, `out` to 2 writable doubles, `visible` to an int.
 */
enum TsedStatus tsed_camera_project(const struct TsedCamera *camera,
                                    const double *point,
                                    double *out,
                                    int32_t *visible);

/**
 * Unit world-space direction of the ray through pixel `(u, v)`.
 *
 * # Safety
 * `camera` must be a live handle and `out` must point to 3 writable doubles.
 */
enum TsedStatus tsed_camera_ray_direction(const struct TsedCamera *camera,
                                          double u,
                                          double v,
                                          double *out);

/**
 * Fundamental matrix mapping pixels of `cam1` to epipolar lines in `cam2`, row-major and
 * scaled so its largest-magnitude entry is +1.
 *
 * # Safety
 * Both handles must be live and `out` must point to 9 writable doubles.
 */
enum TsedStatus tsed_fundamental(const struct TsedCamera *cam1,
                                 const struct TsedCamera *cam2,
                                 double *out);

/**
 * Symmetric epipolar distance of `p` (image 1) and `q` (image 2) under row-major `f`.
 *
 * # Safety
 * `f` must point to 9 doubles, `p` and `q` to 2 each, `out` to one writable double.
 */
enum TsedStatus tsed_sed(const double *f, const double *p, const double *q, double *out);

/**
 * Verdict for one frame pair given `n_matches` packed correspondences.
 *
 * # Safety
 * Both handles must be live, `matches` must hold `4 * n_matches` doubles (or be null when
 * `n_matches` is 0) and `out` must be writable.
 */
enum TsedStatus tsed_pair_consistency(const struct TsedCamera *cam1,
                                      const struct TsedCamera *cam2,
                                      const double *matches,
                                      size_t n_matches,
                                      size_t t_matches,
                                      double t_error,
                                      struct TsedPairResult *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum TsedStatus tsed_evaluator_new(size_t t_matches, double t_error, struct TsedEvaluator **out);

/**
 * # Safety
 * `evaluator` must be null or a handle from [`tsed_evaluator_new`] not yet freed.
 */
void tsed_evaluator_free(struct TsedEvaluator *evaluator);

/**
 * Scores one pair and adds it to the running totals. `out` may be null.
 *
 * # Safety
 * As for [`tsed_pair_consistency`]; `evaluator` must be a live handle.
 */
enum TsedStatus tsed_evaluator_push_pair(struct TsedEvaluator *evaluator,
                                         const struct TsedCamera *cam1,
                                         const struct TsedCamera *cam2,
                                         const double *matches,
                                         size_t n_matches,
                                         struct TsedPairResult *out);

/**
 * Consistent pairs over pairs with a usable baseline; 0 when there are none.
 *
 * # Safety
 * `evaluator` must be a live handle and `out` writable.
 */
enum TsedStatus tsed_evaluator_fraction(const struct TsedEvaluator *evaluator, double *out);

/**
 * # Safety
 * `evaluator` must be a live handle and `out` writable.
 */
enum TsedStatus tsed_evaluator_counts(const struct TsedEvaluator *evaluator,
                                      struct TsedCounts *out);

#endif  /* TSED_H */
