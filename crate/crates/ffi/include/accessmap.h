#ifndef ACCESSMAP_H
#define ACCESSMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AmStatus {
  AM_STATUS_OK = 0,
  AM_STATUS_NULL_POINTER = 1,
  AM_STATUS_INVALID_ARGUMENT = 2,
  // Config or input files are missing or malformed.
  AM_STATUS_INPUT = 3,
  // A later pipeline stage failed (scale, lift, refine, mapgen).
  AM_STATUS_PIPELINE = 4,
  // Writing outputs failed.
  AM_STATUS_OUTPUT = 5,
  AM_STATUS_OUT_OF_RANGE = 6,
  AM_STATUS_PANIC = 7,
} AmStatus;

// Opaque pipeline result.
typedef struct AmMap AmMap;

// Opaque list of volumes.
typedef struct AmVolumeSet AmVolumeSet;

typedef struct AmIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} AmIntrinsics;

typedef struct AmPoint {
  double x;
  double y;
  double z;
} AmPoint;

typedef struct AmPixel {
  double u;
  double v;
} AmPixel;

typedef struct AmRefineConfig {
  double vol_min;
  double vol_max;
  double containment_margin;
  double volume_ratio_max;
  uint32_t app_min;
} AmRefineConfig;

// Summary of one volume. Map frame, metres.
typedef struct AmVolume {
  uint32_t class_id;
  uint32_t appearances;
  double aabb_min[3];
  double aabb_max[3];
  size_t source_frame_count;
  size_t member_point_count;
} AmVolume;

// Per-stage counts of a refine call: input, after the volume filter,
// after merging, after the appearance filter.
typedef struct AmStageCounts {
  size_t counts[4];
} AmStageCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *am_last_error(void);

// Projects a camera-frame point to pixel coordinates.
//
// # Safety
// All pointers must be valid for the duration of the call.
enum AmStatus am_project(const struct AmIntrinsics *intr,
                         const struct AmPoint *p,
                         struct AmPixel *out);

// Back-projects a pixel at depth `z` to a camera-frame point.
//
// # Safety
// All pointers must be valid for the duration of the call.
enum AmStatus am_back_project(const struct AmIntrinsics *intr,
                              struct AmPixel px,
                              double z,
                              struct AmPoint *out);

struct AmRefineConfig am_refine_config_default(void);

// Loads a volumes file as written by the `lift` or `refine` subcommands.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum AmStatus am_volumes_load(const char *path, struct AmVolumeSet **out);

// Number of volumes in the set; 0 for null.
//
// # Safety
// `set` must be null or a live handle.
size_t am_volumes_len(const struct AmVolumeSet *set);

// # Safety
// `set` must be a live handle and `out` writable.
enum AmStatus am_volumes_get(const struct AmVolumeSet *set, size_t index, struct AmVolume *out);

// Runs the three refinement stages on a copy of `set`. `counts` may be null.
//
// # Safety
// `set` and `config` must be valid; `out` writable; `counts` null or writable.
enum AmStatus am_volumes_refine(const struct AmVolumeSet *set,
                                const struct AmRefineConfig *config,
                                struct AmVolumeSet **out,
                                struct AmStageCounts *counts);

// # Safety
// `set` must be null or a handle not yet freed.
void am_volumes_free(struct AmVolumeSet *set);

// Runs the full pipeline for the session described by the config file.
// With a null `out_dir` nothing is written; otherwise outputs go to
// `<out_dir>/<session_id>/`.
//
// # Safety
// `config_path` must be a NUL-terminated string, `out_dir` null or one, and
// `out` writable.
enum AmStatus am_pipeline_run(const char *config_path, const char *out_dir, struct AmMap **out);

// # Safety
// `map` must be null or a live handle.
size_t am_map_volume_count(const struct AmMap *map);

// # Safety
// `map` must be a live handle and `out` writable.
enum AmStatus am_map_volume(const struct AmMap *map, size_t index, struct AmVolume *out);

// Metric scale factor recovered for the session.
//
// # Safety
// `map` must be a live handle and `out` writable.
enum AmStatus am_map_scale(const struct AmMap *map, double *out);

// Report JSON, identical to `report.json`. Release with [`am_string_free`].
//
// # Safety
// `map` must be a live handle and `out` writable.
enum AmStatus am_map_report_json(const struct AmMap *map, char **out);

// # Safety
// `map` must be null or a handle not yet freed.
void am_map_free(struct AmMap *map);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void am_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACCESSMAP_H */
