#ifndef SUNGLARE_H
#define SUNGLARE_H

/* Generated by cbindgen from the sunglare-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_UNSUPPORTED_EPOCH = 3,
  SG_STATUS_INVALID_FRAME = 4,
  SG_STATUS_INVALID_MASK = 5,
  SG_STATUS_OUT_OF_RANGE = 6,
  SG_STATUS_PANIC = 7,
  SG_STATUS_INTERNAL = 8,
} SgStatus;

typedef enum SgGlareKind {
  SG_GLARE_KIND_SUNRISE = 0,
  SG_GLARE_KIND_SUNSET = 1,
} SgGlareKind;

// Opaque panorama frame plus obstruction mask.
typedef struct SgPanorama SgPanorama;

// Opaque list of glare windows.
typedef struct SgWindowList SgWindowList;

typedef struct SgSolarPosition {
  double elevation_deg;
  double azimuth_deg;
} SgSolarPosition;

// Glare criteria; pass NULL for the defaults (25 deg threshold, no extra
// low-sun cutoff).
typedef struct SgCriteria {
  double threshold_deg;
  double min_elevation_deg;
} SgCriteria;

typedef struct SgGlareVerdict {
  double elevation_deg;
  double azimuth_deg;
  double h_glare_deg;
  double v_glare_deg;
  bool geometric_glare;
} SgGlareVerdict;

typedef struct SgOrientationRange {
  double low_deg;
  double high_deg;
  double center_deg;
} SgOrientationRange;

typedef struct SgGlareWindow {
  double start_unix;
  double end_unix;
  enum SgGlareKind kind;
} SgGlareWindow;

typedef struct SgPixel {
  double x;
  double y;
} SgPixel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL,
// or 0 when there is no error. Pass `buf = NULL` to query the length.
//
// # Safety
// `buf` is NULL or points to at least `len` writable bytes.
size_t sg_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sg_version(void);

// Geometric sun position (no refraction) at a site and instant.
//
// # Safety
// `out` is NULL or points to writable memory for one `SgSolarPosition`.
enum SgStatus sg_solar_position(double lon_deg,
                                double lat_deg,
                                double unix_seconds,
                                struct SgSolarPosition *out);

// Horizontal angle between sun azimuth and heading, in [0, 180].
double sg_h_glare(double sun_azimuth_deg, double heading_deg);

// Vertical angle between sun elevation and road slope.
double sg_v_glare(double sun_elevation_deg, double slope_deg);

// Glare from geometry alone for a driver pose at an instant.
//
// # Safety
// `criteria` is NULL or valid; `out` points to one writable `SgGlareVerdict`.
enum SgStatus sg_geometric_glare(double lon_deg,
                                 double lat_deg,
                                 double heading_deg,
                                 double slope_deg,
                                 double unix_seconds,
                                 const struct SgCriteria *criteria,
                                 struct SgGlareVerdict *out);

// Flat-road headings exposed to glare. `*has_range` is false when the sun is
// outside the glare elevation band, and `out` is then left untouched.
//
// # Safety
// `criteria` is NULL or valid; `out` and `has_range` point to writable memory.
enum SgStatus sg_orientation_range(double lon_deg,
                                   double lat_deg,
                                   double unix_seconds,
                                   const struct SgCriteria *criteria,
                                   struct SgOrientationRange *out,
                                   bool *has_range);

// Glare windows over one local day for a driver pose, optionally hidden by a
// panorama's obstruction mask (`panorama` may be NULL).
//
// # Safety
// `zone` is NULL or a NUL-terminated string; `criteria` is NULL or valid;
// `panorama` is NULL or a live handle; `out` points to a writable pointer.
enum SgStatus sg_glare_windows(double lon_deg,
                               double lat_deg,
                               double heading_deg,
                               double slope_deg,
                               int32_t year,
                               uint32_t month,
                               uint32_t day,
                               const char *zone,
                               double step_s,
                               const struct SgCriteria *criteria,
                               const struct SgPanorama *panorama,
                               struct SgWindowList **out);

// Number of windows in the list (0 for NULL).
//
// # Safety
// `list` is NULL or a live handle.
size_t sg_window_list_len(const struct SgWindowList *list);

// # Safety
// `list` is a live handle and `out` points to one writable `SgGlareWindow`.
enum SgStatus sg_window_list_get(const struct SgWindowList *list,
                                 size_t index,
                                 struct SgGlareWindow *out);

// # Safety
// `list` is NULL or a handle from `sg_glare_windows` not yet freed.
void sg_window_list_free(struct SgWindowList *list);

// Creates a panorama handle from a 2:1 label raster (row-major, `width *
// height` bytes). Pixels equal to `sky_label` are open sky.
//
// # Safety
// `labels` points to `labels_len` readable bytes; `out` to a writable pointer.
enum SgStatus sg_panorama_new(double lon_deg,
                              double lat_deg,
                              double yaw_deg,
                              double tilt_deg,
                              uint32_t width,
                              uint32_t height,
                              const uint8_t *labels,
                              size_t labels_len,
                              uint8_t sky_label,
                              struct SgPanorama **out);

// Pixel where the sun appears. `*inside` is false when it falls outside the
// vertical field of view.
//
// # Safety
// `panorama` is a live handle; `out` and `inside` point to writable memory.
enum SgStatus sg_panorama_project_sun(const struct SgPanorama *panorama,
                                      double sun_elevation_deg,
                                      double sun_azimuth_deg,
                                      struct SgPixel *out,
                                      bool *inside);

// Whether the sun is hidden by a non-sky pixel (true at or below the horizon).
//
// # Safety
// `panorama` is a live handle; `out` points to a writable bool.
enum SgStatus sg_panorama_is_obstructed(const struct SgPanorama *panorama,
                                        double sun_elevation_deg,
                                        double sun_azimuth_deg,
                                        bool *out);

// # Safety
// `panorama` is NULL or a handle from `sg_panorama_new` not yet freed.
void sg_panorama_free(struct SgPanorama *panorama);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUNGLARE_H */
