/* C interface for the flexchan estimation library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible FFI call.
 */
typedef enum FlexchanStatus {
  /**
   * Success.
   */
  FLEXCHAN_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  FLEXCHAN_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments violate a documented contract (geometry, dimensions,
   * configuration).
   */
  FLEXCHAN_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Source count exceeds what the statistic can identify.
   */
  FLEXCHAN_STATUS_UNIDENTIFIABLE = 3,
  /**
   * A numerical solve failed or was too ill-conditioned to trust.
   */
  FLEXCHAN_STATUS_NUMERICAL_FAILURE = 4,
} FlexchanStatus;

/**
 * Statistic order selector for `flexchan_estimate_doa`.
 */
typedef enum FlexchanOrder {
  /**
   * Sample-covariance subspace (requires k < M).
   */
  FLEXCHAN_ORDER_SECOND = 2,
  /**
   * Fourth-order cumulant on the difference co-array (requires k <= dof).
   */
  FLEXCHAN_ORDER_FOURTH = 4,
} FlexchanOrder;

/**
 * Opaque array geometry handle. Create with `flexchan_geometry_new`, release
 * with `flexchan_geometry_free`.
 */
typedef struct FlexchanGeometry FlexchanGeometry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a geometry from 1-based port indices on a uniform grid.
 *
 * # Safety
 * `selected` must point to `selected_len` readable `usize` values and `out`
 * must be a valid pointer; the returned handle must be released with
 * `flexchan_geometry_free` exactly once.
 */
enum FlexchanStatus flexchan_geometry_new(uintptr_t n_ports,
                                          const uintptr_t *selected,
                                          uintptr_t selected_len,
                                          double spacing,
                                          struct FlexchanGeometry **out);

/**
 * Releases a geometry handle. Null is a no-op.
 *
 * # Safety
 * `geom` must be a handle from `flexchan_geometry_new` not yet freed.
 */
void flexchan_geometry_free(struct FlexchanGeometry *geom);

/**
 * Number of selected ports (RF chains).
 *
 * # Safety
 * `geom` must be a live handle; `out` must be valid for one write.
 */
enum FlexchanStatus flexchan_geometry_num_selected(const struct FlexchanGeometry *geom,
                                                   uintptr_t *out);

/**
 * Difference co-array degrees of freedom: the maximum source count the
 * fourth-order estimator can identify on this subset.
 *
 * # Safety
 * `geom` must be a live handle; `out` must be valid for one write.
 */
enum FlexchanStatus flexchan_geometry_coarray_dof(const struct FlexchanGeometry *geom,
                                                  uintptr_t *out);

/**
 * Blind DOA estimation from payload snapshots.
 *
 * `data` holds `snapshots * m * 2` doubles (interleaved re/im,
 * snapshot-major). Up to `k` angles (degrees, ascending) are written to
 * `out_angles_deg`, which must have capacity `k`; `out_detected` receives
 * how many were found. `use_newton != 0` refines the dense-grid scan with
 * Newton steps on the subspace objective.
 *
 * # Safety
 * All pointers must be valid for the documented extents.
 */
enum FlexchanStatus flexchan_estimate_doa(const struct FlexchanGeometry *geom,
                                          const double *data,
                                          uintptr_t snapshots,
                                          uintptr_t k,
                                          enum FlexchanOrder order,
                                          unsigned int use_newton,
                                          double *out_angles_deg,
                                          uintptr_t *out_detected);

/**
 * Closed-form NMSE levels for the conventional and sensing-assisted pilot
 * strategies, plus their pilot-overhead ratio `n_ports / k`.
 *
 * # Safety
 * Out-pointers must each be valid for one write.
 */
enum FlexchanStatus flexchan_theoretical_nmse(uintptr_t n_ports,
                                              uintptr_t m,
                                              uintptr_t k,
                                              uintptr_t pilot_len,
                                              double noise_power,
                                              double mean_power,
                                              double *out_conventional,
                                              double *out_sensing_assisted,
                                              double *out_overhead_ratio);

/**
 * Library version as a static NUL-terminated string.
 */
const char *flexchan_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
