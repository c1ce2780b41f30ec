#ifndef MA_TOOLKIT_H
#define MA_TOOLKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MaStatus {
  MA_STATUS_OK = 0,
  MA_STATUS_NULL_POINTER = 1,
  /**
   * Invalid argument or configuration.
   */
  MA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numerical or feasibility failure.
   */
  MA_STATUS_NUMERICAL = 3,
  MA_STATUS_IO = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  MA_STATUS_INTERNAL = 5,
} MaStatus;

/**
 * Array geometry handle.
 */
typedef struct MaArray MaArray;

/**
 * Path set handle.
 */
typedef struct MaPathSet MaPathSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ma_version(void);

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *ma_last_error_message(void);

/**
 * Builds a path set. Angles are in radians; the PRM is `n_rx × n_tx`, row-major,
 * given as separate real and imaginary arrays.
 */
enum MaStatus ma_pathset_new(size_t n_tx,
                             const double *tx_elevation,
                             const double *tx_azimuth,
                             size_t n_rx,
                             const double *rx_elevation,
                             const double *rx_azimuth,
                             const double *prm_re,
                             const double *prm_im,
                             double wavelength,
                             struct MaPathSet **out);

/**
 * Releases a path set; null is ignored.
 */
void ma_pathset_free(struct MaPathSet *ps);

/**
 * Channel between Tx position `t[3]` and Rx position `r[3]` (metres).
 */
enum MaStatus ma_channel_response(const struct MaPathSet *ps,
                                  const double *t,
                                  const double *r,
                                  double *out_re,
                                  double *out_im);

/**
 * Bessel function of the first kind, order zero.
 */
enum MaStatus ma_bessel_j0(double x, double *out);

/**
 * Jakes correlation of `n` ports over a normalized length `w`, written
 * row-major into `out[n*n]`.
 */
enum MaStatus ma_jakes_correlation(size_t n, double w, double sigma2, double *out);

/**
 * Array from `n` positions given as `xyz[3*n]` (metres).
 */
enum MaStatus ma_array_new(size_t n, const double *xyz, double wavelength, struct MaArray **out);

/**
 * Releases an array; null is ignored.
 */
void ma_array_free(struct MaArray *a);

/**
 * Single-target CRB of the x direction cosine and of the azimuth.
 */
enum MaStatus ma_single_target_crb(const struct MaArray *array,
                                   double elevation,
                                   double azimuth,
                                   double snr,
                                   size_t snapshots,
                                   double *out_spatial_frequency,
                                   double *out_angle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MA_TOOLKIT_H */
