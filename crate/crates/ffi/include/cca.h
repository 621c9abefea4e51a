#ifndef CCA_H
#define CCA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcaStatus {
  CCA_STATUS_OK = 0,
  CCA_STATUS_NULL_POINTER = 1,
  CCA_STATUS_INVALID_CONFIG = 2,
  CCA_STATUS_EMPTY_WORLD = 3,
  CCA_STATUS_QUEUE_EMPTY = 4,
  CCA_STATUS_INVALID_ARGUMENT = 5,
  CCA_STATUS_BUFFER_TOO_SMALL = 6,
  CCA_STATUS_INTERNAL = 7,
} CcaStatus;

/**
 * Observation series of a complete run.
 */
typedef struct CcaSeries CcaSeries;

/**
 * Opaque one-dimensional world together with its random stream.
 */
typedef struct CcaWorld1D CcaWorld1D;

/**
 * Parameters of a one-dimensional run. A non-positive `rate_cap` means no
 * cap.
 */
typedef struct CcaConfig1D {
  double alpha;
  double p;
  size_t length;
  double t_max;
  double guard_fraction;
  double rate_cap;
  uint64_t seed;
} CcaConfig1D;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of a status code.
 */
const char *cca_status_message(enum CcaStatus status);

/**
 * Default parameters: `alpha = 0`, `p = 1/2`, `L = 1024`, `t_max = 1`,
 * guard fraction 1/4, no rate cap, seed 0.
 */
struct CcaConfig1D cca_config1d_default(void);

/**
 * Builds a world from `config`, seeded with `config.seed`.
 *
 * # Safety
 * `config` must point to a valid `CcaConfig1D`; `out` must be writable.
 */
enum CcaStatus cca_world1d_new(const struct CcaConfig1D *config, struct CcaWorld1D **out);

/**
 * Releases a world; null is ignored.
 *
 * # Safety
 * `world` must be null or a handle from [`cca_world1d_new`] not yet freed.
 */
void cca_world1d_free(struct CcaWorld1D *world);

/**
 * Processes one queued event. `out_applied` (optional) receives 0 when
 * the event was stale and nothing changed.
 *
 * # Safety
 * `world` must be a live handle; `out_applied` null or writable.
 */
enum CcaStatus cca_world1d_step(struct CcaWorld1D *world, int32_t *out_applied);

/**
 * Processes every event up to time `t_end`. `out_events` (optional)
 * receives the number of non-stale events.
 *
 * # Safety
 * `world` must be a live handle; `out_events` null or writable.
 */
enum CcaStatus cca_world1d_advance(struct CcaWorld1D *world, double t_end, uint64_t *out_events);

/**
 * Current simulation time; NaN for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
double cca_world1d_time(const struct CcaWorld1D *world);

/**
 * Size of the cluster holding the tagged particle; 0 for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t cca_world1d_tagged_size(const struct CcaWorld1D *world);

/**
 * Number of live clusters; 0 for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t cca_world1d_cluster_count(const struct CcaWorld1D *world);

/**
 * Largest cluster size seen so far; 0 for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t cca_world1d_max_size(const struct CcaWorld1D *world);

/**
 * Runs one replica to `config.t_max`, observing at the `n_obs` ascending
 * times in `obs_times`.
 *
 * # Safety
 * `config` must be valid; `obs_times` must hold `n_obs` values (or be null
 * with `n_obs == 0`); `out` must be writable.
 */
enum CcaStatus cca_run1d(const struct CcaConfig1D *config,
                         const double *obs_times,
                         size_t n_obs,
                         struct CcaSeries **out);

/**
 * Number of observations in a series; 0 for null.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
size_t cca_series_len(const struct CcaSeries *series);

/**
 * 1 if the run tripped the size guard, 0 otherwise (and for null).
 *
 * # Safety
 * `series` must be null or a live handle.
 */
int32_t cca_series_contaminated(const struct CcaSeries *series);

/**
 * Copies tagged-cluster sizes into `buf` (capacity `len`).
 *
 * # Safety
 * `series` must be a live handle; `buf` must hold `len` values.
 */
enum CcaStatus cca_series_c0_size(const struct CcaSeries *series, size_t *buf, size_t len);

/**
 * Copies cluster counts into `buf` (capacity `len`).
 *
 * # Safety
 * `series` must be a live handle; `buf` must hold `len` values.
 */
enum CcaStatus cca_series_cluster_count(const struct CcaSeries *series, size_t *buf, size_t len);

/**
 * Copies observation times into `buf` (capacity `len`).
 *
 * # Safety
 * `series` must be a live handle; `buf` must hold `len` values.
 */
enum CcaStatus cca_series_times(const struct CcaSeries *series, double *buf, size_t len);

/**
 * Releases a series; null is ignored.
 *
 * # Safety
 * `series` must be null or a handle from [`cca_run1d`] not yet freed.
 */
void cca_series_free(struct CcaSeries *series);

/**
 * CDF of the rescaled `alpha = 0` limit law at `x`, for `p` in (0,1).
 *
 * # Safety
 * `out` must be writable.
 */
enum CcaStatus cca_limit_cdf(double x, double p, double *out);

/**
 * Density of the limit law at `x`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcaStatus cca_limit_pdf(double x, double p, double *out);

/**
 * Mean of the limit law.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcaStatus cca_limit_mean(double p, double *out);

/**
 * Writes `gamma_1 .. gamma_len` for the given `alpha` into `buf`.
 *
 * # Safety
 * `buf` must hold `len` values.
 */
enum CcaStatus cca_gamma_sequence(double alpha, double *buf, size_t len);

/**
 * Growth exponent `1/(alpha+2)`; `InvalidArgument` for `alpha <= -2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcaStatus cca_growth_exponent(double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCA_H */
