#ifndef PROUD_H
#define PROUD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PROUD_STATUS_OK = 0,
  PROUD_STATUS_NULL_POINTER = 1,
  PROUD_STATUS_INVALID_ARGUMENT = 2,
  PROUD_STATUS_DIMENSION_MISMATCH = 3,
  PROUD_STATUS_CONFIG = 4,
  PROUD_STATUS_IO = 5,
  PROUD_STATUS_DUAL_UNBOUNDED = 6,
  PROUD_STATUS_NOT_RUN = 7,
  PROUD_STATUS_BUFFER_TOO_SMALL = 8,
  PROUD_STATUS_UTF8 = 9,
  PROUD_STATUS_PANIC = 10,
} ProudStatus;

/*
 Opaque run handle: a parsed configuration and, after
 [`proud_sampler_run`], its result.
 */
typedef struct ProudSampler ProudSampler;

/*
 Flat metric summary of a finished run. Optional values are NaN when
 absent.
 */
typedef struct {
  double hv;
  double hv_std_error;
  double emd;
  double mean_front_distance;
  double mean_log_likelihood;
  double pct_stationary;
  double spread;
  size_t n_points;
  size_t n_nondominated;
  size_t fallbacks;
} ProudReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *proud_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *proud_version(void);

/*
 Parses a TOML run configuration into a new handle stored in `*out`.

 # Safety
 `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
ProudStatus proud_sampler_new(const char *toml, ProudSampler **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `sampler` must come from [`proud_sampler_new`] and not be used again.
 */
void proud_sampler_free(ProudSampler *sampler);

/*
 Samples and scores the configured run, replacing any earlier result.

 # Safety
 `sampler` must be a live handle.
 */
ProudStatus proud_sampler_run(ProudSampler *sampler);

/*
 Particle count, dimension and objective count of the configured run.

 # Safety
 `sampler` must be a live handle; each output pointer may be null.
 */
ProudStatus proud_sampler_shape(const ProudSampler *sampler,
                                size_t *n_particles,
                                size_t *dims,
                                size_t *n_objectives);

/*
 Final positions, `n_particles * dims` values.

 # Safety
 `sampler` must be a live handle and `out` writable for `len` values.
 */
ProudStatus proud_sampler_positions(const ProudSampler *sampler, double *out, size_t len);

/*
 Final objective values, `n_particles * n_objectives` values.

 # Safety
 `sampler` must be a live handle and `out` writable for `len` values.
 */
ProudStatus proud_sampler_objectives(const ProudSampler *sampler, double *out, size_t len);

/*
 # Safety
 `sampler` must be a live handle and `out` a valid pointer.
 */
ProudStatus proud_sampler_report(const ProudSampler *sampler, ProudReport *out);

/*
 Minimum-norm convex combination of `m` gradients of length `d`.
 `weights` receives `m` values and `direction` `d` values; `norm` may be
 null.

 # Safety
 Pointers must be valid for the stated lengths.
 */
ProudStatus proud_min_norm(const double *gradients,
                           size_t m,
                           size_t d,
                           double *weights,
                           double *direction,
                           double *norm);

/*
 Hypervolume of `n` points with `m` objectives against `reference`.

 # Safety
 Pointers must be valid for the stated lengths.
 */
ProudStatus proud_hypervolume(const double *points,
                              size_t n,
                              size_t m,
                              const double *reference,
                              double *out);

/*
 Mean matched Euclidean cost between two sets of `n` points in `R^m`.

 # Safety
 Pointers must be valid for the stated lengths.
 */
ProudStatus proud_emd(const double *a, const double *b, size_t n, size_t m, double *out);

/*
 Whether `y1` Pareto-dominates `y2` under minimization.

 # Safety
 Pointers must be valid for `m` values.
 */
ProudStatus proud_dominates(const double *y1, const double *y2, size_t m, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROUD_H */
