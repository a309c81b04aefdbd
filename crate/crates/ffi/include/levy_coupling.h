#ifndef LEVY_COUPLING_H
#define LEVY_COUPLING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every entry point.
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_ARGUMENT = 2,
  // Malformed config text or an I/O failure.
  LC_STATUS_CONFIG = 3,
  // The constant chain has no contraction (for example `lambda*(R0) = 0`).
  LC_STATUS_DEGENERATE = 4,
  // Quadrature, root finding or a grid check failed.
  LC_STATUS_NUMERICAL = 5,
  // A trajectory blew up or the decay fit had no usable window.
  LC_STATUS_SIMULATION = 6,
  LC_STATUS_BUFFER_TOO_SMALL = 7,
  LC_STATUS_PANIC = 8,
} LcStatus;

// Constants, Lyapunov data and the distance profile for an experiment.
typedef struct LcConstants LcConstants;

// A parsed and validated experiment config.
typedef struct LcExperiment LcExperiment;

// Scalar results of the constant chain. `rate`, `eps` and `c1` may be zero
// through underflow; their logarithms are always finite.
typedef struct LcConstantsSummary {
  double alpha;
  double alpha0;
  double kappa;
  double r0_big;
  double c_star_big;
  double c2;
  double c1;
  double ln_c1;
  double eps;
  double ln_eps;
  double rate;
  double ln_rate;
  double ln_unit;
  bool underflow;
} LcConstantsSummary;

typedef struct LcDecaySummary {
  double rate;
  double ci_low;
  double ci_high;
  double r2;
  size_t replicas;
  size_t blow_ups;
} LcDecaySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lc_version(void);

// Length in bytes of the last error message on this thread, without the
// terminating NUL; 0 when there is none.
size_t lc_last_error_length(void);

// Copies the last error message (NUL-terminated) into `buf`.
//
// # Safety
// `buf` must be valid for `len` bytes of writes.
enum LcStatus lc_last_error_message(char *buf, size_t len);

void lc_clear_last_error(void);

// The benchmark experiment.
//
// # Safety
// `out` must be valid for a pointer write.
enum LcStatus lc_experiment_new_default(struct LcExperiment **out);

// Parses a TOML experiment config.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be valid for a pointer write.
enum LcStatus lc_experiment_from_toml(const char *toml, struct LcExperiment **out);

// # Safety
// `exp` must be null or a handle from this library not yet freed.
void lc_experiment_free(struct LcExperiment *exp);

// # Safety
// `exp` must be a live handle; `out` valid for writes.
enum LcStatus lc_experiment_dim(const struct LcExperiment *exp, size_t *out);

// `nu*_x(R^d)` for the experiment's noise; `x` holds `dim` values.
//
// # Safety
// `exp` must be a live handle; `x` valid for `dim` reads; `out` valid for writes.
enum LcStatus lc_overlap_mass(const struct LcExperiment *exp,
                              const double *x,
                              size_t dim,
                              double *out);

// Derives the inputs and runs the constant chain.
//
// # Safety
// `exp` must be a live handle; `out` valid for a pointer write.
enum LcStatus lc_constants_compute(const struct LcExperiment *exp, struct LcConstants **out);

// # Safety
// `c` must be null or a handle from this library not yet freed.
void lc_constants_free(struct LcConstants *c);

// # Safety
// `c` must be a live handle; `out` valid for writes.
enum LcStatus lc_constants_summary(const struct LcConstants *c, struct LcConstantsSummary *out);

// `f(s ∧ R0) / L`, the truncated distance profile in units of its rise length.
//
// # Safety
// `c` must be a live handle; `out` valid for writes.
enum LcStatus lc_constants_profile(const struct LcConstants *c, double s, double *out);

// Simulates one coupled pair from the experiment's initial state and writes
// `(x, v, x', v')` at the horizon into `out` (`4 * dim` values).
//
// # Safety
// Handles must be live; `out` valid for `len` writes.
enum LcStatus lc_simulate_pair(const struct LcExperiment *exp,
                               const struct LcConstants *c,
                               double horizon,
                               uint64_t seed,
                               size_t replica,
                               double *out,
                               size_t len);

// Fits the decay rate of the contraction functional over `replicas` pairs.
//
// # Safety
// Handles must be live; `out` valid for writes.
enum LcStatus lc_estimate_decay(const struct LcExperiment *exp,
                                const struct LcConstants *c,
                                size_t replicas,
                                double horizon,
                                uint64_t seed,
                                struct LcDecaySummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVY_COUPLING_H */
