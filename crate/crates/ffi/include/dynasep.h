#ifndef DYNASEP_H
#define DYNASEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DynasepStatus {
  DYNASEP_STATUS_OK = 0,
  DYNASEP_STATUS_NULL_POINTER = 1,
  DYNASEP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Pole, vanishing denominator or negative rate.
   */
  DYNASEP_STATUS_NUMERICAL = 3,
  DYNASEP_STATUS_OUT_OF_RANGE = 4,
  DYNASEP_STATUS_BUFFER_TOO_SMALL = 5,
  DYNASEP_STATUS_PANIC = 6,
} DynasepStatus;

/**
 * Process kinds, in the order of the library's `ProcessKind`.
 */
typedef enum DynasepProcessKind {
  DYNASEP_PROCESS_KIND_ASEP = 0,
  DYNASEP_PROCESS_KIND_ASEP_R = 1,
  DYNASEP_PROCESS_KIND_ASEP_L = 2,
  DYNASEP_PROCESS_KIND_SSEP = 3,
  DYNASEP_PROCESS_KIND_SSEP_R = 4,
  DYNASEP_PROCESS_KIND_SSEP_L = 5,
  DYNASEP_PROCESS_KIND_TAZRP_RIGHT = 6,
  DYNASEP_PROCESS_KIND_TAZRP_LEFT = 7,
} DynasepProcessKind;

/**
 * Jump direction on the lattice.
 */
typedef enum DynasepDirection {
  DYNASEP_DIRECTION_RIGHT = 0,
  DYNASEP_DIRECTION_LEFT = 1,
} DynasepDirection;

/**
 * Duality families.
 */
typedef enum DynasepFamily {
  DYNASEP_FAMILY_KR = 0,
  DYNASEP_FAMILY_KL = 1,
  DYNASEP_FAMILY_KLV = 2,
  DYNASEP_FAMILY_RV = 3,
  DYNASEP_FAMILY_RV_SUM = 4,
  DYNASEP_FAMILY_PVR = 5,
  DYNASEP_FAMILY_P_PRIME_R = 6,
  DYNASEP_FAMILY_K_QTM = 7,
  DYNASEP_FAMILY_K_AFF = 8,
  DYNASEP_FAMILY_D_TRI = 9,
  DYNASEP_FAMILY_D_TRI_PRIME = 10,
  DYNASEP_FAMILY_D_TAZRP = 11,
  DYNASEP_FAMILY_R_HAT = 12,
  DYNASEP_FAMILY_P_HAT_R = 13,
  DYNASEP_FAMILY_K_HAT = 14,
} DynasepFamily;

/**
 * Opaque duality function handle.
 */
typedef struct DynasepDuality DynasepDuality;

/**
 * Opaque process handle.
 */
typedef struct DynasepProcess DynasepProcess;

/**
 * Opaque trajectory handle.
 */
typedef struct DynasepTrajectory DynasepTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *dynasep_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dynasep_version(void);

/**
 * Creates a process on `n_sites` sites with the given capacities.
 * `boundary` is `rho` for right-dynamic kinds, `lambda` for left-dynamic
 * kinds and ignored otherwise.
 *
 * # Safety
 * `capacities` must be valid for `n_sites` reads; `out` must be writable.
 */
enum DynasepStatus dynasep_process_new(enum DynasepProcessKind kind,
                                       double q,
                                       double boundary,
                                       const uint32_t *capacities,
                                       size_t n_sites,
                                       struct DynasepProcess **out);

/**
 * Releases a process; null is ignored.
 *
 * # Safety
 * `p` must come from [`dynasep_process_new`] and not be used afterwards.
 */
void dynasep_process_free(struct DynasepProcess *p);

/**
 * Rate of one particle jumping from 1-based `site` in `direction`; zero
 * for an illegal move.
 *
 * # Safety
 * `p` must be a live handle, `occupations` valid for `n_sites` reads and
 * `out` writable.
 */
enum DynasepStatus dynasep_process_jump_rate(const struct DynasepProcess *p,
                                             const uint32_t *occupations,
                                             size_t n_sites,
                                             size_t site,
                                             enum DynasepDirection direction,
                                             double *out);

/**
 * Largest relative row sum of the generator; infinite if any rate is
 * negative or crosses particle-number sectors.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum DynasepStatus dynasep_process_generator_residual(const struct DynasepProcess *p, double *out);

/**
 * Detailed-balance residual of the process against its reversible measure.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum DynasepStatus dynasep_process_reversibility_residual(const struct DynasepProcess *p,
                                                          double *out);

/**
 * Creates a duality function. Parameters not used by `family` are ignored.
 *
 * # Safety
 * `capacities` must be valid for `n_sites` reads; `out` must be writable.
 */
enum DynasepStatus dynasep_duality_new(enum DynasepFamily family,
                                       double q,
                                       double rho,
                                       double lambda,
                                       double v,
                                       const uint32_t *capacities,
                                       size_t n_sites,
                                       struct DynasepDuality **out);

/**
 * Releases a duality function; null is ignored.
 *
 * # Safety
 * `d` must come from [`dynasep_duality_new`] and not be used afterwards.
 */
void dynasep_duality_free(struct DynasepDuality *d);

/**
 * Value of the duality function at two occupation vectors of length
 * `n_sites`.
 *
 * # Safety
 * `d` must be a live handle, `left` and `right` valid for `n_sites` reads
 * and `out` writable.
 */
enum DynasepStatus dynasep_duality_eval(const struct DynasepDuality *d,
                                        const uint32_t *left,
                                        const uint32_t *right,
                                        size_t n_sites,
                                        double *out);

/**
 * Generator-level duality residual on the full state space.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum DynasepStatus dynasep_duality_residual(const struct DynasepDuality *d, double *out);

/**
 * Simulates the process from `initial` up to `t_end` with a fixed seed.
 *
 * # Safety
 * `p` must be a live handle, `initial` valid for `n_sites` reads and `out`
 * writable.
 */
enum DynasepStatus dynasep_simulate(const struct DynasepProcess *p,
                                    const uint32_t *initial,
                                    size_t n_sites,
                                    double t_end,
                                    uint64_t seed,
                                    struct DynasepTrajectory **out);

/**
 * Releases a trajectory; null is ignored.
 *
 * # Safety
 * `t` must come from [`dynasep_simulate`] and not be used afterwards.
 */
void dynasep_trajectory_free(struct DynasepTrajectory *t);

/**
 * Number of recorded states, the initial one included; 0 for null.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t dynasep_trajectory_len(const struct DynasepTrajectory *t);

/**
 * Time and occupations of state `index`. `occupations` receives
 * `n_sites` entries and must match the process size.
 *
 * # Safety
 * `t` must be a live handle, `time` writable and `occupations` valid for
 * `n_sites` writes.
 */
enum DynasepStatus dynasep_trajectory_state(const struct DynasepTrajectory *t,
                                            size_t index,
                                            double *time,
                                            uint32_t *occupations,
                                            size_t n_sites);

/**
 * Writes the trajectory as CSV to `path`.
 *
 * # Safety
 * `t` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum DynasepStatus dynasep_trajectory_write_csv(const struct DynasepTrajectory *t,
                                                const char *path);

/**
 * Runs acceptance criterion `n` (1 to 10) with default settings and
 * reports how many of its checks passed.
 *
 * # Safety
 * `passed` and `total` must be writable.
 */
enum DynasepStatus dynasep_run_criterion(uint32_t n, uint32_t *passed, uint32_t *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNASEP_H */
