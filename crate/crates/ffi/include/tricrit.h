#ifndef TRICRIT_H
#define TRICRIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum TricritAlgorithm {
  TRICRIT_ALGORITHM_CHAIN_EXACT = 0,
  TRICRIT_ALGORITHM_CHAIN_FPTAS = 1,
  TRICRIT_ALGORITHM_CHAIN_FAST = 2,
  /**
   * Independent tasks; switches to the large-p variant when it applies.
   */
  TRICRIT_ALGORITHM_INDEP = 3,
  TRICRIT_ALGORITHM_INDEP_LARGE_P = 4,
  TRICRIT_ALGORITHM_NO_REPLICATION = 5,
} TricritAlgorithm;

typedef enum TricritStatus {
  TRICRIT_STATUS_OK = 0,
  TRICRIT_STATUS_NULL_POINTER = 1,
  TRICRIT_STATUS_INVALID_UTF8 = 2,
  TRICRIT_STATUS_PARSE_ERROR = 3,
  TRICRIT_STATUS_INVALID_INSTANCE = 4,
  TRICRIT_STATUS_INFEASIBLE = 5,
  TRICRIT_STATUS_TOO_LARGE = 6,
  TRICRIT_STATUS_INSUFFICIENT_PROCESSORS = 7,
  TRICRIT_STATUS_KIND_MISMATCH = 8,
  TRICRIT_STATUS_NOT_APPLICABLE = 9,
  TRICRIT_STATUS_INTERNAL = 10,
} TricritStatus;

/**
 * Opaque instance handle.
 */
typedef struct TricritInstance TricritInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses an instance from JSON. On success `*out` owns a handle to be
 * released with [`tricrit_instance_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TricritStatus tricrit_instance_from_json(const char *json, struct TricritInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from [`tricrit_instance_from_json`] not
 * yet freed.
 */
void tricrit_instance_free(struct TricritInstance *inst);

/**
 * Number of tasks, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t tricrit_instance_task_count(const struct TricritInstance *inst);

/**
 * Runs `algorithm` and writes the solve document (algorithm, solution,
 * schedule, validation) to `*out`. `eps` is used by the chain FPTAS only.
 *
 * # Safety
 * `inst` must be a live handle and `out` a valid pointer.
 */
enum TricritStatus tricrit_solve(const struct TricritInstance *inst,
                                 enum TricritAlgorithm algorithm,
                                 double eps,
                                 char **out);

/**
 * Exhaustive reference solution for small instances.
 *
 * # Safety
 * `inst` must be a live handle and `out` a valid pointer.
 */
enum TricritStatus tricrit_oracle(const struct TricritInstance *inst,
                                  size_t grid_steps,
                                  char **out);

/**
 * Checks a schedule (a record array or an object with a `schedule` field)
 * against `bound`; a non-positive or NaN bound means the instance deadline.
 * `*valid` receives the verdict and `*report` the full report.
 *
 * # Safety
 * `inst` must be a live handle, `schedule_json` a NUL-terminated string,
 * `valid` and `report` valid pointers.
 */
enum TricritStatus tricrit_validate(const struct TricritInstance *inst,
                                    const char *schedule_json,
                                    double bound,
                                    bool *valid,
                                    char **report);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string produced by this library, freed once.
 */
void tricrit_string_free(char *s);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *tricrit_last_error_message(void);

/**
 * Positive root of `7c^3 + 21c^2 - 3c - 1`.
 */
double tricrit_compute_c(void);

/**
 * Makespan stretch factor for `p` processors, NaN for `p = 0`.
 */
double tricrit_beta(size_t p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRICRIT_H */
