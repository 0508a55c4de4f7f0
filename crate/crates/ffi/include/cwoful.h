#ifndef CWOFUL_H
#define CWOFUL_H

/* Generated by cbindgen from cwoful-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible FFI call.
typedef enum CwStatus {
  // Success.
  CW_STATUS_OK = 0,
  // A required pointer argument was null.
  CW_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  CW_STATUS_INVALID_UTF8 = 2,
  // The configuration failed to parse or validate.
  CW_STATUS_INVALID_CONFIG = 3,
  // Episode execution failed.
  CW_STATUS_RUN_FAILED = 4,
  // An index or buffer length was out of range.
  CW_STATUS_OUT_OF_RANGE = 5,
  // A panic was caught at the FFI boundary.
  CW_STATUS_PANIC = 6,
} CwStatus;

// A parsed and validated experiment description.
typedef struct CwExperiment CwExperiment;

// Finished experiment: per-(cell, policy) aggregates.
typedef struct CwResult CwResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cw_version(void);

// Message of the last failure on this thread; empty until a call fails.
// Valid until the next failing call on the same thread.
const char *cw_last_error_message(void);

// Parse an experiment from TOML text into a new handle.
//
// # Safety
// `toml_text` must be a NUL-terminated string and `out` a valid pointer.
enum CwStatus cw_experiment_from_toml(const char *toml_text, struct CwExperiment **out);

// Parse an experiment from a TOML file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CwStatus cw_experiment_from_file(const char *path, struct CwExperiment **out);

// Replace the experiment's seed list.
//
// # Safety
// `experiment` must come from a `cw_experiment_*` constructor; `seeds` must
// point to `num_seeds` valid entries.
enum CwStatus cw_experiment_set_seeds(struct CwExperiment *experiment,
                                      const uint64_t *seeds,
                                      size_t num_seeds);

// Destroy an experiment handle (null is a no-op).
//
// # Safety
// `experiment` must come from a `cw_experiment_*` constructor and must not
// be used afterwards.
void cw_experiment_free(struct CwExperiment *experiment);

// Run all episodes in memory and hand back a result handle.
//
// # Safety
// `experiment` must come from a `cw_experiment_*` constructor; `out` must be
// a valid pointer.
enum CwStatus cw_experiment_run(const struct CwExperiment *experiment, struct CwResult **out);

// Run all episodes and also write the CSV/metadata layout under
// `output_root`, as the `cwoful run` command would.
//
// # Safety
// As [`cw_experiment_run`]; `output_root` must be a NUL-terminated string.
enum CwStatus cw_experiment_run_to_dir(const struct CwExperiment *experiment,
                                       const char *output_root,
                                       struct CwResult **out);

// Destroy a result handle (null is a no-op).
//
// # Safety
// `result` must come from a run call and must not be used afterwards.
void cw_result_free(struct CwResult *result);

// Number of (cell, policy) outcomes in the result.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_outcome_count(const struct CwResult *result, size_t *out);

// Policy name of outcome `index`; borrowed from the result handle.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_policy_name(const struct CwResult *result, size_t index, const char **out);

// Grid-cell label of outcome `index` (e.g. "d5_K1000_C10"); borrowed from
// the result handle.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_cell_label(const struct CwResult *result, size_t index, const char **out);

// Horizon (number of rounds) of outcome `index`.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_horizon(const struct CwResult *result, size_t index, size_t *out);

// Confidence radius β used by outcome `index`.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_beta(const struct CwResult *result, size_t index, double *out);

// Mean and population standard deviation of the final cumulative regret.
//
// # Safety
// `result` must come from a run call; `mean_out` and `std_out` must be
// valid pointers.
enum CwStatus cw_result_final_regret(const struct CwResult *result,
                                     size_t index,
                                     double *mean_out,
                                     double *std_out);

// Fraction of seeds whose run violated the confidence event at least once.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_confidence_violation_rate(const struct CwResult *result,
                                                  size_t index,
                                                  double *out);

// Whether every per-seed hard inequality check passed for outcome `index`.
//
// # Safety
// `result` must come from a run call; `out` must be a valid pointer.
enum CwStatus cw_result_hard_checks_ok(const struct CwResult *result, size_t index, bool *out);

// Copy the cross-seed mean cumulative-regret curve (one value per round)
// into `buffer`. `buffer_len` must be at least the outcome's horizon.
//
// # Safety
// `result` must come from a run call; `buffer` must point to `buffer_len`
// writable doubles.
enum CwStatus cw_result_mean_regret_curve(const struct CwResult *result,
                                          size_t index,
                                          double *buffer,
                                          size_t buffer_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CWOFUL_H */
