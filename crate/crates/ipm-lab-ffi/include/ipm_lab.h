#ifndef IPM_LAB_H
#define IPM_LAB_H

/* Generated by cbindgen from ipm-lab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point. `CONFIG` and
// `NUMERICAL` match the CLI exit codes for the same failure classes.
typedef enum IpmLabStatus {
  IPM_LAB_STATUS_OK = 0,
  // Malformed or inconsistent configuration.
  IPM_LAB_STATUS_CONFIG = 2,
  // A numerical invariant broke mid-run.
  IPM_LAB_STATUS_NUMERICAL = 3,
  // Null pointer, non-UTF-8 string, or undersized buffer.
  IPM_LAB_STATUS_INVALID_ARGUMENT = 4,
  // Filesystem failure.
  IPM_LAB_STATUS_IO = 5,
  // An internal panic was caught at the boundary.
  IPM_LAB_STATUS_PANIC = 6,
} IpmLabStatus;

// Opaque handle to a parsed, validated experiment configuration.
typedef struct IpmLabConfig IpmLabConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *ipm_lab_version(void);

// Message for the most recent error on this thread. The pointer stays
// valid until the next failing call on the same thread.
const char *ipm_lab_last_error_message(void);

// Parses and validates a config file. On success stores a handle in
// `out_config`; free it with `ipm_lab_config_free`.
//
// # Safety
// `path` must be a valid nul-terminated string and `out_config` a valid
// pointer.
enum IpmLabStatus ipm_lab_config_load(const char *path, struct IpmLabConfig **out_config);

// Parses and validates config text (TOML). Same contract as
// `ipm_lab_config_load`.
//
// # Safety
// `text` must be a valid nul-terminated string and `out_config` a valid
// pointer.
enum IpmLabStatus ipm_lab_config_parse(const char *text, struct IpmLabConfig **out_config);

// Frees a config handle. Null is a no-op.
//
// # Safety
// `config` must come from a load/parse call and not be freed twice.
void ipm_lab_config_free(struct IpmLabConfig *config);

// Writes the canonical config hash (64 hex characters plus NUL) into the
// caller's buffer; `buffer_len` must be at least 65.
//
// # Safety
// `config` must be a live handle; `buffer` must point to `buffer_len`
// writable bytes.
enum IpmLabStatus ipm_lab_config_hash(const struct IpmLabConfig *config,
                                      char *buffer,
                                      uintptr_t buffer_len);

// Runs the experiment described by the handle.
//
// `out_dir` overrides the config's output directory when non-null; `jobs`
// caps worker threads (0 uses all cores; results do not depend on it);
// `seed_override` replaces the master seed when non-null. On success
// `manifest_json_out`, when non-null, receives the run manifest as a JSON
// string to be released with `ipm_lab_string_free`.
//
// # Safety
// Pointer arguments must be valid as described above.
enum IpmLabStatus ipm_lab_run(const struct IpmLabConfig *config,
                              const char *out_dir,
                              uintptr_t jobs,
                              const uint64_t *seed_override,
                              char **manifest_json_out);

// Frees a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must come from this library and not be freed twice.
void ipm_lab_string_free(char *s);

// Two-sample Kolmogorov-Smirnov statistic of two double arrays.
//
// # Safety
// `a`/`b` must point to `a_len`/`b_len` readable doubles; `out` must be
// writable.
enum IpmLabStatus ipm_lab_ks_statistic(const double *a,
                                       uintptr_t a_len,
                                       const double *b,
                                       uintptr_t b_len,
                                       double *out);

// Histogram total-variation distance over `bins` interior cells on
// `[lo, hi)` plus out-of-range sentinels.
//
// # Safety
// Same pointer contract as `ipm_lab_ks_statistic`.
enum IpmLabStatus ipm_lab_tv_histogram_distance(const double *a,
                                                uintptr_t a_len,
                                                const double *b,
                                                uintptr_t b_len,
                                                double lo,
                                                double hi,
                                                uintptr_t bins,
                                                double *out);

// Energy distance of two double arrays.
//
// # Safety
// Same pointer contract as `ipm_lab_ks_statistic`.
enum IpmLabStatus ipm_lab_energy_distance(const double *a,
                                          uintptr_t a_len,
                                          const double *b,
                                          uintptr_t b_len,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPM_LAB_H */
