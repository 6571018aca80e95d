#ifndef ISCC_FFI_H
#define ISCC_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Return code of every fallible call.
typedef enum IsccStatus {
  ISCC_STATUS_OK = 0,
  ISCC_STATUS_NULL_POINTER = 1,
  ISCC_STATUS_INVALID_ARGUMENT = 2,
  ISCC_STATUS_CONFIG = 3,
  ISCC_STATUS_INFEASIBLE = 4,
  ISCC_STATUS_IO = 5,
  ISCC_STATUS_BUFFER_TOO_SMALL = 6,
  ISCC_STATUS_INTERNAL = 7,
} IsccStatus;

// Outcome of an optimizer run.
typedef enum IsccRunStatus {
  ISCC_RUN_STATUS_CONVERGED = 0,
  ISCC_RUN_STATUS_MAX_ITER = 1,
  ISCC_RUN_STATUS_INFEASIBLE_SENSING = 2,
} IsccRunStatus;

// Channel realization handle.
typedef struct IsccChannels IsccChannels;

// System configuration handle.
typedef struct IsccConfig IsccConfig;

// Optimizer result handle.
typedef struct IsccResult IsccResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *iscc_version(void);

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *iscc_last_error(void);

// Built-in desk-scale configuration.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum IsccStatus iscc_config_default(struct IsccConfig **out);

// Built-in configuration with the full-size surface.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum IsccStatus iscc_config_paper_scale(struct IsccConfig **out);

// Parses a TOML configuration; missing keys take their defaults.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum IsccStatus iscc_config_from_toml(const char *toml, struct IsccConfig **out);

// Loads a TOML file, or `default` / `paper` for the built-in ones.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum IsccStatus iscc_config_load(const char *path, struct IsccConfig **out);

// Serializes a configuration as TOML.
//
// # Safety
// `cfg` must be a live handle; `buf` must hold `len` bytes or be null;
// `needed` may be null.
enum IsccStatus iscc_config_to_toml(const struct IsccConfig *cfg,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// Reflecting-element count.
//
// # Safety
// `cfg` must be a live handle or null (returns 0).
size_t iscc_config_m_passive(const struct IsccConfig *cfg);

// # Safety
// `cfg` must come from this library and not be freed twice; null is ignored.
void iscc_config_free(struct IsccConfig *cfg);

// Draws a channel realization from `seed`.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum IsccStatus iscc_channels_draw(const struct IsccConfig *cfg,
                                   uint64_t seed,
                                   struct IsccChannels **out);

// # Safety
// `ch` must come from this library and not be freed twice; null is ignored.
void iscc_channels_free(struct IsccChannels *ch);

// Runs the optimizer. `scheme` is a scheme name such as `proposed` or
// `fixed-phase`; null selects `proposed`. `max_iter` of 0 keeps the default.
// An unreachable radar threshold is not an error: the result reports
// `InfeasibleSensing`.
//
// # Safety
// Handles must be live; `scheme` must be null or NUL-terminated; `out`
// must be writable.
enum IsccStatus iscc_run(const struct IsccConfig *cfg,
                         const struct IsccChannels *ch,
                         const char *scheme,
                         uint64_t seed,
                         size_t max_iter,
                         struct IsccResult **out);

// # Safety
// `res` must be a live handle; `out` must be writable.
enum IsccStatus iscc_result_status(const struct IsccResult *res, enum IsccRunStatus *out);

// Outer iterations performed.
//
// # Safety
// `res` must be a live handle or null (returns 0).
size_t iscc_result_iterations(const struct IsccResult *res);

// Utility in bits (throughput plus computation bits minus backhaul cost).
//
// # Safety
// `res` must be a live handle or null (returns NaN).
double iscc_result_utility(const struct IsccResult *res);

// Communication plus computation bits.
//
// # Safety
// `res` must be a live handle or null (returns NaN).
double iscc_result_sum_bits(const struct IsccResult *res);

// Copies up to `len` per-iteration surrogate values (row 0 is the initial
// point) into `buf`. `count` receives the trace length.
//
// # Safety
// `res` must be live; `buf` must hold `len` doubles or be null; `count`
// must be writable.
enum IsccStatus iscc_result_trace(const struct IsccResult *res,
                                  double *buf,
                                  size_t len,
                                  size_t *count);

// Full result as JSON. Call with a null buffer to learn the size.
//
// # Safety
// `res` must be live; `buf` must hold `len` bytes or be null; `needed`
// may be null.
enum IsccStatus iscc_result_json(const struct IsccResult *res,
                                 char *buf,
                                 size_t len,
                                 size_t *needed);

// Writes `result.json` and `trace.csv` into `dir`, creating it if needed.
//
// # Safety
// `res` must be live; `dir` must be NUL-terminated.
enum IsccStatus iscc_result_save(const struct IsccResult *res, const char *dir);

// # Safety
// `res` must come from this library and not be freed twice; null is ignored.
void iscc_result_free(struct IsccResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISCC_FFI_H */
