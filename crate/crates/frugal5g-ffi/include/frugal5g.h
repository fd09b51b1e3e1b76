#ifndef FRUGAL5G_H
#define FRUGAL5G_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every `f5g_*` call.
 */
typedef enum F5gStatus {
  F5G_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  F5G_STATUS_NULL_ARGUMENT = 1,
  /**
   * Input text was not valid UTF-8.
   */
  F5G_STATUS_INVALID_UTF8 = 2,
  /**
   * The scenario failed to parse or validate.
   */
  F5G_STATUS_INVALID_SCENARIO = 3,
  /**
   * An internal error; see `f5g_last_error`.
   */
  F5G_STATUS_INTERNAL = 4,
} F5gStatus;

/**
 * Opaque finished run: trace plus metrics.
 */
typedef struct F5gRun F5gRun;

/**
 * Opaque parsed scenario.
 */
typedef struct F5gScenario F5gScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or null if none. The pointer stays
 * valid until the next failing `f5g_*` call on the same thread.
 */
const char *f5g_last_error(void);

/**
 * Library version as a static C string.
 */
const char *f5g_version(void);

/**
 * Parse and validate a scenario from TOML text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated C string; `out` must be a valid
 * pointer. On `Ok` the handle must be released with
 * [`f5g_scenario_free`].
 */
enum F5gStatus f5g_scenario_load(const char *text, struct F5gScenario **out);

/**
 * Release a scenario handle. Null is ignored.
 *
 * # Safety
 * `scenario` must have come from [`f5g_scenario_load`] and not have been
 * freed before.
 */
void f5g_scenario_free(struct F5gScenario *scenario);

/**
 * Run a scenario. `override_seed` replaces the file's seed when
 * `has_override` is true.
 *
 * # Safety
 * `scenario` must be a live handle from [`f5g_scenario_load`]; `out` must
 * be a valid pointer. On `Ok` the run must be released with
 * [`f5g_run_free`].
 */
enum F5gStatus f5g_run(const struct F5gScenario *scenario,
                       bool has_override,
                       uint64_t override_seed,
                       struct F5gRun **out);

/**
 * Release a run handle. Null is ignored.
 *
 * # Safety
 * `run` must have come from [`f5g_run`] and not have been freed before.
 */
void f5g_run_free(struct F5gRun *run);

/**
 * The run's full trace as text, one record per line. Free the string with
 * [`f5g_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` must be a valid pointer.
 */
enum F5gStatus f5g_run_trace_text(const struct F5gRun *run, char **out);

/**
 * The run's metrics report as structured text. Free the string with
 * [`f5g_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` must be a valid pointer.
 */
enum F5gStatus f5g_run_metrics_text(const struct F5gRun *run, char **out);

/**
 * Number of trace records in the run.
 *
 * # Safety
 * `run` must be a live handle.
 */
uint64_t f5g_run_trace_len(const struct F5gRun *run);

/**
 * Free a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by an `f5g_*` text function and not freed
 * before.
 */
void f5g_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRUGAL5G_H */
