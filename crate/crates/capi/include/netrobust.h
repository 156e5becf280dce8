/* C interface of the netrobust analysis library. */

#ifndef NETROBUST_H
#define NETROBUST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum NrStatus {
  NrOk = 0,
  NrNullArgument = 1,
  NrInvalidUtf8 = 2,
  NrConfigError = 3,
  NrAnalysisError = 4,
  NrIndexOutOfRange = 5,
  NrNoValue = 6,
} NrStatus;

/**
 * Opaque analysis report handle.
 */
typedef struct NrReport NrReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nr_version(void);

/**
 * Message of the most recent error on this thread, or NULL.
 */
const char *nr_last_error(void);

/**
 * Run the analysis described by a JSON configuration string. On success the
 * report handle is stored in `out_report` and must be released with
 * `nr_report_free`.
 *
 * # Safety
 * `config_json` must point to a NUL-terminated string; `out_report` must be
 * a valid writable pointer.
 */
enum NrStatus nr_analyze(const char *config_json, struct NrReport **out_report);

/**
 * Pipeline exit code of the analysis: 0 all frequencies pass the bound,
 * 2 some certified bound exceeds it, 1 partial/failed analysis.
 */
int nr_report_exit_code(const struct NrReport *report);

/**
 * Number of frequency records.
 */
uintptr_t nr_report_len(const struct NrReport *report);

/**
 * Frequency of record `index`, in Hz.
 *
 * # Safety
 * `report` must be a live handle from `nr_analyze`; `out` must be writable.
 */
enum NrStatus nr_report_freq_hz(const struct NrReport *report, uintptr_t index, double *out);

/**
 * Certified upper bound at record `index`, in dB.
 *
 * # Safety
 * As for `nr_report_freq_hz`.
 */
enum NrStatus nr_report_gamma_ub_db(const struct NrReport *report, uintptr_t index, double *out);

/**
 * Sampled lower bound at record `index`, in dB.
 *
 * # Safety
 * As for `nr_report_freq_hz`.
 */
enum NrStatus nr_report_gamma_lb_db(const struct NrReport *report, uintptr_t index, double *out);

/**
 * Bound test at record `index`: 1 pass, 0 fail, -1 analysis failure.
 */
int nr_report_pass(const struct NrReport *report, uintptr_t index);

/**
 * Serialize the full report to JSON. The returned string must be released
 * with `nr_string_free`. Pass a nonzero `include_timings` to embed
 * wall-clock data (not byte-stable across runs).
 */
char *nr_report_to_json(const struct NrReport *report, int include_timings);

/**
 * Release a string returned by `nr_report_to_json`.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void nr_string_free(char *s);

/**
 * Release a report handle.
 *
 * # Safety
 * `report` must come from `nr_analyze` and not be freed twice.
 */
void nr_report_free(struct NrReport *report);

/**
 * Chi-squared quantile helper: the level for a probability and degrees of
 * freedom.
 *
 * # Safety
 * `out` must be writable.
 */
enum NrStatus nr_chi2_quantile(double probability, uint32_t dof, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETROBUST_H */
