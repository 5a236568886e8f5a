#ifndef SPECTRUM_SHARE_H
#define SPECTRUM_SHARE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. Simulator errors use the same values as the CLI exit codes.
typedef enum SpshareStatus {
  SPSHARE_STATUS_OK = 0,
  SPSHARE_STATUS_IO = 1,
  SPSHARE_STATUS_CONFIG = 2,
  SPSHARE_STATUS_INVARIANT = 3,
  SPSHARE_STATUS_NULL_ARGUMENT = 4,
  SPSHARE_STATUS_INVALID_ARGUMENT = 5,
  SPSHARE_STATUS_PANIC = 6,
} SpshareStatus;

// Opaque result of one run.
typedef struct SpshareReport SpshareReport;

// Opaque scenario handle.
typedef struct SpshareScenario SpshareScenario;

// Metrics of one provider, or of all providers pooled.
typedef struct SpshareProviderMetrics {
  uint64_t n_blocked;
  uint64_t n_processed;
  uint64_t n_channels;
  double eta_s;
  double eta_s_user_weighted;
  double c_e;
  double active_users_mean;
  double traffic_load_offered;
} SpshareProviderMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *spshare_last_error_message(void);

// Parses a scenario from a NUL-terminated UTF-8 JSON document.
//
// # Safety
// `json` must be a valid C string and `out` a writable pointer.
enum SpshareStatus spshare_scenario_from_json(const char *json, struct SpshareScenario **out);

// # Safety
// `scenario` must be NULL or a handle from this library not yet freed.
void spshare_scenario_free(struct SpshareScenario *scenario);

// # Safety
// `scenario` must be a live scenario handle.
enum SpshareStatus spshare_scenario_set_seed(struct SpshareScenario *scenario, uint64_t seed);

// Runs the scenario to completion.
//
// # Safety
// `scenario` must be a live scenario handle and `out` a writable pointer.
enum SpshareStatus spshare_run(const struct SpshareScenario *scenario, struct SpshareReport **out);

// # Safety
// `report` must be NULL or a handle from this library not yet freed.
void spshare_report_free(struct SpshareReport *report);

// Global blocking rate; NaN when no call was decided.
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SpshareStatus spshare_report_blocking_rate(const struct SpshareReport *report, double *out);

// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SpshareStatus spshare_report_provider_count(const struct SpshareReport *report, size_t *out);

// Metrics of provider `index`.
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SpshareStatus spshare_report_provider(const struct SpshareReport *report,
                                           size_t index,
                                           struct SpshareProviderMetrics *out);

// Metrics pooled over all providers.
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SpshareStatus spshare_report_total(const struct SpshareReport *report,
                                        struct SpshareProviderMetrics *out);

// The report as CSV text, same layout as the command line tool. Release the
// string with [`spshare_string_free`].
//
// # Safety
// `report` must be a live report handle and `out` a writable pointer.
enum SpshareStatus spshare_report_to_csv(const struct SpshareReport *report, char **out);

// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void spshare_string_free(char *s);

// SBAC utility of one channel. Returns NaN and sets the last error when the
// weights are invalid.
double spshare_channel_utility(double prob,
                               double inter_norm,
                               double cost,
                               double beta1,
                               double beta2,
                               double beta3);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRUM_SHARE_H */
