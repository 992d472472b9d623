#ifndef LAGFLOW_H
#define LAGFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the CLI exit codes.
 */
typedef enum {
  LAGFLOW_STATUS_OK = 0,
  LAGFLOW_STATUS_INVALID_ARGUMENT = 1,
  LAGFLOW_STATUS_PROPERTY_VIOLATION = 2,
  LAGFLOW_STATUS_INTEGRATION_FAILURE = 3,
} LagflowStatus;

/**
 * Opaque simulation handle: one flow state plus its step control.
 */
typedef struct LagflowSim LagflowSim;

/**
 * One diagnostics row with the numeric fields of the CSV schema.
 */
typedef struct {
  double t;
  double min_eta;
  /**
   * M = ∫|H|²/η
   */
  double m_h2_over_eta;
  double i_h2;
  double i_a2;
  double sup_a2;
  double sup_h;
  double gauss_gap;
  double det_drift;
  double sym_defect;
  double dt;
} LagflowDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread. The pointer stays valid
 * until the next failing call on the same thread; do not free it.
 */
const char *lagflow_last_error_message(void);

/**
 * Library version as a static string; do not free.
 */
const char *lagflow_version(void);

/**
 * Runs a complete flow per the JSON config (same semantics as
 * `lagflow run`); returns the exit code as a status.
 *
 * # Safety
 * `config_json` must be a NUL-terminated C string.
 */
LagflowStatus lagflow_run(const char *config_json);

/**
 * Runs the randomized verification suites (same semantics as
 * `lagflow verify`).
 *
 * # Safety
 * `config_json` must be a NUL-terminated C string.
 */
LagflowStatus lagflow_verify(const char *config_json);

/**
 * Creates a stepping handle from a JSON config. Returns null on error.
 *
 * # Safety
 * `config_json` must be a NUL-terminated C string.
 */
LagflowSim *lagflow_sim_new(const char *config_json);

/**
 * Creates a stepping handle from a snapshot file, using the config for
 * resolution and step control. Returns null on error.
 *
 * # Safety
 * Both arguments must be NUL-terminated C strings.
 */
LagflowSim *lagflow_sim_from_snapshot(const char *snapshot_path, const char *config_json);

/**
 * Advances the flow by at most `max_steps` RK4 steps, stopping at the
 * config's t_end.
 *
 * # Safety
 * `sim` must be a live handle from `lagflow_sim_new`/`_from_snapshot`.
 */
LagflowStatus lagflow_sim_step(LagflowSim *sim, uint64_t max_steps);

/**
 * Current flow time of the handle, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double lagflow_sim_time(const LagflowSim *sim);

/**
 * Fills `out` with the diagnostics of the current slice.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid destination.
 */
LagflowStatus lagflow_sim_measure(LagflowSim *sim, LagflowDiagnostics *out);

/**
 * Writes a snapshot of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `path` a NUL-terminated C string.
 */
LagflowStatus lagflow_sim_save_snapshot(const LagflowSim *sim, const char *path);

/**
 * Releases a handle; null is a no-op.
 *
 * # Safety
 * `sim` must be null or a live handle; the pointer is invalid afterwards.
 */
void lagflow_sim_free(LagflowSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAGFLOW_H */
