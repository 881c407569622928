#ifndef PACC_H
#define PACC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Nonzero values match the `pacc` CLI exit codes where one
 * exists.
 */
typedef enum PaccStatus {
  PACC_STATUS_OK = 0,
  PACC_STATUS_NULL_POINTER = 1,
  PACC_STATUS_INVALID_INPUT = 2,
  PACC_STATUS_DEGENERATE = 3,
  PACC_STATUS_COLLISION = 4,
  PACC_STATUS_IO = 5,
  PACC_STATUS_PANIC = 6,
} PaccStatus;

/**
 * A receding-horizon controller bound to one driver model.
 */
typedef struct PaccController PaccController;

/**
 * A driver model (cost weights, headway, clearance, segment length).
 */
typedef struct PaccModel PaccModel;

/**
 * The outcome of a scenario run.
 */
typedef struct PaccReport PaccReport;

typedef struct PaccIdmParams {
  double a_max;
  double b_max;
  double delta;
  double v_s;
  double s0;
  double t_headway;
} PaccIdmParams;

typedef struct PaccControllerConfig {
  double prediction_horizon;
  double control_horizon;
  double sample_time;
  double dx_min;
  double a_min;
  double a_max;
} PaccControllerConfig;

typedef struct PaccStepResult {
  double a_cmd;
  double objective;
  /**
   * No plan met the gap constraint; `a_cmd` is full braking.
   */
  bool safety_fallback;
} PaccStepResult;

/**
 * Run metrics. `*_valid` is false when the metric is undefined (e.g. a run
 * aborted before two steps).
 */
typedef struct PaccMetrics {
  double dx_m;
  bool dx_m_valid;
  double t_m;
  bool t_m_valid;
  double f_c;
  bool f_c_valid;
  double duration_s;
  size_t safety_fallback_count;
  bool collided;
} PaccMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pacc_last_error_message(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from a `pacc_*_to_json` call, or be NULL.
 */
void pacc_string_free(char *s);

/**
 * Build a model with the default clearance (5 m) and segment length (3 s).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum PaccStatus pacc_model_new(double w_a,
                               double w_ds,
                               double w_rs,
                               double w_rd,
                               double tau,
                               struct PaccModel **out);

/**
 * Parse a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PaccStatus pacc_model_from_json(const char *json, struct PaccModel **out);

/**
 * Load a model JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PaccStatus pacc_model_load(const char *path, struct PaccModel **out);

/**
 * Serialize a model; release the result with [`pacc_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum PaccStatus pacc_model_to_json(const struct PaccModel *model, char **out);

/**
 * Copy the weights `(a, ds, rs, rd)` and `tau` out of a model.
 *
 * # Safety
 * `model` must be a live handle; `weights` must point to 4 writable doubles;
 * `tau` must be writable.
 */
enum PaccStatus pacc_model_params(const struct PaccModel *model, double *weights, double *tau);

/**
 * # Safety
 * `model` must be a handle from this library (or NULL) and not used again.
 */
void pacc_model_free(struct PaccModel *model);

/**
 * Default IDM parameters for cruise speed `v_s`.
 */
struct PaccIdmParams pacc_idm_default(double v_s);

/**
 * IDM acceleration at speed `v`, closing speed `dv` and gap `s`.
 *
 * # Safety
 * `params` must point to valid parameters; `out` must be writable.
 */
enum PaccStatus pacc_idm_accel(double v,
                               double dv,
                               double s,
                               const struct PaccIdmParams *params,
                               double *out);

/**
 * Default controller settings.
 */
struct PaccControllerConfig pacc_controller_config_default(void);

/**
 * Create a controller for `model`. `config` may be NULL for defaults.
 *
 * # Safety
 * `model` must be a live handle; `config` valid or NULL; `out` writable.
 */
enum PaccStatus pacc_controller_new(const struct PaccModel *model,
                                    const struct PaccControllerConfig *config,
                                    struct PaccController **out);

/**
 * One controller tick. `preview` holds the PV speed at the current tick and
 * each following tick of the prediction horizon.
 *
 * # Safety
 * `controller` must be live; `preview` must point to `preview_len` doubles;
 * `out` must be writable.
 */
enum PaccStatus pacc_controller_step(struct PaccController *controller,
                                     double gap,
                                     double speed,
                                     double a_prev,
                                     const double *preview,
                                     size_t preview_len,
                                     struct PaccStepResult *out);

/**
 * # Safety
 * `controller` must be a handle from this library (or NULL) and not used again.
 */
void pacc_controller_free(struct PaccController *controller);

/**
 * Run the scenario TOML at `config_path`. A collision still yields a report
 * (with `collided` set) and returns `PACC_STATUS_COLLISION`.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum PaccStatus pacc_scenario_run(const char *config_path, struct PaccReport **out);

/**
 * # Safety
 * `report` must be live; `out` must be writable.
 */
enum PaccStatus pacc_report_metrics(const struct PaccReport *report, struct PaccMetrics *out);

/**
 * Report JSON as written by `pacc simulate`; release with [`pacc_string_free`].
 *
 * # Safety
 * `report` must be live; `out` must be writable.
 */
enum PaccStatus pacc_report_to_json(const struct PaccReport *report, char **out);

/**
 * # Safety
 * `report` must be a handle from this library (or NULL) and not used again.
 */
void pacc_report_free(struct PaccReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACC_H */
