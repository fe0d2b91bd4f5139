#ifndef YKREG_H
#define YKREG_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum YkStatus {
  YK_STATUS_OK = 0,
  YK_STATUS_NULL_POINTER = 1,
  YK_STATUS_INVALID_ARGUMENT = 2,
  YK_STATUS_SCENARIO = 3,
  YK_STATUS_DESIGN = 4,
  YK_STATUS_SPECTRUM = 5,
  YK_STATUS_SIMULATION = 6,
  YK_STATUS_BUFFER_TOO_SMALL = 7,
  YK_STATUS_PANIC = 8,
} YkStatus;

/**
 * Column selector for [`ykreg_time_series_copy`].
 */
typedef enum YkColumn {
  YK_COLUMN_TIME = 0,
  YK_COLUMN_OUTPUT = 1,
  YK_COLUMN_CONTROL = 2,
  YK_COLUMN_DISTURBANCE = 3,
  YK_COLUMN_ERROR = 4,
} YkColumn;

/**
 * Root selector for [`ykreg_sensitivity_spectrum`].
 */
typedef enum YkRootKind {
  YK_ROOT_KIND_ZEROS = 0,
  YK_ROOT_KIND_POLES = 1,
  YK_ROOT_KIND_BOTH = 2,
} YkRootKind;

typedef struct YkDesign YkDesign;

typedef struct YkRootSet YkRootSet;

typedef struct YkScenario YkScenario;

typedef struct YkTimeSeries YkTimeSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ykreg_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the untruncated length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t ykreg_last_error_message(char *buf, size_t cap);

/**
 * Loads a built-in preset by name or a scenario file by path.
 *
 * # Safety
 * `name_or_path` must be a valid C string and `out` a valid pointer.
 */
enum YkStatus ykreg_scenario_load(const char *name_or_path, struct YkScenario **out);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `text` must be a valid C string and `out` a valid pointer.
 */
enum YkStatus ykreg_scenario_from_toml(const char *text, struct YkScenario **out);

/**
 * # Safety
 * `sc` must be null or a handle from a scenario constructor, freed once.
 */
void ykreg_scenario_free(struct YkScenario *sc);

/**
 * Designs the parameter gains, or evaluates the fixed gains of the scenario.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` a valid pointer.
 */
enum YkStatus ykreg_design(const struct YkScenario *sc, struct YkDesign **out);

/**
 * # Safety
 * `d` must be null or a handle from [`ykreg_design`], freed once.
 */
void ykreg_design_free(struct YkDesign *d);

/**
 * Copies the gains `a_0..a_N`.
 *
 * # Safety
 * `d` must be a live design handle; `buf` null or valid for `cap` values;
 * `len_out` null or valid.
 */
enum YkStatus ykreg_design_gains(const struct YkDesign *d,
                                 double *buf,
                                 size_t cap,
                                 size_t *len_out);

/**
 * Copies `|S|` at DC (when targeted) followed by each harmonic.
 *
 * # Safety
 * Same contract as [`ykreg_design_gains`].
 */
enum YkStatus ykreg_design_sensitivity_at_harmonics(const struct YkDesign *d,
                                                    double *buf,
                                                    size_t cap,
                                                    size_t *len_out);

/**
 * Residual, numerical rank and condition number of the solved system.
 *
 * # Safety
 * `d` must be a live design handle; each output pointer null or valid.
 */
enum YkStatus ykreg_design_summary(const struct YkDesign *d,
                                   double *residual_inf,
                                   size_t *rank,
                                   double *condition);

/**
 * 1 when every targeted `|S|` is at most `tol` and the system has full row
 * rank, 0 otherwise (including for a null handle).
 *
 * # Safety
 * `d` must be null or a live design handle.
 */
int32_t ykreg_design_passes(const struct YkDesign *d, double tol);

/**
 * Evaluates the closed-loop sensitivity at `s = jω`. A null design uses the
 * zero parameter.
 *
 * # Safety
 * `sc` must be a live scenario handle, `d` null or a live design handle,
 * `re` and `im` valid pointers.
 */
enum YkStatus ykreg_sensitivity_eval(const struct YkScenario *sc,
                                     const struct YkDesign *d,
                                     double omega,
                                     double *re,
                                     double *im);

/**
 * Simulates the scenario's closed loop. A null design runs the plain
 * stabilizing controller.
 *
 * # Safety
 * `sc` must be a live scenario handle, `d` null or a live design handle,
 * `out` a valid pointer.
 */
enum YkStatus ykreg_simulate(const struct YkScenario *sc,
                             const struct YkDesign *d,
                             struct YkTimeSeries **out);

/**
 * Number of samples, 0 for a null handle.
 *
 * # Safety
 * `ts` must be null or a live time-series handle.
 */
size_t ykreg_time_series_len(const struct YkTimeSeries *ts);

/**
 * Copies one column of the time series.
 *
 * # Safety
 * `ts` must be a live time-series handle; `buf` null or valid for `cap`
 * values; `len_out` null or valid.
 */
enum YkStatus ykreg_time_series_copy(const struct YkTimeSeries *ts,
                                     enum YkColumn column,
                                     double *buf,
                                     size_t cap,
                                     size_t *len_out);

/**
 * # Safety
 * `ts` must be null or a handle from [`ykreg_simulate`], freed once.
 */
void ykreg_time_series_free(struct YkTimeSeries *ts);

/**
 * Locates sensitivity zeros and/or poles in the scenario's spectrum region.
 *
 * # Safety
 * `sc` must be a live scenario handle, `d` null or a live design handle,
 * `out` a valid pointer.
 */
enum YkStatus ykreg_sensitivity_spectrum(const struct YkScenario *sc,
                                         const struct YkDesign *d,
                                         enum YkRootKind kind,
                                         struct YkRootSet **out);

/**
 * Number of roots, 0 for a null handle.
 *
 * # Safety
 * `roots` must be null or a live root-set handle.
 */
size_t ykreg_roots_len(const struct YkRootSet *roots);

/**
 * Copies root locations and residuals into parallel arrays. `is_pole`
 * receives 1 for poles and 0 for zeros. Any output array may be null.
 *
 * # Safety
 * `roots` must be a live root-set handle; each non-null array must hold
 * `cap` elements; `len_out` null or valid.
 */
enum YkStatus ykreg_roots_copy(const struct YkRootSet *roots,
                               double *re,
                               double *im,
                               double *residual,
                               int32_t *is_pole,
                               size_t cap,
                               size_t *len_out);

/**
 * # Safety
 * `roots` must be null or a handle from [`ykreg_sensitivity_spectrum`],
 * freed once.
 */
void ykreg_roots_free(struct YkRootSet *roots);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YKREG_H */
