#ifndef VIAFLOW_H
#define VIAFLOW_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfStatus {
  VF_STATUS_OK = 0,
  VF_STATUS_CONFIG = 1,
  VF_STATUS_SOLVER = 2,
  VF_STATUS_IO = 3,
  VF_STATUS_NULL_ARGUMENT = 4,
  VF_STATUS_INVALID_UTF8 = 5,
  VF_STATUS_PANIC = 6,
} VfStatus;

/**
 * DC operating point of a netlist.
 */
typedef struct VfDcSolution VfDcSolution;

/**
 * Parsed circuit netlist.
 */
typedef struct VfNetlist VfNetlist;

/**
 * Parsed project configuration.
 */
typedef struct VfProject VfProject;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *vf_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *vf_last_error(void);

/**
 * Frees a string returned by the library.
 *
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void vf_string_free(char *s);

/**
 * Parses configuration text; relative paths resolve against `base_dir` (may be null).
 *
 * # Safety
 * `text` and non-null `base_dir` are NUL-terminated; `out` is writable.
 */
enum VfStatus vf_project_parse(const char *text, const char *base_dir, struct VfProject **out);

/**
 * Loads a configuration file; relative paths resolve against its directory.
 *
 * # Safety
 * `path` is NUL-terminated; `out` is writable.
 */
enum VfStatus vf_project_load(const char *path, struct VfProject **out);

/**
 * # Safety
 * `p` is null or a live project handle.
 */
void vf_project_free(struct VfProject *p);

/**
 * Number of scenarios in the project.
 *
 * # Safety
 * `p` is a live project handle.
 */
size_t vf_project_scenario_count(const struct VfProject *p);

/**
 * Canonical TOML of the project in SI units; free with [`vf_string_free`].
 *
 * # Safety
 * `p` is a live project handle; `out` is writable.
 */
enum VfStatus vf_project_to_toml(const struct VfProject *p, char **out);

/**
 * Runs a scenario into `out_dir/<scenario>/`. `threads` of 0 uses all cores.
 *
 * # Safety
 * `p` is a live project handle; strings are NUL-terminated.
 */
enum VfStatus vf_project_run(const struct VfProject *p,
                             const char *scenario,
                             const char *out_dir,
                             uint32_t threads);

/**
 * Parses a netlist; file references resolve against `base_dir` (may be null).
 *
 * # Safety
 * `text` and non-null `base_dir` are NUL-terminated; `out` is writable.
 */
enum VfStatus vf_netlist_parse(const char *text, const char *base_dir, struct VfNetlist **out);

/**
 * # Safety
 * `n` is null or a live netlist handle.
 */
void vf_netlist_free(struct VfNetlist *n);

/**
 * DC operating point.
 *
 * # Safety
 * `n` is a live netlist handle; `out` is writable.
 */
enum VfStatus vf_netlist_dc(const struct VfNetlist *n, struct VfDcSolution **out);

/**
 * Voltage of `node` in volts.
 *
 * # Safety
 * `s` is a live solution handle; `node` is NUL-terminated; `out` is writable.
 */
enum VfStatus vf_dc_voltage(const struct VfDcSolution *s, const char *node, double *out);

/**
 * KCL residual of the solution, A.
 *
 * # Safety
 * `s` is a live solution handle.
 */
double vf_dc_kcl_residual(const struct VfDcSolution *s);

/**
 * # Safety
 * `s` is null or a live solution handle.
 */
void vf_dc_free(struct VfDcSolution *s);

/**
 * Per-unit-length resistance (Ω/m) of a round wire at `n` strictly
 * increasing frequencies, by the filament method on a `cell_size` grid.
 *
 * # Safety
 * `frequencies` holds `n` values and `out` has room for `n`.
 */
enum VfStatus vf_wire_resistance(double diameter,
                                 double conductivity,
                                 double cell_size,
                                 const double *frequencies,
                                 size_t n,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIAFLOW_H */
