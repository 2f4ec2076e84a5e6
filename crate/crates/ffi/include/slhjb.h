#ifndef SLHJB_H
#define SLHJB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
enum SlhjbStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  SLHJB_STATUS_OK = 0,
  /**
   * The solve finished without reaching the stopping tolerance; the
   * handle is still valid.
   */
  SLHJB_STATUS_NOT_CONVERGED = 1,
  SLHJB_STATUS_NULL_POINTER = 2,
  SLHJB_STATUS_INVALID_UTF8 = 3,
  /**
   * Malformed or inconsistent configuration.
   */
  SLHJB_STATUS_CONFIG = 4,
  /**
   * Rejected problem data (grid, time step, dimensions).
   */
  SLHJB_STATUS_INVALID_PROBLEM = 5,
  /**
   * Numerical failure during the sweeps.
   */
  SLHJB_STATUS_NUMERICAL = 6,
  SLHJB_STATUS_IO = 7,
  /**
   * The caller's buffer has the wrong length.
   */
  SLHJB_STATUS_BUFFER_SIZE = 8,
  SLHJB_STATUS_PANIC = 9,
};
#ifndef __cplusplus
typedef int32_t SlhjbStatus;
#endif // __cplusplus

/**
 * Opaque solution handle.
 */
typedef struct SlhjbSolution SlhjbSolution;

/**
 * Scalar facts about a solution.
 */
typedef struct SlhjbInfo {
  /**
   * State dimension.
   */
  size_t dim;
  /**
   * Control dimension.
   */
  size_t controls;
  /**
   * Number of grid nodes.
   */
  size_t nodes;
  /**
   * Nodes per axis; entries past `dim` are 1.
   */
  size_t counts[3];
  /**
   * Lower domain corner; entries past `dim` are 0.
   */
  double lower[3];
  double spacing;
  double time_step;
  size_t sweeps;
  bool converged;
  double final_residual;
} SlhjbInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Solves the problem described by a JSON run configuration (the format read
 * by the `slhjb` command line tool). On `Ok` or `NotConverged` `*out`
 * receives a handle to release with [`slhjb_solution_free`]; otherwise it is
 * set to null.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
SlhjbStatus slhjb_solve_json(const char *config_json, struct SlhjbSolution **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `solution` must come from [`slhjb_solve_json`] and not be used afterwards.
 */
void slhjb_solution_free(struct SlhjbSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle and `info` a valid pointer.
 */
SlhjbStatus slhjb_solution_info(const struct SlhjbSolution *solution, struct SlhjbInfo *info);

/**
 * Copies the value field into `buf` (`len` must equal the node count).
 * Nodes are in lexicographic order with the last axis fastest.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
SlhjbStatus slhjb_solution_values(const struct SlhjbSolution *solution, double *buf, size_t len);

/**
 * Copies the control field into `buf`, node-major with `controls` entries
 * per node (`len` must equal `nodes * controls`).
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
SlhjbStatus slhjb_solution_controls(const struct SlhjbSolution *solution, double *buf, size_t len);

/**
 * Feedback control at an arbitrary state `x` (`dim` entries); writes
 * `controls` entries to `u`. States outside the domain are clamped.
 *
 * # Safety
 * `x` must point to `dim` doubles and `u` to `controls` writable doubles.
 */
SlhjbStatus slhjb_feedback(const struct SlhjbSolution *solution,
                           const double *x,
                           size_t dim,
                           double *u,
                           size_t controls);

/**
 * Writes the configured outputs (fields and `report.json`) into `dir`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string.
 */
SlhjbStatus slhjb_write_solution(const struct SlhjbSolution *solution, const char *dir);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *slhjb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *slhjb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLHJB_H */
