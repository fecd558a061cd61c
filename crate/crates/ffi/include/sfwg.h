#ifndef SFWG_H
#define SFWG_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfwgStatus {
  SFWG_STATUS_OK = 0,
  SFWG_STATUS_NULL_POINTER = 1,
  SFWG_STATUS_INVALID_ARGUMENT = 2,
  SFWG_STATUS_PARSE = 3,
  SFWG_STATUS_TOPOLOGY = 4,
  SFWG_STATUS_SOLVER = 5,
  SFWG_STATUS_IO = 6,
  /**
   * The point lies outside every cell.
   */
  SFWG_STATUS_NOT_FOUND = 7,
  SFWG_STATUS_PANIC = 8,
} SfwgStatus;

/**
 * A mesh of the unit square.
 */
typedef struct SfwgMesh SfwgMesh;

/**
 * A discrete solution together with its mesh, degrees and, for built-in
 * problems, its errors.
 */
typedef struct SfwgSolution SfwgSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *sfwg_last_error(void);

/**
 * Library version as a static string.
 */
const char *sfwg_version(void);

/**
 * Uniform triangular mesh with `n` subdivisions per side.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum SfwgStatus sfwg_mesh_triangular(size_t n, struct SfwgMesh **out);

/**
 * Hexagon-dominant mesh with `n` hexagon columns, `n >= 2`.
 *
 * # Safety
 * `out` must be valid for writing a pointer.
 */
enum SfwgStatus sfwg_mesh_polygonal(size_t n, struct SfwgMesh **out);

/**
 * Reads a mesh file in the `polymesh 1` text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for writing.
 */
enum SfwgStatus sfwg_mesh_load(const char *path, struct SfwgMesh **out);

/**
 * # Safety
 * `mesh` must come from a `sfwg_mesh_*` constructor and not be used again.
 */
void sfwg_mesh_free(struct SfwgMesh *mesh);

/**
 * Vertex, cell and edge counts and the mesh size `h`. Any output pointer
 * may be null.
 *
 * # Safety
 * `mesh` must be a live handle; non-null outputs must be writable.
 */
enum SfwgStatus sfwg_mesh_info(const struct SfwgMesh *mesh,
                               size_t *num_vertices,
                               size_t *num_cells,
                               size_t *num_edges,
                               double *h);

/**
 * Solves built-in problem `example` (1 or 2) on `mesh` with degree `k`.
 * `j = 0` selects k+2 on all-triangle meshes and k+4 otherwise; `tol <= 0`
 * selects the default. Errors against the exact solution are computed
 * once and kept on the handle. The mesh handle stays owned by the caller.
 *
 * # Safety
 * `mesh` must be a live handle; `out` valid for writing.
 */
enum SfwgStatus sfwg_solve_example(const struct SfwgMesh *mesh,
                                   uint32_t example,
                                   size_t k,
                                   size_t j,
                                   double tol,
                                   struct SfwgSolution **out);

/**
 * # Safety
 * `solution` must come from [`sfwg_solve_example`] and not be used again.
 */
void sfwg_solution_free(struct SfwgSolution *solution);

/**
 * Triple-bar, broken `H²` and `L²` errors, in that order.
 *
 * # Safety
 * `solution` must be a live handle; outputs must be writable.
 */
enum SfwgStatus sfwg_solution_errors(const struct SfwgSolution *solution,
                                     double *err_triple,
                                     double *err_2h,
                                     double *err_l2);

/**
 * Degrees `k`, `j` and the number of free unknowns.
 *
 * # Safety
 * `solution` must be a live handle; outputs must be writable.
 */
enum SfwgStatus sfwg_solution_info(const struct SfwgSolution *solution,
                                   size_t *k,
                                   size_t *j,
                                   size_t *free_dofs);

/**
 * Value of the interior component `u_0` at `(x, y)`.
 *
 * # Safety
 * `solution` must be a live handle; `value` must be writable.
 */
enum SfwgStatus sfwg_solution_eval(const struct SfwgSolution *solution,
                                   double x,
                                   double y,
                                   double *value);

/**
 * Runs a convergence study and returns the CSV report (with provenance
 * header) as a string to be released with [`sfwg_string_free`].
 * `mesh_family` is `"tri"` or `"poly"`; `j = 0` picks the default.
 *
 * # Safety
 * `mesh_family` must be NUL-terminated, `levels` must point to
 * `num_levels` values, `out` must be writable.
 */
enum SfwgStatus sfwg_study_csv(uint32_t example,
                               const char *mesh_family,
                               size_t k,
                               size_t j,
                               const size_t *levels,
                               size_t num_levels,
                               char **out);

/**
 * # Safety
 * `s` must come from this library and not be used again.
 */
void sfwg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFWG_H */
