#ifndef EDM_SNL_H
#define EDM_SNL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum EdmSnlError {
  EDM_SNL_ERROR_OK = 0,
  // A required pointer was null.
  EDM_SNL_ERROR_NULL_POINTER = 1,
  // An argument or parameter was out of range.
  EDM_SNL_ERROR_INVALID_ARGUMENT = 2,
  // Reading or writing a file failed, or its contents were malformed.
  EDM_SNL_ERROR_IO = 3,
  // The computation failed numerically or the input was inconsistent.
  EDM_SNL_ERROR_NUMERICAL = 4,
  // A caller-supplied buffer is too small.
  EDM_SNL_ERROR_BUFFER_TOO_SMALL = 5,
  // An internal error was caught at the boundary.
  EDM_SNL_ERROR_PANIC = 6,
} EdmSnlError;

// Formulation selector for [`edm_snl_solve`].
typedef enum EdmSnlForm {
  EDM_SNL_FORM_QUADRATIC = 0,
  EDM_SNL_FORM_LINEARIZED = 1,
} EdmSnlForm;

// Termination status of a solve.
typedef enum EdmSnlStatus {
  EDM_SNL_STATUS_CONVERGED = 0,
  EDM_SNL_STATUS_MAX_ITER = 1,
  EDM_SNL_STATUS_NUMERICAL_FAILURE = 2,
} EdmSnlStatus;

// Opaque problem instance.
typedef struct EdmSnlInstance EdmSnlInstance;

// Opaque solve result.
typedef struct EdmSnlSolution EdmSnlSolution;

// Parameters of a random instance; see [`edm_snl_generate_defaults`].
typedef struct EdmSnlGenerateParams {
  size_t r;
  size_t n;
  size_t m;
  // Radio range; `INFINITY` for unlimited.
  double radio_range;
  double density;
  double noise_sigma;
  double square_half_width;
  uint64_t seed;
  // Nonzero adds lower bounds for pairs out of range.
  int out_of_range_bounds;
} EdmSnlGenerateParams;

// Solver options; see [`edm_snl_solve_defaults`].
typedef struct EdmSnlSolveParams {
  enum EdmSnlForm form;
  // Nonzero enables automatic sensor clique detection.
  int detect_cliques;
  // Smallest clique accepted by detection; 0 means `r + 2`.
  size_t min_clique_size;
  double gap_tol;
  size_t max_iter;
} EdmSnlSolveParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or null. Valid
// until the next failing call on the same thread.
const char *edm_snl_last_error(void);

// Library version as a static NUL-terminated string.
const char *edm_snl_version(void);

struct EdmSnlGenerateParams edm_snl_generate_defaults(void);

struct EdmSnlSolveParams edm_snl_solve_defaults(void);

// Draws a random connected instance.
//
// # Safety
// `params` must point to a valid struct and `out` to writable storage.
enum EdmSnlError edm_snl_generate(const struct EdmSnlGenerateParams *params,
                                  struct EdmSnlInstance **out);

// Reads an instance JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum EdmSnlError edm_snl_instance_load(const char *path, struct EdmSnlInstance **out);

// Writes an instance as JSON.
//
// # Safety
// `inst` must be a live handle and `path` a NUL-terminated string.
enum EdmSnlError edm_snl_instance_save(const struct EdmSnlInstance *inst, const char *path);

// Dimension, sensor count and anchor count. Null outputs are skipped.
//
// # Safety
// `inst` must be a live handle; non-null outputs must be writable.
enum EdmSnlError edm_snl_instance_dims(const struct EdmSnlInstance *inst,
                                       size_t *r,
                                       size_t *n,
                                       size_t *m);

// # Safety
// `inst` must be null or a handle not yet freed.
void edm_snl_instance_free(struct EdmSnlInstance *inst);

// Solves the relaxation. A solve that stops without converging still
// produces a handle; query [`edm_snl_solution_status`].
//
// # Safety
// `inst` must be a live handle, `params` null (defaults) or valid, and
// `out` writable.
enum EdmSnlError edm_snl_solve(const struct EdmSnlInstance *inst,
                               const struct EdmSnlSolveParams *params,
                               struct EdmSnlSolution **out);

// # Safety
// `sol` must be a live handle.
enum EdmSnlStatus edm_snl_solution_status(const struct EdmSnlSolution *sol);

// Objective, relative gap, iteration count and reduced order. Null outputs
// are skipped.
//
// # Safety
// `sol` must be a live handle; non-null outputs must be writable.
enum EdmSnlError edm_snl_solution_summary(const struct EdmSnlSolution *sol,
                                          double *objective,
                                          double *relgap,
                                          size_t *iterations,
                                          size_t *reduced_order);

// Copies the `(n + m) x (n + m)` Gram matrix into `buf`.
//
// # Safety
// `sol` must be a live handle and `buf` must hold `len` doubles.
enum EdmSnlError edm_snl_solution_gram(const struct EdmSnlSolution *sol, double *buf, size_t len);

// Extracts sensor positions with Method 1 or 2. `positions` receives the
// `n x r` estimate in the instance's original coordinates; `measures`
// (three doubles, may be null) receives Measures 1 to 3, with `NAN` for
// Measure 2 when the instance has no ground truth.
//
// # Safety
// Handles must be live and belong together; `positions` must hold `len`
// doubles and `measures`, when non-null, three.
enum EdmSnlError edm_snl_locate(const struct EdmSnlInstance *inst,
                                const struct EdmSnlSolution *sol,
                                int method,
                                double *positions,
                                size_t len,
                                double *measures);

// # Safety
// `sol` must be null or a handle not yet freed.
void edm_snl_solution_free(struct EdmSnlSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDM_SNL_H */
