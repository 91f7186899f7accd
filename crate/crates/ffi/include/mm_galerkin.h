#ifndef MM_GALERKIN_H
#define MM_GALERKIN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MmgBackend {
  MMG_BACKEND_AUTO = 0,
  MMG_BACKEND_DENSE_LU = 1,
  MMG_BACKEND_PSEUDOINVERSE = 2,
  MMG_BACKEND_BLOCK_TRIDIAGONAL = 3,
} MmgBackend;

typedef enum MmgStatus {
  MMG_STATUS_OK = 0,
  MMG_STATUS_NULL_POINTER = 1,
  MMG_STATUS_INVALID_ARGUMENT = 2,
  MMG_STATUS_DIMENSION_MISMATCH = 3,
  MMG_STATUS_NOT_CONVERGED = 4,
  MMG_STATUS_SINGULAR = 5,
  MMG_STATUS_NOT_DETECTABLE = 6,
  MMG_STATUS_UNSTABLE_GAIN = 7,
  MMG_STATUS_NON_FINITE = 8,
  MMG_STATUS_INTEGRATION = 9,
  MMG_STATUS_CONFIG = 10,
  MMG_STATUS_FORMAT = 11,
  MMG_STATUS_IO = 12,
  MMG_STATUS_BUFFER_TOO_SMALL = 13,
  MMG_STATUS_PANIC = 14,
} MmgStatus;

/**
 * A problem: signal generator plus full-order system.
 */
typedef struct MmgProblem MmgProblem;

typedef struct MmgRom MmgRom;

/**
 * Result of a Galerkin solve, converged or not.
 */
typedef struct MmgSolution MmgSolution;

typedef struct MmgSolverOptions {
  /**
   * Stop when `‖F‖_1` falls below this.
   */
  double tol_f_l1;
  uint32_t max_iter;
  enum MmgBackend backend;
  double rank_cutoff;
  double damping;
} MmgSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the next
 * call into this library from the same thread.
 */
const char *mmg_last_error_message(void);

/**
 * Static, NUL-terminated version string.
 */
const char *mmg_version(void);

struct MmgSolverOptions mmg_solver_options_default(void);

/**
 * Build a named built-in problem. `keys` and `values` hold `n_params`
 * parameter overrides and may be null when `n_params` is zero.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; strings NUL-terminated.
 */
enum MmgStatus mmg_problem_builtin(const char *name,
                                   const char *const *keys,
                                   const double *values,
                                   size_t n_params,
                                   struct MmgProblem **out);

/**
 * Build the problem described by a run configuration in TOML.
 *
 * # Safety
 * `toml` must be NUL-terminated; `out` must be writable.
 */
enum MmgStatus mmg_problem_from_toml(const char *toml, struct MmgProblem **out);

/**
 * # Safety
 * `p` must come from this library or be null.
 */
void mmg_problem_free(struct MmgProblem *p);

/**
 * State dimension `n`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be a live handle or null.
 */
size_t mmg_problem_state_dim(const struct MmgProblem *p);

/**
 * Generator dimension `d`, or 0 for a null handle.
 *
 * # Safety
 * `p` must be a live handle or null.
 */
size_t mmg_problem_generator_dim(const struct MmgProblem *p);

/**
 * Solve the invariance equation on the box `[lo, hi]` with total degree
 * `degree`. `quad_order` of 0 selects the default rule. `options` may be
 * null for defaults.
 *
 * When Newton stops without converging the handle is still returned together
 * with `MMG_STATUS_NOT_CONVERGED`, so the iterate can be inspected.
 *
 * # Safety
 * `lo` and `hi` must each hold `dim` values; `out` must be writable.
 */
enum MmgStatus mmg_solve(const struct MmgProblem *problem,
                         const double *lo,
                         const double *hi,
                         size_t dim,
                         uint32_t degree,
                         size_t quad_order,
                         const struct MmgSolverOptions *options,
                         struct MmgSolution **out);

/**
 * Load coefficients written by the command-line tool. The file must have been
 * produced for `problem`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum MmgStatus mmg_solution_read(const struct MmgProblem *problem,
                                 const char *path,
                                 struct MmgSolution **out);

/**
 * # Safety
 * `s` must be a live handle.
 */
enum MmgStatus mmg_solution_write(const struct MmgSolution *s, const char *path);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void mmg_solution_free(struct MmgSolution *s);

/**
 * # Safety
 * `s` must be a live handle or null.
 */
bool mmg_solution_converged(const struct MmgSolution *s);

/**
 * # Safety
 * `s` must be a live handle or null.
 */
size_t mmg_solution_iterations(const struct MmgSolution *s);

/**
 * Final `‖F‖_1`, NaN for a null handle or a loaded file.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
double mmg_solution_final_residual(const struct MmgSolution *s);

/**
 * Number of coefficients, `N * n`.
 *
 * # Safety
 * `s` must be a live handle or null.
 */
size_t mmg_solution_coefficient_count(const struct MmgSolution *s);

/**
 * Copy coefficients into `out`, block by block in graded-lex order.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum MmgStatus mmg_solution_coefficients(const struct MmgSolution *s, double *out, size_t len);

/**
 * Weighted residual norm over `[lo, hi]` with `q` points per dimension.
 *
 * # Safety
 * `lo` and `hi` must each hold `dim` values; `out` must be writable.
 */
enum MmgStatus mmg_solution_residual_norm(const struct MmgSolution *s,
                                          const double *lo,
                                          const double *hi,
                                          size_t dim,
                                          size_t q,
                                          double *out);

/**
 * Build a reduced-order model with a designed output-injection gain whose
 * closed-loop spectrum lies left of `-margin`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MmgStatus mmg_rom_build(const struct MmgSolution *s, double margin, struct MmgRom **out);

/**
 * # Safety
 * `r` must come from this library or be null.
 */
void mmg_rom_free(struct MmgRom *r);

/**
 * ROM state dimension, or 0 for a null handle.
 *
 * # Safety
 * `r` must be a live handle or null.
 */
size_t mmg_rom_dim(const struct MmgRom *r);

/**
 * Largest real part of the ROM Jacobian at the origin.
 *
 * # Safety
 * `r` must be a live handle or null.
 */
double mmg_rom_max_real_part(const struct MmgRom *r);

/**
 * Evaluate `dr/dt` at state `r` (length `d`) and input `u` (length `m`).
 *
 * # Safety
 * `state` must hold `d` values, `u` `m` values and `out` `d` values.
 */
enum MmgStatus mmg_rom_dynamics(const struct MmgRom *r,
                                const double *state,
                                const double *u,
                                double *out);

/**
 * Evaluate the ROM output at state `r`.
 *
 * # Safety
 * `state` must hold `d` values; `out` must hold `len` values.
 */
enum MmgStatus mmg_rom_output(const struct MmgRom *r, const double *state, double *out, size_t len);

/**
 * Simulate the full model from `x = 0` and the ROM from `r0`, both driven by
 * the generator from `w0`, over `[0, t_end]`, and report the steady-state
 * relative RMS output error.
 *
 * # Safety
 * `w0` and `r0` must each hold `d` values; `out` must be writable.
 */
enum MmgStatus mmg_rom_relative_rms(const struct MmgRom *r,
                                    const double *w0,
                                    const double *r0,
                                    double t_end,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MM_GALERKIN_H */
