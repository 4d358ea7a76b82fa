/* C interface to the homoglab stochastic-homogenization library. */

#ifndef HOMOGLAB_H
#define HOMOGLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum HlStatus {
  HL_STATUS_OK = 0,
  // A spec or argument failed validation.
  HL_STATUS_INVALID_ARGUMENT = 1,
  // An iterative solve failed or a coefficient left its bounds.
  HL_STATUS_NUMERICAL_FAILURE = 2,
  // A required pointer was null.
  HL_STATUS_NULL_POINTER = 3,
  // An unexpected internal error (a bug; please report).
  HL_STATUS_INTERNAL_ERROR = 4,
} HlStatus;

// Opaque coefficient-field realization.
typedef struct HlField HlField;

// Opaque 1D solution (grid, u, flux).
typedef struct HlSolution1D HlSolution1D;

// Source-term callback: `f(x, user_data)`.
typedef double (*HlSource1D)(double x, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code.
const char *hl_status_message(enum HlStatus status);

// Constant coefficient field `a ≡ value`.
//
// # Safety
// `out_field` must be a valid pointer.
enum HlStatus hl_field_constant(double value, struct HlField **out_field);

// The periodic 1D profile `a(x) = 2 + sin(2πx)`.
//
// # Safety
// `out_field` must be a valid pointer.
enum HlStatus hl_field_periodic_1d(struct HlField **out_field);

// Seeded 1D random checkerboard with unit tiles. `probs` must sum
// to 1; `offset_enabled` draws the stationarizing global offset.
//
// # Safety
// `kappas` and `probs` must point to `n_phases` doubles; `out_field`
// must be a valid pointer.
enum HlStatus hl_field_checkerboard_1d(const double *kappas,
                                       const double *probs,
                                       size_t n_phases,
                                       bool offset_enabled,
                                       uint64_t seed,
                                       struct HlField **out_field);

// Seeded 2D random checkerboard with scalar-isotropic unit tiles.
//
// # Safety
// As for [`hl_field_checkerboard_1d`].
enum HlStatus hl_field_checkerboard_2d(const double *kappas,
                                       const double *probs,
                                       size_t n_phases,
                                       bool offset_enabled,
                                       uint64_t seed,
                                       struct HlField **out_field);

// Releases a field handle. Passing NULL is a no-op.
//
// # Safety
// `field` must have been produced by a `hl_field_*` constructor and
// not freed before.
void hl_field_free(struct HlField *field);

// Evaluates the ε-scaled field `a(x/ε)` at a 1D point.
//
// # Safety
// `field` and `out_value` must be valid pointers.
enum HlStatus hl_field_eval_1d(const struct HlField *field,
                               double eps,
                               double x,
                               double *out_value);

// Evaluates the ε-scaled field `A(x/ε)` at a 2D point (1D fields are
// constant along the second axis).
//
// # Safety
// `field` and `out_value` must be valid pointers.
enum HlStatus hl_field_eval_2d(const struct HlField *field,
                               double eps,
                               double x1,
                               double x2,
                               double *out_value);

// Closed-form 1D homogenized coefficient `(Σ pᵢ/κᵢ)⁻¹`.
//
// # Safety
// `kappas`/`probs` must point to `n_phases` doubles; `out_value` must
// be valid.
enum HlStatus hl_harmonic_mean_tiles(const double *kappas,
                                     const double *probs,
                                     size_t n_phases,
                                     double *out_value);

// Solves `−(a(x/ε) u′)′ = f` on `(s, t)` with homogeneous Dirichlet
// data. A NULL `source` selects the built-in bench source
// `f(x) = −3(2x − 1)`.
//
// # Safety
// `field` and `out_solution` must be valid; a non-NULL `source` must
// remain callable for the duration of the call.
enum HlStatus hl_solve_1d(const struct HlField *field,
                          double eps,
                          double s,
                          double t,
                          size_t n_cells,
                          HlSource1D source,
                          void *user_data,
                          struct HlSolution1D **out_solution);

// Number of sample points in a 1D solution.
//
// # Safety
// `solution` must be a live handle (NULL returns 0).
size_t hl_solution_1d_len(const struct HlSolution1D *solution);

// Copies the sample points, solution values, and flux values into
// caller buffers of length `hl_solution_1d_len`. Any destination may
// be NULL to skip that column.
//
// # Safety
// Non-NULL buffers must hold at least `hl_solution_1d_len` doubles.
enum HlStatus hl_solution_1d_copy(const struct HlSolution1D *solution,
                                  double *out_x,
                                  double *out_u,
                                  double *out_sigma);

// Releases a 1D solution handle. Passing NULL is a no-op.
//
// # Safety
// `solution` must come from [`hl_solve_1d`] and not be freed twice.
void hl_solution_1d_free(struct HlSolution1D *solution);

// Ensemble periodization estimate of the 2D effective tensor for a
// checkerboard law. Writes the entry means and standard errors
// row-major into 4-double buffers.
//
// # Safety
// `kappas`/`probs` must point to `n_phases` doubles; `out_mean` and
// `out_stderr` must each hold 4 doubles (`out_stderr` may be NULL).
enum HlStatus hl_effective_tensor_2d(const double *kappas,
                                     const double *probs,
                                     size_t n_phases,
                                     bool offset_enabled,
                                     uint32_t torus_side,
                                     uint32_t ensemble,
                                     uint64_t seed,
                                     uint32_t elements_per_tile,
                                     double tol,
                                     double *out_mean,
                                     double *out_stderr);

// Writes the cat-map orbit `T(x), …, T^n(x)` as interleaved pairs
// into a `2n`-double buffer.
//
// # Safety
// `out_xy` must hold `2 * n` doubles.
enum HlStatus hl_cat_map_orbit(double x1, double x2, size_t n, double *out_xy);

// One cat-map step, written through out-pointers.
//
// # Safety
// `out_x1` and `out_x2` must be valid pointers.
enum HlStatus hl_cat_map_step(double x1, double x2, double *out_x1, double *out_x2);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOMOGLAB_H */
