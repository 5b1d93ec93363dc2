#ifndef SPLINEKIT_H
#define SPLINEKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_MESH = 3,
  SK_STATUS_SPACE = 4,
  SK_STATUS_NUMERICAL = 5,
  SK_STATUS_OUTSIDE_DOMAIN = 6,
  SK_STATUS_IO = 7,
  SK_STATUS_PANIC = 8,
} SkStatus;

/*
 A validated triangulation.
 */
typedef struct SkMesh SkMesh;

/*
 A spline space `S^r_d` over a mesh.
 */
typedef struct SkSpace SkSpace;

/*
 A spline with its coefficients.
 */
typedef struct SkSpline SkSpline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null after a
 successful call. Valid until the next `sk_*` call on the same thread.
 */
const char *sk_last_error(void);

/*
 Library version as a static nul-terminated string.
 */
const char *sk_version(void);

/*
 Builds a mesh from `nv` vertices (`xy` holds `x0, y0, x1, y1, ...`) and
 `nt` triangles (`tris` holds three vertex indices each).

 # Safety
 `xy` must point to `2 * nv` doubles, `tris` to `3 * nt` indices and
 `out` to writable storage for one handle.
 */
enum SkStatus sk_mesh_new(const double *xy,
                          size_t nv,
                          const uint32_t *tris,
                          size_t nt,
                          struct SkMesh **out);

/*
 `k x k` squares on the unit square, each cut into two triangles.

 # Safety
 `out` must point to writable storage for one handle.
 */
enum SkStatus sk_mesh_square_grid(size_t k, struct SkMesh **out);

/*
 Reads a mesh file (vertex and triangle sections).

 # Safety
 `path` must be a nul-terminated string and `out` writable.
 */
enum SkStatus sk_mesh_load(const char *path, struct SkMesh **out);

/*
 # Safety
 `mesh` must be a live handle or null.
 */
size_t sk_mesh_num_vertices(const struct SkMesh *mesh);

/*
 # Safety
 `mesh` must be a live handle or null.
 */
size_t sk_mesh_num_triangles(const struct SkMesh *mesh);

/*
 # Safety
 `mesh` must come from this library and not be freed twice.
 */
void sk_mesh_free(struct SkMesh *mesh);

/*
 `S^r_d` over `mesh`; `r = -1` gives discontinuous splines. The mesh is
 copied, so it may be freed afterwards.

 # Safety
 `mesh` must be a live handle and `out` writable.
 */
enum SkStatus sk_space_new(const struct SkMesh *mesh, size_t d, int32_t r, struct SkSpace **out);

/*
 # Safety
 `space` must be a live handle or null.
 */
size_t sk_space_num_coeffs(const struct SkSpace *space);

/*
 Lower and upper dimension bounds from the mesh combinatorics.

 # Safety
 `space` must be a live handle; `lower` and `upper` writable.
 */
enum SkStatus sk_space_dimension_bounds(const struct SkSpace *space,
                                        int64_t *lower,
                                        int64_t *upper);

/*
 Exact dimension from the rank of the smoothness matrix.

 # Safety
 `space` must be a live handle and `dim` writable.
 */
enum SkStatus sk_space_dimension(const struct SkSpace *space, size_t *dim);

/*
 # Safety
 `space` must come from this library and not be freed twice.
 */
void sk_space_free(struct SkSpace *space);

/*
 Penalized least-squares fit of `n` scattered values with energy weight
 `lambda`.

 # Safety
 `xy` must point to `2 * n` doubles, `z` to `n`, and `out` be writable.
 */
enum SkStatus sk_fit_penalized(const struct SkSpace *space,
                               const double *xy,
                               const double *z,
                               size_t n,
                               double lambda,
                               struct SkSpline **out);

/*
 Minimal-energy interpolant of `n` values.

 # Safety
 As for [`sk_fit_penalized`].
 */
enum SkStatus sk_interpolate(const struct SkSpace *space,
                             const double *xy,
                             const double *z,
                             size_t n,
                             struct SkSpline **out);

/*
 Collocation solve of `-Δu = f` with the built-in solution `exact`
 (`linear`, `quadratic`, `sinpi`, `sin2pi`, `exp`, `cubic`) supplying
 `f` and the boundary values.

 # Safety
 `exact` must be a nul-terminated string and `out` writable.
 */
enum SkStatus sk_solve_poisson(const struct SkSpace *space,
                               const char *exact,
                               struct SkSpline **out);

/*
 Wraps a coefficient vector of length `sk_space_num_coeffs(space)`.

 # Safety
 `c` must point to `n` doubles and `out` be writable.
 */
enum SkStatus sk_spline_from_coeffs(const struct SkSpace *space,
                                    const double *c,
                                    size_t n,
                                    struct SkSpline **out);

/*
 # Safety
 `spline` must be a live handle or null.
 */
size_t sk_spline_num_coeffs(const struct SkSpline *spline);

/*
 Copies the coefficients into `buf`, which must hold at least
 `sk_spline_num_coeffs(spline)` values.

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum SkStatus sk_spline_coeffs(const struct SkSpline *spline, double *buf, size_t len);

/*
 Value at `(x, y)`; `SK_STATUS_OUTSIDE_DOMAIN` off the mesh.

 # Safety
 `spline` must be a live handle and `value` writable.
 */
enum SkStatus sk_spline_eval(const struct SkSpline *spline, double x, double y, double *value);

/*
 Values at `n` points; points off the mesh give NaN.

 # Safety
 `xy` must point to `2 * n` doubles and `values` to `n` writable ones.
 */
enum SkStatus sk_spline_eval_many(const struct SkSpline *spline,
                                  const double *xy,
                                  size_t n,
                                  double *values);

/*
 # Safety
 `spline` must come from this library and not be freed twice.
 */
void sk_spline_free(struct SkSpline *spline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLINEKIT_H */
