#ifndef SPINOR_GRADIOMETRY_H
#define SPINOR_GRADIOMETRY_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_INPUT = 2,
  SG_STATUS_SINGULAR_POINT = 3,
  SG_STATUS_ZERO_FIELD = 4,
  SG_STATUS_DEGENERATE_CONIC = 5,
  SG_STATUS_NOT_AN_ELLIPSE = 6,
  SG_STATUS_MISSING_COMPONENT = 7,
  SG_STATUS_DEGENERATE_EIGENVALUES = 8,
  SG_STATUS_ZERO_DENOMINATOR = 9,
  SG_STATUS_OTHER = 10,
  SG_STATUS_PANIC = 11,
} SgStatus;

/**
 * Opaque collection of field sources.
 */
typedef struct SgScene SgScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sg_last_error_message(char *buf, size_t len);

/**
 * Creates an empty scene. Free it with [`sg_scene_free`].
 */
struct SgScene *sg_scene_new(void);

/**
 * # Safety
 * `scene` must be null or come from [`sg_scene_new`] and not be freed twice.
 */
void sg_scene_free(struct SgScene *scene);

/**
 * Number of sources in the scene, or 0 for a null handle.
 *
 * # Safety
 * `scene` must be null or a live handle.
 */
size_t sg_scene_len(const struct SgScene *scene);

/**
 * # Safety
 * `scene` must be a live handle and `field` point to 3 doubles.
 */
enum SgStatus sg_scene_add_uniform(struct SgScene *scene, const double *field);

/**
 * Point dipole with moment in A·m².
 *
 * # Safety
 * `scene` must be a live handle; `moment` and `position` point to 3 doubles.
 */
enum SgStatus sg_scene_add_dipole(struct SgScene *scene,
                                  const double *moment,
                                  const double *position);

/**
 * B(r) = field + gradient · (r − origin). The gradient must be traceless and symmetric.
 *
 * # Safety
 * `scene` must be a live handle; `field` and `origin` point to 3 doubles, `gradient` to 9.
 */
enum SgStatus sg_scene_add_linear_gradient(struct SgScene *scene,
                                           const double *field,
                                           const double *gradient,
                                           const double *origin);

/**
 * Polygonal circular loop; current in A, counter-clockwise about `normal`.
 *
 * # Safety
 * `scene` must be a live handle; `center` and `normal` point to 3 doubles.
 */
enum SgStatus sg_scene_add_coil_loop(struct SgScene *scene,
                                     const double *center,
                                     const double *normal,
                                     double radius,
                                     double current,
                                     size_t segments);

/**
 * Coaxial loop pair at ±separation/2 along `axis`; `opposed` reverses the second current.
 *
 * # Safety
 * `scene` must be a live handle; `center` and `axis` point to 3 doubles.
 */
enum SgStatus sg_scene_add_coil_pair(struct SgScene *scene,
                                     const double *center,
                                     const double *axis,
                                     double radius,
                                     double separation,
                                     double current,
                                     bool opposed,
                                     size_t segments);

/**
 * Field at `r`, tesla.
 *
 * # Safety
 * `scene` must be a live handle; `r` and `out` point to 3 doubles.
 */
enum SgStatus sg_scene_field(const struct SgScene *scene, const double *r, double *out);

/**
 * Gradient tensor at `r`, T/m.
 *
 * # Safety
 * `scene` must be a live handle; `r` points to 3 doubles and `out` to 9.
 */
enum SgStatus sg_scene_gradient(const struct SgScene *scene, const double *r, double *out);

/**
 * ∇|B| at `r`, T/m.
 *
 * # Safety
 * `scene` must be a live handle; `r` and `out` point to 3 doubles.
 */
enum SgStatus sg_scene_grad_magnitude(const struct SgScene *scene, const double *r, double *out);

/**
 * Direct ellipse fit of (x[k], y[k]). Writes the unit-norm conic
 * (a, b, c, d, e, f) of aX² + bXY + cY² + dX + eY + f = 0.
 *
 * # Safety
 * `x` and `y` point to `n` doubles; `out` to 6.
 */
enum SgStatus sg_fit_conic(const double *x,
                           const double *y,
                           size_t n,
                           double noise_floor,
                           double *out);

/**
 * |Δφ| in [0, π] from an ellipse fit, with a bootstrap σ when `n_resamples` > 1.
 *
 * # Safety
 * `x` and `y` point to `n` doubles; `abs_dphi` and `sigma` to one double each.
 */
enum SgStatus sg_fit_phase(const double *x,
                           const double *y,
                           size_t n,
                           double noise_floor,
                           size_t n_resamples,
                           uint64_t seed,
                           double *abs_dphi,
                           double *sigma);

/**
 * Completes the tensor from six in-plane derivatives ordered
 * ∂Bx/∂x, ∂Bx/∂z, ∂By/∂x, ∂By/∂z, ∂Bz/∂x, ∂Bz/∂z. A NaN marks a missing
 * entry. `sigmas` may be null. Writes the tensor as measured (xz and zx kept
 * apart) and its symmetrised form.
 *
 * # Safety
 * `in_plane` points to 6 doubles, `sigmas` is null or points to 6, the outputs to 9 each.
 */
enum SgStatus sg_complete_tensor(const double *in_plane,
                                 const double *sigmas,
                                 double *raw,
                                 double *symmetric);

/**
 * Unit eigenvector of the largest-|λ| eigenvalue of a symmetric tensor.
 *
 * # Safety
 * `tensor` points to 9 doubles, `direction` to 3; `relative_gap` may be null.
 */
enum SgStatus sg_dipole_bearing(const double *tensor, double *direction, double *relative_gap);

/**
 * Projection-noise-limited δB·√T_int in T/√Hz.
 *
 * # Safety
 * `out` points to one double.
 */
enum SgStatus sg_sql_sensitivity(double n_atoms,
                                 double t,
                                 double t_shot,
                                 double kappa,
                                 double *out);

/**
 * Energy resolution in units of ħ for a sensitivity in T/√Hz and a volume in m³.
 *
 * # Safety
 * `out` points to one double.
 */
enum SgStatus sg_energy_resolution(double db_rt_hz, double t, double volume, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINOR_GRADIOMETRY_H */
