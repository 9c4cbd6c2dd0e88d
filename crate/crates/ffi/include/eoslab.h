#ifndef EOSLAB_H
#define EOSLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EoslabStatus {
  EOSLAB_STATUS_OK = 0,
  EOSLAB_STATUS_NULL_POINTER = 1,
  EOSLAB_STATUS_INVALID_ARGUMENT = 2,
  EOSLAB_STATUS_DOMAIN = 3,
  EOSLAB_STATUS_NON_FINITE = 4,
  EOSLAB_STATUS_RUNTIME = 5,
  EOSLAB_STATUS_PANIC = 6,
} EoslabStatus;

/**
 * A tanh MLP bound to one labelled dataset, with MSE loss on one-hot
 * targets.
 */
typedef struct EoslabMlp EoslabMlp;

/**
 * Quadratic loss `m^T Q m / 2`.
 */
typedef struct EoslabQuadratic EoslabQuadratic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next eoslab call on this thread.
 */
const char *eoslab_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eoslab_version(void);

/**
 * `VF(z)` for `z > 0`, `rho > 0`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum EoslabStatus eoslab_variational_factor(double z, double rho, double *out);

/**
 * `(2/rho) VF(z)`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum EoslabStatus eoslab_stability_threshold(double z, double rho, double *out);

/**
 * Monte-Carlo probability that one VGD step on `lambda m^2 / 2` decreases
 * the loss, with `trials` draws from `seed`.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum EoslabStatus eoslab_descent_probability(double lambda,
                                             double m,
                                             double rho,
                                             double sigma2,
                                             uintptr_t n_samples,
                                             uintptr_t trials,
                                             uint64_t seed,
                                             double *out);

/**
 * Diagonal quadratic with the given eigenvalues.
 *
 * # Safety
 * `eigenvalues` must point to `dim` doubles; `out` must be valid for one
 * write.
 */
enum EoslabStatus eoslab_quadratic_new_diagonal(const double *eigenvalues,
                                                uintptr_t dim,
                                                struct EoslabQuadratic **out);

/**
 * Quadratic with the given eigenvalues in a random orthonormal basis drawn
 * from `seed`.
 *
 * # Safety
 * As [`eoslab_quadratic_new_diagonal`].
 */
enum EoslabStatus eoslab_quadratic_new_rotated(const double *eigenvalues,
                                               uintptr_t dim,
                                               uint64_t seed,
                                               struct EoslabQuadratic **out);

/**
 * # Safety
 * `handle` must come from a `eoslab_quadratic_new_*` call and not be freed
 * twice. Null is ignored.
 */
void eoslab_quadratic_free(struct EoslabQuadratic *handle);

/**
 * # Safety
 * `handle` must be live; `out` valid for one write.
 */
enum EoslabStatus eoslab_quadratic_dim(const struct EoslabQuadratic *handle, uintptr_t *out);

/**
 * Loss and gradient at `m`.
 *
 * # Safety
 * `m` and `grad` must point to `dim` doubles (`grad` may be null to skip
 * it); `loss` valid for one write.
 */
enum EoslabStatus eoslab_quadratic_loss_grad(const struct EoslabQuadratic *handle,
                                             const double *m,
                                             uintptr_t dim,
                                             double *loss,
                                             double *grad);

/**
 * Exact expected one-step loss change of VGD with isotropic Gaussian
 * perturbations of variance `sigma2` and `n_samples` samples.
 *
 * # Safety
 * `m` must point to `dim` doubles; `out` valid for one write.
 */
enum EoslabStatus eoslab_quadratic_expected_change(const struct EoslabQuadratic *handle,
                                                   const double *m,
                                                   uintptr_t dim,
                                                   double rho,
                                                   double sigma2,
                                                   uintptr_t n_samples,
                                                   double *out);

/**
 * Builds a model with layer widths `layer_dims` (input first, classes
 * last) and initial parameters drawn from `seed`, over `rows` examples.
 *
 * # Safety
 * `layer_dims` must point to `n_layers` values, `inputs` to
 * `rows * layer_dims[0]` doubles in row-major order, `labels` to `rows`
 * values; `out` valid for one write.
 */
enum EoslabStatus eoslab_mlp_new(const uintptr_t *layer_dims,
                                 uintptr_t n_layers,
                                 const double *inputs,
                                 const uint32_t *labels,
                                 uintptr_t rows,
                                 uint64_t seed,
                                 struct EoslabMlp **out);

/**
 * # Safety
 * `handle` must come from [`eoslab_mlp_new`] and not be freed twice. Null
 * is ignored.
 */
void eoslab_mlp_free(struct EoslabMlp *handle);

/**
 * # Safety
 * `handle` must be live; `out` valid for one write.
 */
enum EoslabStatus eoslab_mlp_num_params(const struct EoslabMlp *handle, uintptr_t *out);

/**
 * Copies the initial parameters into `params`.
 *
 * # Safety
 * `params` must point to `len` doubles.
 */
enum EoslabStatus eoslab_mlp_initial_params(const struct EoslabMlp *handle,
                                            double *params,
                                            uintptr_t len);

/**
 * Loss and (optionally) gradient at `params`.
 *
 * # Safety
 * `params` and `grad` must point to `len` doubles (`grad` may be null);
 * `loss` valid for one write.
 */
enum EoslabStatus eoslab_mlp_loss_grad(const struct EoslabMlp *handle,
                                       const double *params,
                                       uintptr_t len,
                                       double *loss,
                                       double *grad);

/**
 * Hessian-vector product `H(params) v`.
 *
 * # Safety
 * `params`, `v` and `out` must point to `len` doubles.
 */
enum EoslabStatus eoslab_mlp_hvp(const struct EoslabMlp *handle,
                                 const double *params,
                                 const double *v,
                                 uintptr_t len,
                                 double *out);

/**
 * Top Hessian eigenvalue at `params` by Lanczos with start vector from
 * `seed`. Returns `NonFinite` if the Hessian produced NaN, `Runtime` if
 * Lanczos did not converge within `max_iters` (the estimate is still
 * written).
 *
 * # Safety
 * `params` must point to `len` doubles; `out` valid for one write.
 */
enum EoslabStatus eoslab_mlp_sharpness(const struct EoslabMlp *handle,
                                       const double *params,
                                       uintptr_t len,
                                       uintptr_t max_iters,
                                       double tol,
                                       uint64_t seed,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EOSLAB_H */
