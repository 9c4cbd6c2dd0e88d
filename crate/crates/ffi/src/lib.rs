//! C ABI over the `eoslab` core.
//!
//! Every function returns an [`EoslabStatus`]; results go through out
//! pointers. On failure the message is available from
//! [`eoslab_last_error_message`] on the same thread until the next call.
//! Handles are opaque: create with `*_new`, release with `*_free`. Panics are
//! caught and reported as [`EoslabStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use eoslab::diagnostics::hessian_top_eigen;
use eoslab::models::{Activation, Dataset, MlpModel, MlpObjective};
use eoslab::numerics::RandomStream;
use eoslab::stability::{
    descent_probability_mc, expected_loss_change, stability_threshold, variational_factor, PosteriorSpec,
    QuadraticProblem,
};
use eoslab::{Error, Objective};
use ndarray::Array2;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EoslabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NonFinite = 4,
    Runtime = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(EoslabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidSpec(_) | Error::Contract(_) | Error::Precondition(_) | Error::Config(_) => {
                EoslabStatus::InvalidArgument
            }
            Error::Domain(_) => EoslabStatus::Domain,
            Error::NonFinite { .. } => EoslabStatus::NonFinite,
            _ => EoslabStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EoslabStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EoslabStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EoslabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EoslabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside eoslab");
            EoslabStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next eoslab call on this thread.
#[no_mangle]
pub extern "C" fn eoslab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eoslab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `VF(z)` for `z > 0`, `rho > 0`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_variational_factor(z: f64, rho: f64, out: *mut f64) -> EoslabStatus {
    guard(|| write(out, variational_factor(z, rho)?, "out"))
}

/// `(2/rho) VF(z)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_stability_threshold(z: f64, rho: f64, out: *mut f64) -> EoslabStatus {
    guard(|| write(out, stability_threshold(z, rho)?, "out"))
}

/// Monte-Carlo probability that one VGD step on `lambda m^2 / 2` decreases
/// the loss, with `trials` draws from `seed`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_descent_probability(
    lambda: f64,
    m: f64,
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    trials: usize,
    seed: u64,
    out: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let p = descent_probability_mc(lambda, m, rho, sigma2, n_samples, trials, &RandomStream::new(seed))?;
        write(out, p.probability, "out")
    })
}

/// Quadratic loss `m^T Q m / 2`.
pub struct EoslabQuadratic {
    inner: QuadraticProblem,
}

/// Diagonal quadratic with the given eigenvalues.
///
/// # Safety
/// `eigenvalues` must point to `dim` doubles; `out` must be valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_new_diagonal(
    eigenvalues: *const f64,
    dim: usize,
    out: *mut *mut EoslabQuadratic,
) -> EoslabStatus {
    guard(|| {
        let ev = input(eigenvalues, dim, "eigenvalues")?;
        let q = QuadraticProblem::diagonal(ev)?;
        write(out, Box::into_raw(Box::new(EoslabQuadratic { inner: q })), "out")
    })
}

/// Quadratic with the given eigenvalues in a random orthonormal basis drawn
/// from `seed`.
///
/// # Safety
/// As [`eoslab_quadratic_new_diagonal`].
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_new_rotated(
    eigenvalues: *const f64,
    dim: usize,
    seed: u64,
    out: *mut *mut EoslabQuadratic,
) -> EoslabStatus {
    guard(|| {
        let ev = input(eigenvalues, dim, "eigenvalues")?;
        let q = QuadraticProblem::random_rotation(ev, &mut RandomStream::new(seed).rng())?;
        write(out, Box::into_raw(Box::new(EoslabQuadratic { inner: q })), "out")
    })
}

/// # Safety
/// `handle` must come from a `eoslab_quadratic_new_*` call and not be freed
/// twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_free(handle: *mut EoslabQuadratic) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn quad<'a>(h: *const EoslabQuadratic) -> Result<&'a QuadraticProblem, Failure> {
    h.as_ref().map(|h| &h.inner).ok_or_else(|| null("handle"))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Failure> {
    if got != want {
        return Err(invalid(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// # Safety
/// `handle` must be live; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_dim(handle: *const EoslabQuadratic, out: *mut usize) -> EoslabStatus {
    guard(|| write(out, quad(handle)?.dim(), "out"))
}

/// Loss and gradient at `m`.
///
/// # Safety
/// `m` and `grad` must point to `dim` doubles (`grad` may be null to skip
/// it); `loss` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_loss_grad(
    handle: *const EoslabQuadratic,
    m: *const f64,
    dim: usize,
    loss: *mut f64,
    grad: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let q = quad(handle)?;
        check_len(dim, q.dim(), "m")?;
        let m = input(m, dim, "m")?;
        write(loss, q.loss(m), "loss")?;
        if !grad.is_null() {
            output(grad, dim, "grad")?.copy_from_slice(&q.gradient(m));
        }
        Ok(())
    })
}

/// Exact expected one-step loss change of VGD with isotropic Gaussian
/// perturbations of variance `sigma2` and `n_samples` samples.
///
/// # Safety
/// `m` must point to `dim` doubles; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_quadratic_expected_change(
    handle: *const EoslabQuadratic,
    m: *const f64,
    dim: usize,
    rho: f64,
    sigma2: f64,
    n_samples: usize,
    out: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let q = quad(handle)?;
        check_len(dim, q.dim(), "m")?;
        let m = input(m, dim, "m")?;
        let spec = PosteriorSpec::isotropic(dim, sigma2, n_samples)?;
        write(out, expected_loss_change(q, m, rho, &spec)?, "out")
    })
}

/// A tanh MLP bound to one labelled dataset, with MSE loss on one-hot
/// targets.
pub struct EoslabMlp {
    model: MlpModel,
    data: Dataset,
}

/// Builds a model with layer widths `layer_dims` (input first, classes
/// last) and initial parameters drawn from `seed`, over `rows` examples.
///
/// # Safety
/// `layer_dims` must point to `n_layers` values, `inputs` to
/// `rows * layer_dims[0]` doubles in row-major order, `labels` to `rows`
/// values; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_new(
    layer_dims: *const usize,
    n_layers: usize,
    inputs: *const f64,
    labels: *const u32,
    rows: usize,
    seed: u64,
    out: *mut *mut EoslabMlp,
) -> EoslabStatus {
    guard(|| {
        let dims = input(layer_dims, n_layers, "layer_dims")?;
        if dims.len() < 2 {
            return Err(invalid("layer_dims needs at least input and output widths"));
        }
        let cols = dims[0];
        let x = input(inputs, rows * cols, "inputs")?;
        let y = input(labels, rows, "labels")?;
        let inputs = Array2::from_shape_vec((rows, cols), x.to_vec()).map_err(|e| invalid(e.to_string()))?;
        let data = Dataset::new(inputs, y.iter().map(|&l| l as usize).collect(), dims[dims.len() - 1])?;
        let model = MlpModel::new(dims, Activation::Tanh, &RandomStream::new(seed))?;
        MlpObjective::new(&model, &data)?;
        write(out, Box::into_raw(Box::new(EoslabMlp { model, data })), "out")
    })
}

/// # Safety
/// `handle` must come from [`eoslab_mlp_new`] and not be freed twice. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_free(handle: *mut EoslabMlp) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn mlp<'a>(h: *const EoslabMlp) -> Result<&'a EoslabMlp, Failure> {
    h.as_ref().ok_or_else(|| null("handle"))
}

/// # Safety
/// `handle` must be live; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_num_params(handle: *const EoslabMlp, out: *mut usize) -> EoslabStatus {
    guard(|| write(out, mlp(handle)?.model.num_params(), "out"))
}

/// Copies the initial parameters into `params`.
///
/// # Safety
/// `params` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_initial_params(handle: *const EoslabMlp, params: *mut f64, len: usize) -> EoslabStatus {
    guard(|| {
        let h = mlp(handle)?;
        check_len(len, h.model.num_params(), "params")?;
        output(params, len, "params")?.copy_from_slice(&h.model.params);
        Ok(())
    })
}

/// Loss and (optionally) gradient at `params`.
///
/// # Safety
/// `params` and `grad` must point to `len` doubles (`grad` may be null);
/// `loss` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_loss_grad(
    handle: *const EoslabMlp,
    params: *const f64,
    len: usize,
    loss: *mut f64,
    grad: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let h = mlp(handle)?;
        check_len(len, h.model.num_params(), "params")?;
        let p = input(params, len, "params")?;
        let (l, g) = h.model.objective(&h.data).loss_and_gradient(p);
        write(loss, l, "loss")?;
        if !grad.is_null() {
            output(grad, len, "grad")?.copy_from_slice(&g);
        }
        Ok(())
    })
}

/// Hessian-vector product `H(params) v`.
///
/// # Safety
/// `params`, `v` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_hvp(
    handle: *const EoslabMlp,
    params: *const f64,
    v: *const f64,
    len: usize,
    out: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let h = mlp(handle)?;
        check_len(len, h.model.num_params(), "params")?;
        let p = input(params, len, "params")?;
        let v = input(v, len, "v")?;
        let hv = h.model.objective(&h.data).hvp(p, v);
        output(out, len, "out")?.copy_from_slice(&hv);
        Ok(())
    })
}

/// Top Hessian eigenvalue at `params` by Lanczos with start vector from
/// `seed`. Returns `NonFinite` if the Hessian produced NaN, `Runtime` if
/// Lanczos did not converge within `max_iters` (the estimate is still
/// written).
///
/// # Safety
/// `params` must point to `len` doubles; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn eoslab_mlp_sharpness(
    handle: *const EoslabMlp,
    params: *const f64,
    len: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
    out: *mut f64,
) -> EoslabStatus {
    guard(|| {
        let h = mlp(handle)?;
        check_len(len, h.model.num_params(), "params")?;
        let p = input(params, len, "params")?;
        let r = hessian_top_eigen(&h.model.objective(&h.data), p, 1, max_iters, tol, &RandomStream::new(seed))?;
        write(out, r.sharpness(), "out")?;
        if !r.converged {
            return Err(Failure(
                EoslabStatus::Runtime,
                format!("Lanczos did not converge in {max_iters} iterations"),
            ));
        }
        Ok(())
    })
}
