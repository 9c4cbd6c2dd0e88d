use crate::{Error, Result};

/// Smallest z fed to the Variational Factor. Exact orthogonality between the
/// iterate and a mode gives z = 0, where the factor is undefined.
pub const Z_FLOOR: f64 = 1e-12;

/// Below this value of `y = (3/rho) sqrt(3/z)` the factor is evaluated from
/// its Taylor series in `y`.
const SERIES_CUTOFF: f64 = 1e-4;

/// Variational Factor `VF(z) = rho sqrt(z/3) sinh(asinh((3/rho) sqrt(3/z)) / 3)`.
///
/// Lies in `(0, 1)` for finite positive `z`, increases strictly with `z` and
/// tends to one as `z -> inf`. `(2/rho) VF(z)` is the positive root of
/// `-rho + (rho^2/2) lambda + (rho^2/(2z)) lambda^3`.
pub fn variational_factor(z: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive and finite, got {rho}")));
    }
    if z.is_nan() || z <= 0.0 {
        return Err(Error::Domain(format!("variational factor needs z > 0, got {z}")));
    }
    if z.is_infinite() {
        return Ok(1.0);
    }
    // rho sqrt(z/3) == 3 / y, so VF depends on rho^2 z only.
    let y = (3.0 / rho) * (3.0 / z).sqrt();
    if y < SERIES_CUTOFF {
        let y2 = y * y;
        return Ok(1.0 - y2 * (4.0 / 27.0) + y2 * y2 * (16.0 / 243.0));
    }
    Ok((3.0 / y) * (y.asinh() / 3.0).sinh())
}

/// Same as [`variational_factor`] but with `z` clamped to [`Z_FLOOR`].
/// The flag reports whether clamping happened.
pub fn variational_factor_clamped(z: f64, rho: f64) -> Result<(f64, bool)> {
    if z.is_nan() {
        return Err(Error::Domain("variational factor argument is NaN".into()));
    }
    if z < Z_FLOOR {
        Ok((variational_factor(Z_FLOOR, rho)?, true))
    } else {
        Ok((variational_factor(z, rho)?, false))
    }
}

/// Per-mode stability threshold `(2/rho) VF(z)`.
pub fn stability_threshold(z: f64, rho: f64) -> Result<f64> {
    Ok(2.0 / rho * variational_factor_clamped(z, rho)?.0)
}

/// Normalised per-mode cubic `-rho + (rho^2/2) lambda + (rho^2/(2z)) lambda^3`
/// evaluated at `lambda`.
pub fn cubic_residual(lambda: f64, z: f64, rho: f64) -> f64 {
    let r2 = rho * rho;
    -rho + 0.5 * r2 * lambda + 0.5 * r2 / z * lambda * lambda * lambda
}
