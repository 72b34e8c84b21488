use crate::error::{Error, Result};
use crate::scalar::Real;

/// Constant `c` such that `|x| <= c sqrt(t)` is swallowed by time `t` for every
/// forcing within `c sqrt(t)` of a forcing with half-Hölder constant at most 3.
///
/// Calibrated as half the smallest `min(|left|, right) / sqrt(t)` of the swallowed
/// interval over a family of such forcings; `calibration_reproduces_constant`
/// in the integration tests recomputes it.
pub const INTERVAL_CONSTANT: f64 = 0.0643;

fn check<T: Real>(y: T, gap: T, dt: T) -> Result<()> {
    if !(y > T::zero()) {
        return Err(Error::invalid(format!("height must be positive, got {y}")));
    }
    if gap < T::zero() || dt < T::zero() {
        return Err(Error::invalid("gap and time must be nonnegative"));
    }
    Ok(())
}

/// `gap * (sqrt(4 dt + y^2) / y - 1)`: bound on `|f1_t(z) - f2_t(z)|` at `Im z = y`
/// for drivers within `gap` of each other on `[0, dt]`.
pub fn map_compare_bound<T: Real>(dt: T, y: T, gap: T) -> Result<T> {
    check(y, gap, dt)?;
    Ok(gap * ((T::lit(4.0) * dt + y * y).sqrt() / y - T::one()))
}

/// Exponential variant `gap * (exp(c0 dt / y^2) - 1)` for a caller-supplied `c0`.
pub fn map_compare_bound_exp<T: Real>(dt: T, y: T, gap: T, c0: T) -> Result<T> {
    check(y, gap, dt)?;
    if !(c0 > T::zero()) {
        return Err(Error::invalid("c0 must be positive"));
    }
    Ok(gap * (c0 * dt / (y * y)).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(map_compare_bound(0.7, 0.2, 0.0).unwrap(), 0.0);
        assert_eq!(map_compare_bound(0.0, 0.2, 0.3).unwrap(), 0.0);
        let v = map_compare_bound(1.0, 1.0, 0.1).unwrap();
        assert!((v - 0.1 * (5.0f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((v - 0.12361).abs() < 1e-5);
        assert!(map_compare_bound(1.0, 0.0, 0.1).is_err());
        assert!(map_compare_bound_exp(1.0, 1.0, 0.1, 0.0).is_err());
        let e = map_compare_bound_exp(0.5, 1.0, 0.2, 2.0).unwrap();
        assert!((e - 0.2 * (1.0f64.exp() - 1.0)).abs() < 1e-15);
    }
}
