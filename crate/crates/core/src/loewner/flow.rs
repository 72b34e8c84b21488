//! Forward Loewner flow `dg/dt = 2 / (g - d(t))` of a single point.
//!
//! The state is `p = (g - d)^2`, which stays regular through the swallow
//! time: `dp/dt = 4 - 2 (g - d) d'`. Constant cells are solved in closed
//! form; square-root cells use `t = t_k + u^2` to remove the singular slope.

use num_complex::Complex;

use crate::driver::{Driver, Interpolation};
use crate::error::{Error, Result};
use crate::ode::{integrate, Outcome, Tolerances};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// A crossing counts as a swallow when `|g - d| <= event_tol` there.
    pub event_tol: T,
}

impl<T: Real> Default for FlowOptions<T> {
    fn default() -> Self {
        let tol = Tolerances::<T>::default();
        FlowOptions {
            rtol: tol.rtol,
            atol: tol.atol,
            event_tol: T::epsilon().powf(T::lit(0.25)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<T> {
    /// `(t, g_t(z))` at driver knots before the swallow time, plus the final time.
    pub trajectory: Vec<(T, Complex<T>)>,
    /// First time `g - d` reaches 0, or `t_max` when it never does.
    pub swallow_time: T,
    pub swallowed: bool,
    /// Set when the step size underflowed before the event was resolved.
    pub bracket: Option<(T, T)>,
}

/// Recovers `g - d` from `p`: upper branch for interior points, `sign * sqrt(p)` on the real line.
#[inline]
fn branch<T: Real>(p: Complex<T>, real_sign: Option<T>) -> Complex<T> {
    match real_sign {
        Some(s) => Complex::new(s * p.re.max(T::zero()).sqrt(), T::zero()),
        None => {
            let r = (-p).sqrt();
            Complex::new(-r.im, r.re)
        }
    }
}

enum CellEnd<T> {
    Reached(Complex<T>),
    Swallowed { at: T, bracket: Option<(T, T)> },
}

pub fn forward_flow<T: Real>(
    d: &Driver<T>,
    z: Complex<T>,
    t_max: T,
    opts: &FlowOptions<T>,
) -> Result<FlowResult<T>> {
    if z.im < T::zero() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::invalid("start point must lie in the closed upper half-plane"));
    }
    if z.re == T::zero() && z.im == T::zero() {
        return Err(Error::invalid("start point coincides with the driver at time 0"));
    }
    if t_max > d.t_end() + d.grid().knot_tol() || t_max < T::zero() {
        return Err(Error::OutOfRange(format!("t_max {t_max} outside [0, {}]", d.t_end())));
    }
    let times = d.grid().times();
    let tol = Tolerances {
        rtol: opts.rtol,
        atol: opts.atol,
        ..Tolerances::default()
    };
    let p_tol = opts.event_tol * opts.event_tol;
    let real = z.im == T::zero();
    let mut g = z;
    let mut trajectory = vec![(T::zero(), z)];
    for k in 0..d.grid().cells() {
        let a = times[k];
        if a >= t_max {
            break;
        }
        let b = times[k + 1].min(t_max);
        let len = b - a;
        let (v0, v1) = (d.values()[k], d.values()[k + 1]);
        let start = match d.interpolation() {
            Interpolation::PiecewiseConstant => v1,
            _ => v0,
        };
        let diff = g - start;
        if diff.norm() <= opts.event_tol {
            return Ok(done(trajectory, a, None));
        }
        let sign = real.then(|| diff.re.signum());
        let p0 = diff * diff;
        let crossed = |x: &Complex<T>, y: &Complex<T>| {
            (x.re > T::zero()) != (y.re > T::zero()) || y.re == T::zero()
        };
        let accept = |y: &Complex<T>| y.norm() <= p_tol;
        let end = match d.interpolation() {
            Interpolation::PiecewiseConstant => {
                let tau = -p0.re / T::lit(4.0);
                if p0.im.abs() <= p_tol && tau >= T::zero() && tau <= len + d.grid().knot_tol() {
                    CellEnd::Swallowed {
                        at: (a + tau).min(b),
                        bracket: None,
                    }
                } else {
                    CellEnd::Reached(p0 + Complex::from(T::lit(4.0) * len))
                }
            }
            Interpolation::PiecewiseLinear => {
                let slope = (v1 - v0) / (times[k + 1] - a);
                let rhs = |_: T, p: Complex<T>| -> Complex<T> {
                    Complex::from(T::lit(4.0)) - branch(p, sign) * (T::lit(2.0) * slope)
                };
                match integrate(rhs, a, b, p0, &tol, crossed, accept) {
                    Outcome::Reached(p) => CellEnd::Reached(p),
                    Outcome::Event { at, .. } => CellEnd::Swallowed { at, bracket: None },
                    Outcome::Underflow { lo, hi, .. } => CellEnd::Swallowed {
                        at: lo,
                        bracket: Some((lo, hi)),
                    },
                }
            }
            Interpolation::PiecewiseSqrt => {
                let coef = (v1 - v0) / (times[k + 1] - a).sqrt();
                let rhs = |u: T, p: Complex<T>| -> Complex<T> {
                    Complex::from(T::lit(8.0) * u) - branch(p, sign) * (T::lit(2.0) * coef)
                };
                let to_time = |u: T| a + u * u;
                match integrate(rhs, T::zero(), len.sqrt(), p0, &tol, crossed, accept) {
                    Outcome::Reached(p) => CellEnd::Reached(p),
                    Outcome::Event { at, .. } => CellEnd::Swallowed {
                        at: to_time(at),
                        bracket: None,
                    },
                    Outcome::Underflow { lo, hi, .. } => CellEnd::Swallowed {
                        at: to_time(lo),
                        bracket: Some((to_time(lo), to_time(hi))),
                    },
                }
            }
        };
        match end {
            CellEnd::Swallowed { at, bracket } => return Ok(done(trajectory, at, bracket)),
            CellEnd::Reached(p) => {
                let dd = branch(p, sign);
                let mut next = dd + d.eval_in_cell(k, b);
                if real {
                    next.im = T::zero();
                }
                g = next;
                trajectory.push((b, g));
            }
        }
    }
    Ok(FlowResult {
        trajectory,
        swallow_time: t_max,
        swallowed: false,
        bracket: None,
    })
}

fn done<T: Real>(
    trajectory: Vec<(T, Complex<T>)>,
    at: T,
    bracket: Option<(T, T)>,
) -> FlowResult<T> {
    FlowResult {
        trajectory,
        swallow_time: at,
        swallowed: true,
        bracket,
    }
}
