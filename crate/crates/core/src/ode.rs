//! Adaptive Dormand–Prince 5(4) integrator with step-local event location.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::Float;

use crate::scalar::Real;

pub(crate) trait State<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
    fn magnitude(self) -> T;
    fn is_finite(self) -> bool;
}

impl<T: Real> State<T> for T {
    fn magnitude(self) -> T {
        self.abs()
    }
    fn is_finite(self) -> bool {
        Float::is_finite(self)
    }
}

impl<T: Real> State<T> for Complex<T> {
    fn magnitude(self) -> T {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}


#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances<T> {
    pub rtol: T,
    pub atol: T,
    /// Smallest step as a fraction of the span before giving up.
    pub min_step_frac: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Tolerances {
            rtol: (eps * T::lit(1e4)).max(T::lit(1e-11)),
            atol: (eps * T::lit(1e2)).max(T::lit(1e-13)),
            min_step_frac: eps * T::lit(16.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Outcome<T, Y> {
    Reached(Y),
    Event { at: T },
    Underflow { lo: T, hi: T },
}

fn dp_step<T: Real, Y: State<T>, F: Fn(T, Y) -> Y>(f: &F, s: T, y: Y, h: T) -> (Y, T) {
    let l = T::lit;
    let k1 = f(s, y);
    let k2 = f(s + h * l(0.2), y + k1 * (h * l(0.2)));
    let k3 = f(
        s + h * l(0.3),
        y + k1 * (h * l(3.0 / 40.0)) + k2 * (h * l(9.0 / 40.0)),
    );
    let k4 = f(
        s + h * l(0.8),
        y + k1 * (h * l(44.0 / 45.0)) - k2 * (h * l(56.0 / 15.0)) + k3 * (h * l(32.0 / 9.0)),
    );
    let k5 = f(
        s + h * l(8.0 / 9.0),
        y + k1 * (h * l(19372.0 / 6561.0)) - k2 * (h * l(25360.0 / 2187.0))
            + k3 * (h * l(64448.0 / 6561.0))
            - k4 * (h * l(212.0 / 729.0)),
    );
    let k6 = f(
        s + h,
        y + k1 * (h * l(9017.0 / 3168.0)) - k2 * (h * l(355.0 / 33.0))
            + k3 * (h * l(46732.0 / 5247.0))
            + k4 * (h * l(49.0 / 176.0))
            - k5 * (h * l(5103.0 / 18656.0)),
    );
    let y5 = y
        + k1 * (h * l(35.0 / 384.0))
        + k3 * (h * l(500.0 / 1113.0))
        + k4 * (h * l(125.0 / 192.0))
        - k5 * (h * l(2187.0 / 6784.0))
        + k6 * (h * l(11.0 / 84.0));
    let k7 = f(s + h, y5);
    let err = k1 * (h * l(71.0 / 57600.0)) - k3 * (h * l(71.0 / 16695.0))
        + k4 * (h * l(71.0 / 1920.0))
        - k5 * (h * l(17253.0 / 339200.0))
        + k6 * (h * l(22.0 / 525.0))
        - k7 * (h * l(1.0 / 40.0));
    (y5, err.magnitude())
}

/// Integrates `y' = f(s, y)` from `s0` to `s1`.
///
/// `crossed(prev, next)` flags a step containing an event; the crossing is then
/// bisected on the step fraction and handed to `accept`, which may reject it
/// (the integration then carries on past the step).
pub(crate) fn integrate<T, Y, F, C, A>(
    f: F,
    s0: T,
    s1: T,
    y0: Y,
    tol: &Tolerances<T>,
    crossed: C,
    accept: A,
) -> Outcome<T, Y>
where
    T: Real,
    Y: State<T>,
    F: Fn(T, Y) -> Y,
    C: Fn(&Y, &Y) -> bool,
    A: Fn(&Y) -> bool,
{
    let span = s1 - s0;
    if span <= T::zero() {
        return Outcome::Reached(y0);
    }
    let h_min = span * tol.min_step_frac;
    let mut h = span / T::lit(8.0);
    let mut s = s0;
    let mut y = y0;
    while s < s1 {
        let last = h >= s1 - s;
        if last {
            h = s1 - s;
        }
        let (y_new, err) = dp_step(&f, s, y, h);
        let scale = tol.atol + tol.rtol * y.magnitude().max(y_new.magnitude());
        let ratio = if y_new.is_finite() && err.is_finite() {
            err / scale
        } else {
            T::infinity()
        };
        if ratio <= T::one() {
            if crossed(&y, &y_new) {
                let (at, state) = locate(&f, s, y, h, &crossed);
                if accept(&state) {
                    return Outcome::Event { at };
                }
            }
            if last {
                return Outcome::Reached(y_new);
            }
            s += h;
            y = y_new;
            let grow = if ratio > T::zero() {
                T::lit(0.9) * ratio.powf(T::lit(-0.2))
            } else {
                T::lit(5.0)
            };
            h = h * grow.min(T::lit(5.0)).max(T::lit(0.2));
        } else {
            let shrink = if ratio.is_finite() {
                (T::lit(0.9) * ratio.powf(T::lit(-0.2))).max(T::lit(0.1))
            } else {
                T::lit(0.25)
            };
            h = h * shrink.min(T::lit(0.9));
            if h < h_min {
                return Outcome::Underflow {
                    lo: s,
                    hi: s + h,
                };
            }
        }
    }
    Outcome::Reached(y)
}

fn locate<T, Y, F, C>(f: &F, s: T, y: Y, h: T, crossed: &C) -> (T, Y)
where
    T: Real,
    Y: State<T>,
    F: Fn(T, Y) -> Y,
    C: Fn(&Y, &Y) -> bool,
{
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut y_hi = dp_step(f, s, y, h).0;
    let floor = T::epsilon() * T::lit(4.0);
    for _ in 0..200 {
        if hi - lo <= floor {
            break;
        }
        let mid = (lo + hi) * T::lit(0.5);
        let y_mid = dp_step(f, s, y, h * mid).0;
        if crossed(&y, &y_mid) {
            hi = mid;
            y_hi = y_mid;
        } else {
            lo = mid;
        }
    }
    (s + h * hi, y_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_to_tolerance() {
        let tol = Tolerances::<f64>::default();
        let out = integrate(|_, y: f64| -y, 0.0, 2.0, 1.0, &tol, |_, _| false, |_| true);
        match out {
            Outcome::Reached(y) => assert!((y - (-2.0f64).exp()).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_event_is_located() {
        let tol = Tolerances::<f64>::default();
        let out = integrate(
            |_, _y: f64| -4.0,
            0.0,
            1.0,
            0.3,
            &tol,
            |_, b| *b <= 0.0,
            |_| true,
        );
        match out {
            Outcome::Event { at, .. } => assert!((at - 0.075).abs() < 1e-13),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rotation_in_complex_state() {
        let tol = Tolerances::<f64>::default();
        let i = Complex::new(0.0, 1.0);
        let out = integrate(
            move |_, y: Complex<f64>| i * y,
            0.0,
            std::f64::consts::PI,
            Complex::new(1.0, 0.0),
            &tol,
            |_, _| false,
            |_| true,
        );
        match out {
            Outcome::Reached(y) => assert!((y - Complex::new(-1.0, 0.0)).norm() < 1e-8),
            other => panic!("{other:?}"),
        }
    }
}
