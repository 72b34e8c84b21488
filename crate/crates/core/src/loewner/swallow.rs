//! Reversed flow `dh/ds = -2 / (h - W(s))` on the real line and swallow times.
//!
//! Integrated in `q = (h - W)^2`, which decreases through zero at the hit:
//! `dq/ds = -4 - 2 sign(h - W) sqrt(q) W'`.

use serde::Serialize;

use crate::driver::{Driver, Interpolation};
use crate::error::{Error, Result};
use crate::ode::{integrate, Outcome, Tolerances};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
enum Forcing<T> {
    Const(T),
    Linear { w0: T, slope: T },
    /// `w0 + coef sqrt(s - start)`.
    SqrtFromStart { w0: T, coef: T },
    /// `w_end + coef sqrt(end - s)`.
    SqrtToEnd { w_end: T, coef: T },
}

#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    start: T,
    end: T,
    forcing: Forcing<T>,
}

impl<T: Real> Segment<T> {
    fn value_at_start(&self) -> T {
        match self.forcing {
            Forcing::Const(w) => w,
            Forcing::Linear { w0, .. } | Forcing::SqrtFromStart { w0, .. } => w0,
            Forcing::SqrtToEnd { w_end, coef } => w_end + coef * (self.end - self.start).sqrt(),
        }
    }

    fn value_at_end(&self) -> T {
        let len = self.end - self.start;
        match self.forcing {
            Forcing::Const(w) => w,
            Forcing::Linear { w0, slope } => w0 + slope * len,
            Forcing::SqrtFromStart { w0, coef } => w0 + coef * len.sqrt(),
            Forcing::SqrtToEnd { w_end, .. } => w_end,
        }
    }
}

/// Forcing `V` used directly, over `[0, horizon]`.
fn forward_segments<T: Real>(v: &Driver<T>, horizon: T) -> Vec<Segment<T>> {
    let times = v.grid().times();
    let mut out = Vec::new();
    for k in 0..v.grid().cells() {
        let a = times[k];
        if a >= horizon {
            break;
        }
        let b = times[k + 1].min(horizon);
        let (v0, v1, len) = (v.values()[k], v.values()[k + 1], times[k + 1] - a);
        let forcing = match v.interpolation() {
            Interpolation::PiecewiseConstant => Forcing::Const(v1),
            Interpolation::PiecewiseLinear => Forcing::Linear {
                w0: v0,
                slope: (v1 - v0) / len,
            },
            Interpolation::PiecewiseSqrt => Forcing::SqrtFromStart {
                w0: v0,
                coef: (v1 - v0) / len.sqrt(),
            },
        };
        out.push(Segment {
            start: a,
            end: b,
            forcing,
        });
    }
    out
}

/// Forcing `W(s) = d(s0 - s) - d(s0)` over `[0, s0]`.
fn reversed_segments<T: Real>(d: &Driver<T>, s0: T) -> Vec<Segment<T>> {
    let times = d.grid().times();
    let base = d.eval(s0);
    let mut out = Vec::new();
    let last = d.grid().cell_of(s0);
    for k in (0..=last).rev() {
        let a = times[k];
        let b = times[k + 1].min(s0);
        if b <= a {
            continue;
        }
        let (v0, v1, len) = (d.values()[k], d.values()[k + 1], times[k + 1] - a);
        let forcing = match d.interpolation() {
            Interpolation::PiecewiseConstant => Forcing::Const(v1 - base),
            Interpolation::PiecewiseLinear => {
                let slope = (v1 - v0) / len;
                Forcing::Linear {
                    w0: v0 + slope * (b - a) - base,
                    slope: -slope,
                }
            }
            Interpolation::PiecewiseSqrt => Forcing::SqrtToEnd {
                w_end: v0 - base,
                coef: (v1 - v0) / len.sqrt(),
            },
        };
        out.push(Segment {
            start: s0 - b,
            end: s0 - a,
            forcing,
        });
    }
    out
}

/// First time `h - W` reaches 0 within the segments, or infinity.
fn hit_time<T: Real>(segments: &[Segment<T>], x: T) -> T {
    let tol = Tolerances::<T>::default();
    let sigma = x.signum();
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let mut h = x;
    for seg in segments {
        let r = h - seg.value_at_start();
        if r == T::zero() || r.signum() != sigma {
            return seg.start;
        }
        let q0 = r * r;
        let len = seg.end - seg.start;
        let crossed = |_: &T, b: &T| *b <= T::zero();
        let accept = |_: &T| true;
        let q_end = match seg.forcing {
            Forcing::Linear { slope, .. } if slope != T::zero() => {
                let rhs = |_: T, q: T| -four - two * sigma * q.max(T::zero()).sqrt() * slope;
                match integrate(rhs, seg.start, seg.end, q0, &tol, crossed, accept) {
                    Outcome::Reached(q) => q,
                    Outcome::Event { at, .. } => return at,
                    Outcome::Underflow { lo, .. } => return lo,
                }
            }
            Forcing::Const(_) | Forcing::Linear { .. } => {
                if q0 <= four * len {
                    return seg.start + q0 / four;
                }
                q0 - four * len
            }
            Forcing::SqrtFromStart { coef, .. } => {
                let rhs = |u: T, q: T| -T::lit(8.0) * u - two * sigma * q.max(T::zero()).sqrt() * coef;
                match integrate(rhs, T::zero(), len.sqrt(), q0, &tol, crossed, accept) {
                    Outcome::Reached(q) => q,
                    Outcome::Event { at, .. } => return seg.start + at * at,
                    Outcome::Underflow { lo, .. } => return seg.start + lo * lo,
                }
            }
            Forcing::SqrtToEnd { coef, .. } => {
                let big_u = len.sqrt();
                let rhs = |v: T, q: T| {
                    -T::lit(8.0) * (big_u - v) + two * sigma * q.max(T::zero()).sqrt() * coef
                };
                let to_time = |v: T| seg.end - (big_u - v) * (big_u - v);
                match integrate(rhs, T::zero(), big_u, q0, &tol, crossed, accept) {
                    Outcome::Reached(q) => q,
                    Outcome::Event { at, .. } => return to_time(at),
                    Outcome::Underflow { lo, .. } => return to_time(lo),
                }
            }
        };
        h = seg.value_at_end() + sigma * q_end.max(T::zero()).sqrt();
    }
    T::infinity()
}

/// Hit time of `x` for `dh/ds = -2 / (h - v(s))` on `[0, horizon]`, or infinity.
pub fn reverse_hit_time<T: Real>(v: &Driver<T>, x: T, horizon: T) -> Result<T> {
    if x == T::zero() {
        return Err(Error::invalid("start point must be nonzero"));
    }
    if horizon > v.t_end() + v.grid().knot_tol() {
        return Err(Error::OutOfRange(format!(
            "horizon {horizon} beyond driver end {}",
            v.t_end()
        )));
    }
    let t = hit_time(&forward_segments(v, horizon), x);
    Ok(if t <= horizon { t } else { T::infinity() })
}

/// Swallow time `T(x) <= s0` of the flow reversed from `s0`, or infinity.
pub fn reverse_swallow_time<T: Real>(d: &Driver<T>, s0: T, x: T) -> Result<T> {
    if x == T::zero() {
        return Err(Error::invalid("start point must be nonzero"));
    }
    if s0 > d.t_end() + d.grid().knot_tol() || !(s0 > T::zero()) {
        return Err(Error::OutOfRange(format!(
            "horizon {s0} outside (0, {}]",
            d.t_end()
        )));
    }
    let t = hit_time(&reversed_segments(d, s0.min(d.t_end())), x);
    Ok(if t <= s0 { t } else { T::infinity() })
}

/// The swallowed interval `{x : T(x) <= s0}` with sampled swallow times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwallowReport<T> {
    pub horizon: T,
    pub interval_left: T,
    pub interval_right: T,
    /// Every `(x, T(x))` evaluated during the search; `T` is infinite when not swallowed.
    pub samples: Vec<(T, T)>,
}

impl<T: Real> SwallowReport<T> {
    pub fn contains(&self, lo: T, hi: T) -> bool {
        self.interval_left <= lo && hi <= self.interval_right
    }
}

/// Bisection for the endpoints of the swallowed interval; the endpoints returned
/// are the outermost points verified to be swallowed.
pub fn swallowed_interval<T: Real>(d: &Driver<T>, s0: T, tol: T) -> Result<SwallowReport<T>> {
    if !(tol > T::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if s0 > d.t_end() + d.grid().knot_tol() || s0 < T::zero() {
        return Err(Error::OutOfRange(format!("horizon {s0} outside [0, {}]", d.t_end())));
    }
    if s0 == T::zero() {
        return Ok(SwallowReport {
            horizon: s0,
            interval_left: T::zero(),
            interval_right: T::zero(),
            samples: Vec::new(),
        });
    }
    let segments = reversed_segments(d, s0.min(d.t_end()));
    let reach = T::lit(2.0) * s0.sqrt() + T::lit(2.0) * d.sup_abs_until(s0) + tol;
    let mut samples = Vec::new();
    let mut side = |dir: T| -> T {
        let mut probe = |x: T| {
            let t = hit_time(&segments, x);
            let t = if t <= s0 { t } else { T::infinity() };
            samples.push((x, t));
            t <= s0
        };
        let mut hi = reach;
        for _ in 0..64 {
            if !probe(dir * hi) {
                break;
            }
            hi = hi * T::lit(2.0);
        }
        let mut lo = T::zero();
        while hi - lo > tol {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if probe(dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let right = side(T::one());
    let left = -side(-T::one());
    Ok(SwallowReport {
        horizon: s0,
        interval_left: left,
        interval_right: right,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::TimeGrid;

    fn zero() -> Driver<f64> {
        Driver::zero(TimeGrid::uniform(16, 1.0).unwrap())
    }

    #[test]
    fn zero_driver_swallow_time_is_quadratic() {
        for x in [0.05, -0.3, 0.9, 1.7] {
            let t = reverse_swallow_time(&zero(), 1.0, x).unwrap();
            assert!((t - x * x / 4.0).abs() <= 1e-12 * x * x);
        }
        assert!(reverse_swallow_time(&zero(), 1.0, 2.1).unwrap().is_infinite());
        assert!(reverse_swallow_time(&zero(), 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_of_the_interval() {
        let dt = 1.0 / 16.0;
        let t = reverse_swallow_time(&zero(), dt, 2.0 * dt.sqrt()).unwrap();
        assert!((t - dt).abs() < 1e-15);
        let rep = swallowed_interval(&zero(), 0.01, 1e-9).unwrap();
        assert!((rep.interval_right - 0.2).abs() < 1e-8);
        assert!((rep.interval_left + 0.2).abs() < 1e-8);
    }

    #[test]
    fn interval_shrinks_with_horizon() {
        let mut prev = f64::INFINITY;
        for s0 in [0.1, 0.01, 1e-4, 1e-6] {
            let rep = swallowed_interval(&zero(), s0, 1e-10).unwrap();
            assert!(rep.interval_right < prev);
            prev = rep.interval_right;
        }
        assert!(prev < 3e-3);
    }

    #[test]
    fn sqrt_forcing_matches_closed_form() {
        // With u = (h - W) / sqrt(s) the flow separates; for |a| < 4 this gives
        // T(x) = tau(a) x^2, ln(4 tau) = -(a / b) (pi/2 - atan(a / 2b)), b = sqrt(4 - a^2/4).
        let tau = |a: f64| {
            let b = (4.0 - a * a / 4.0).sqrt();
            (-(a / b) * (std::f64::consts::FRAC_PI_2 - (a / (2.0 * b)).atan())).exp() / 4.0
        };
        for a in [-3.0f64, 1.0, 2.5] {
            let v = Driver::new(TimeGrid::new(vec![0.0, 4.0]).unwrap(), vec![0.0, 2.0 * a], Interpolation::PiecewiseSqrt)
                .unwrap();
            for x in [0.1, 0.2] {
                let t = reverse_hit_time(&v, x, 4.0).unwrap();
                let want = tau(a) * x * x;
                assert!((t - want).abs() < 1e-6 * want, "a={a} x={x}: {t} vs {want}");
            }
        }
    }

    #[test]
    fn linear_forcing_matches_fine_rk4() {
        let v = Driver::from_fn(TimeGrid::uniform(3, 1.0).unwrap(), Interpolation::PiecewiseLinear, |s| -1.5 * s);
        let x = 0.9;
        let t = reverse_hit_time(&v, x, 1.0).unwrap();
        let f = |s: f64, h: f64| -2.0 / (h + 1.5 * s);
        let (mut s, mut h, step) = (0.0f64, x, 1e-6);
        while h + 1.5 * s > 0.0 {
            let k1 = f(s, h);
            let k2 = f(s + step / 2.0, h + step / 2.0 * k1);
            let k3 = f(s + step / 2.0, h + step / 2.0 * k2);
            let k4 = f(s + step, h + step * k3);
            let nh = h + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !(nh + 1.5 * (s + step) > 0.0) {
                break;
            }
            h = nh;
            s += step;
        }
        assert!((t - s).abs() < 1e-5, "{t} vs {s}");
    }

    #[test]
    fn reversed_sqrt_cells_are_consistent() {
        // Reversing a sqrt driver twice gives back the forward forcing.
        let d = Driver::new(
            TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap(),
            vec![0.0, 0.8, 0.3],
            Interpolation::PiecewiseSqrt,
        )
        .unwrap();
        let segs = reversed_segments(&d, 1.0f64);
        for seg in &segs {
            for frac in [0.0, 0.3, 1.0] {
                let s = seg.start + frac * (seg.end - seg.start);
                let want = d.eval(1.0 - s) - d.eval(1.0);
                let got = match seg.forcing {
                    Forcing::SqrtToEnd { w_end, coef } => w_end + coef * (seg.end - s).sqrt(),
                    _ => unreachable!(),
                };
                assert!((got - want).abs() < 1e-14);
            }
        }
        let t: f64 = reverse_swallow_time(&d, 1.0, 0.5).unwrap();
        assert!(t.is_finite() && t > 0.0);
    }
}
