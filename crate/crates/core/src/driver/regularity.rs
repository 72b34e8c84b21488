use super::{Driver, Interpolation};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Maximum Hölder ratio and increment over the pairs probed for a window.
struct PairScan<T> {
    ratio: T,
    osc: T,
}

/// Anchors are knots, midpoints and the interval ends. Partners are anchors within
/// `delta` and, for continuous rules, the shifted points `s ± delta`; for
/// piecewise-linear drivers this attains the continuous supremum over `|s - t| <= delta`.
fn scan<T: Real>(d: &Driver<T>, lo: T, hi: T, delta: T) -> PairScan<T> {
    let mut s: Vec<T> = d
        .sample_times()
        .into_iter()
        .filter(|&t| t > lo && t < hi)
        .collect();
    s.insert(0, lo);
    s.push(hi);
    s.dedup();
    let v: Vec<T> = s.iter().map(|&t| d.eval(t)).collect();
    let shifted = d.interpolation() != Interpolation::PiecewiseConstant && delta.is_finite();
    let mut ratio = T::zero();
    let mut osc = T::zero();
    let mut visit = |a: T, va: T, b: T, vb: T| {
        let gap = (b - a).abs();
        if gap > T::zero() {
            let inc = (vb - va).abs();
            osc = osc.max(inc);
            ratio = ratio.max(inc / gap.sqrt());
        }
    };
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if s[j] - s[i] > delta {
                break;
            }
            visit(s[i], v[i], s[j], v[j]);
        }
        if shifted {
            let right = s[i] + delta;
            if right < hi {
                visit(s[i], v[i], right, d.eval(right));
            }
            let left = s[i] - delta;
            if left > lo {
                visit(left, d.eval(left), s[i], v[i]);
            }
        }
    }
    PairScan { ratio, osc }
}

fn check_window<T: Real>(delta: T) -> Result<()> {
    if !(delta > T::zero()) {
        return Err(Error::invalid(format!("window must be positive, got {delta}")));
    }
    Ok(())
}

/// `sup |d(s) - d(t)| / sqrt|s - t|` over probed pairs with `|s - t| <= delta`.
pub fn local_holder_norm<T: Real>(d: &Driver<T>, delta: T) -> Result<T> {
    check_window(delta)?;
    Ok(scan(d, T::zero(), d.t_end(), delta.min(d.t_end())).ratio)
}

/// `sup |d(s) - d(t)|` over probed pairs with `|s - t| <= delta`.
pub fn oscillation<T: Real>(d: &Driver<T>, delta: T) -> Result<T> {
    check_window(delta)?;
    Ok(scan(d, T::zero(), d.t_end(), delta.min(d.t_end())).osc)
}

/// Global half-Hölder constant of `d` restricted to `[lo, hi]`.
pub fn holder_on<T: Real>(d: &Driver<T>, lo: T, hi: T) -> Result<T> {
    if !(lo < hi) || lo < T::zero() || hi > d.t_end() + d.grid().knot_tol() {
        return Err(Error::OutOfRange(format!(
            "interval [{lo}, {hi}] not inside [0, {}]",
            d.t_end()
        )));
    }
    Ok(scan(d, lo, hi.min(d.t_end()), T::infinity()).ratio)
}

/// `2 osc(u) + 2 sqrt(u)`.
pub fn phi<T: Real>(u: T, d: &Driver<T>) -> Result<T> {
    check_window(u)?;
    let two = T::lit(2.0);
    Ok(two * oscillation(d, u)? + two * u.sqrt())
}

/// Hölder norms and oscillations over a decreasing ladder of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderProfile<T> {
    pub deltas: Vec<T>,
    pub norms: Vec<T>,
    pub osc: Vec<T>,
}

impl<T: Real> HolderProfile<T> {
    /// True when the norm at the smallest window is below `threshold`.
    pub fn is_class_d(&self, threshold: T) -> bool {
        self.norms.last().is_some_and(|&n| n < threshold)
    }
}

pub fn class_d_profile<T: Real>(d: &Driver<T>, deltas: &[T]) -> Result<HolderProfile<T>> {
    if deltas.is_empty() {
        return Err(Error::invalid("empty window list"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("windows must be strictly decreasing"));
    }
    let mut norms = Vec::with_capacity(deltas.len());
    let mut osc = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        check_window(delta)?;
        let s = scan(d, T::zero(), d.t_end(), delta.min(d.t_end()));
        norms.push(s.ratio);
        osc.push(s.osc);
    }
    Ok(HolderProfile {
        deltas: deltas.to_vec(),
        norms,
        osc,
    })
}
