use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::slit::{build_elements, SlitMapChain};
use crate::driver::{Driver, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Provenance carried by a trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    /// SHA-256 of the generating driver, see [`crate::io::driver_digest`].
    pub driver_digest: Option<String>,
    pub y0: Option<f64>,
    pub extrapolated: bool,
    /// Restart knot for restarted traces.
    pub restart_time: Option<f64>,
}

/// A half-plane curve sampled at capacity times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    grid: TimeGrid<T>,
    points: Vec<Complex<T>>,
    tip_error: Vec<T>,
    meta: TraceMeta,
}

impl<T: Real> Trace<T> {
    /// Validates lengths and finiteness; imaginary parts below zero are clamped.
    pub fn new(grid: TimeGrid<T>, points: Vec<Complex<T>>) -> Result<Self> {
        let n = points.len();
        Self::from_parts(grid, points, vec![T::zero(); n], TraceMeta::default())
    }

    pub fn from_parts(
        grid: TimeGrid<T>,
        mut points: Vec<Complex<T>>,
        tip_error: Vec<T>,
        meta: TraceMeta,
    ) -> Result<Self> {
        if points.len() != grid.len() || tip_error.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} points for {} grid times",
                points.len(),
                grid.len()
            )));
        }
        for (i, p) in points.iter_mut().enumerate() {
            if !p.re.is_finite() || !p.im.is_finite() {
                return Err(Error::Numerical(format!("non-finite trace point at index {i}")));
            }
            if p.im < T::zero() {
                p.im = T::zero();
            }
        }
        Ok(Trace {
            grid,
            points,
            tip_error,
            meta,
        })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn times(&self) -> &[T] {
        self.grid.times()
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    /// Per-point extrapolation error estimate (zero when not extrapolated).
    pub fn tip_error(&self) -> &[T] {
        &self.tip_error
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: TraceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest imaginary part over grid times in `[t_lo, t_hi]`, or `None` if no time is inside.
    pub fn min_imag_on(&self, t_lo: T, t_hi: T) -> Option<T> {
        let tol = self.grid.knot_tol();
        self.times()
            .iter()
            .zip(&self.points)
            .filter(|(&t, _)| t >= t_lo - tol && t <= t_hi + tol)
            .map(|(_, p)| p.im)
            .reduce(|a, b| a.min(b))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Trace<U> {
        Trace {
            grid: self.grid.cast(),
            points: self
                .points
                .iter()
                .map(|p| Complex::new(U::lit(p.re.as_f64()), U::lit(p.im.as_f64())))
                .collect(),
            tip_error: self.tip_error.iter().map(|e| U::lit(e.as_f64())).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Knobs for trace synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions<T> {
    /// Tip offset; defaults to `sqrt(min cell) / 16`.
    pub y0: Option<T>,
    /// Combine offsets `y0` and `y0 / 2` to cancel the quadratic term.
    pub extrapolate: bool,
}

impl<T> Default for TraceOptions<T> {
    fn default() -> Self {
        TraceOptions {
            y0: None,
            extrapolate: true,
        }
    }
}

/// Trace of `d` at the times of `out_grid`, with extrapolated tip evaluation.
pub fn compute_trace<T: Real>(d: &Driver<T>, out_grid: &TimeGrid<T>, y0: Option<T>) -> Result<Trace<T>> {
    compute_trace_with(
        d,
        out_grid,
        &TraceOptions {
            y0,
            extrapolate: true,
        },
    )
}

pub fn compute_trace_with<T: Real>(
    d: &Driver<T>,
    out_grid: &TimeGrid<T>,
    opts: &TraceOptions<T>,
) -> Result<Trace<T>> {
    let tol = d.grid().knot_tol();
    if out_grid.t_end() > d.t_end() + tol {
        return Err(Error::OutOfRange(format!(
            "output grid ends at {} beyond the driver end {}",
            out_grid.t_end(),
            d.t_end()
        )));
    }
    let t_max = out_grid.t_end().min(d.t_end());
    let times = d.grid().merged(out_grid.times(), t_max)?;
    let chain = SlitMapChain::new(build_elements(d, times.times())?)?;
    let y0 = match opts.y0 {
        Some(y) if y > T::zero() => y,
        Some(y) => return Err(Error::invalid(format!("tip offset must be positive, got {y}"))),
        None => times.min_spacing().sqrt() / T::lit(16.0),
    };
    let index: Vec<usize> = out_grid
        .times()
        .iter()
        .map(|&t| {
            times
                .knot_index(t.min(t_max))
                .ok_or_else(|| Error::Numerical(format!("output time {t} lost in merge")))
        })
        .collect::<Result<_>>()?;
    let extrapolate = opts.extrapolate;
    let evaluated: Vec<(Complex<T>, T)> = index
        .par_iter()
        .map(|&k| {
            if k == 0 {
                return (Complex::new(T::zero(), T::zero()), T::zero());
            }
            let far = chain.eval_prefix(k, Complex::new(T::zero(), y0));
            if !extrapolate {
                return (far, T::zero());
            }
            let near = chain.eval_prefix(k, Complex::new(T::zero(), y0 * T::lit(0.5)));
            let three = T::lit(3.0);
            ((near * T::lit(4.0) - far) / three, (near - far).norm() / three)
        })
        .collect();
    let (points, tip_error): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();
    let meta = TraceMeta {
        driver_digest: Some(crate::io::driver_digest(d)),
        y0: Some(y0.as_f64()),
        extrapolated: extrapolate,
        restart_time: None,
    };
    Trace::from_parts(out_grid.clone(), points, tip_error, meta)
}

/// Trace of `d(t0 + s) - d(t0)` at local times `out_grid`.
pub fn restarted_trace<T: Real>(d: &Driver<T>, t0: T, out_grid: &TimeGrid<T>) -> Result<Trace<T>> {
    let shifted = d.shifted(t0)?;
    let tr = compute_trace(&shifted, out_grid, None)?;
    let mut meta = tr.meta().clone();
    meta.restart_time = Some(t0.as_f64());
    Ok(tr.with_meta(meta))
}

/// Outcome of the hull bounds `|Re| <= sup|d|` and `Im <= 2 sqrt(t)`.
///
/// Margins are net of each point's extrapolation error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HullCheck {
    pub holds: bool,
    /// Largest `|Re z(t)| - sup_{[0,t]} |d|` (positive means violation).
    pub worst_re_margin: f64,
    /// Largest `Im z(t) - 2 sqrt(t)`.
    pub worst_im_margin: f64,
    /// Index of the point with the largest margin.
    pub worst_index: usize,
}

pub fn hull_bounds_check<T: Real>(tr: &Trace<T>, d: &Driver<T>, tol: T) -> HullCheck {
    let mut worst_re = f64::NEG_INFINITY;
    let mut worst_im = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut worst = f64::NEG_INFINITY;
    for (i, ((&t, p), &err)) in tr.times().iter().zip(tr.points()).zip(tr.tip_error()).enumerate() {
        let re = (p.re.abs() - d.sup_abs_until(t) - err).as_f64();
        let im = (p.im - T::lit(2.0) * t.sqrt() - err).as_f64();
        worst_re = worst_re.max(re);
        worst_im = worst_im.max(im);
        if re.max(im) > worst {
            worst = re.max(im);
            worst_index = i;
        }
    }
    let tol = tol.as_f64();
    HullCheck {
        holds: worst_re <= tol && worst_im <= tol,
        worst_re_margin: worst_re,
        worst_im_margin: worst_im,
        worst_index,
    }
}
