//! Driving functions: time grids, interpolation rules, sampling and regularity.

mod brownian;
mod modulus;
mod regularity;

use serde::{Deserialize, Serialize};

pub use brownian::{rng_for, sample_brownian_driver, sample_brownian_on};
pub use modulus::{delta_modulus, DeltaModulus, ModulusConfig, ProbeBox};
pub use regularity::{
    class_d_profile, holder_on, local_holder_norm, oscillation, phi, HolderProfile,
};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Strictly increasing sample times starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<T> {
    times: Vec<T>,
    max_spacing: T,
    min_spacing: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::invalid("time grid needs at least two times"));
        }
        if times[0] != T::zero() {
            return Err(Error::invalid("time grid must start at 0"));
        }
        let mut max_spacing = T::zero();
        let mut min_spacing = T::infinity();
        for (i, w) in times.windows(2).enumerate() {
            let h = w[1] - w[0];
            if !w[1].is_finite() || h <= T::zero() {
                return Err(Error::invalid(format!(
                    "time grid not strictly increasing at index {}",
                    i + 1
                )));
            }
            max_spacing = max_spacing.max(h);
            min_spacing = min_spacing.min(h);
        }
        Ok(TimeGrid {
            times,
            max_spacing,
            min_spacing,
        })
    }

    /// `n` equal cells on `[0, t_end]`.
    pub fn uniform(n: usize, t_end: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("uniform grid needs n >= 1"));
        }
        if !(t_end > T::zero()) || !t_end.is_finite() {
            return Err(Error::invalid("uniform grid needs a positive end time"));
        }
        let nn = T::from_count(n);
        let mut times: Vec<T> = (0..=n).map(|k| t_end * T::from_count(k) / nn).collect();
        times[n] = t_end;
        Self::new(times)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false; grids hold at least two times.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn max_spacing(&self) -> T {
        self.max_spacing
    }

    pub fn min_spacing(&self) -> T {
        self.min_spacing
    }

    /// Tolerance used when matching times against knots.
    pub fn knot_tol(&self) -> T {
        T::epsilon() * T::lit(64.0) * self.t_end().max(T::one())
    }

    /// Index of the knot equal to `t` up to [`Self::knot_tol`].
    pub fn knot_index(&self, t: T) -> Option<usize> {
        let tol = self.knot_tol();
        let i = self.times.partition_point(|&x| x < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Cell `k` with `t` in `(t_k, t_{k+1}]`; times at or before 0 give cell 0.
    pub fn cell_of(&self, t: T) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        i.saturating_sub(1).min(self.cells() - 1)
    }

    /// Union with `extra`, deduplicated within the knot tolerance and cut at `t_max`.
    pub fn merged(&self, extra: &[T], t_max: T) -> Result<Self> {
        let tol = self.knot_tol();
        let mut all: Vec<T> = self
            .times
            .iter()
            .chain(extra.iter())
            .copied()
            .filter(|&t| t >= T::zero() && t <= t_max + tol)
            .collect();
        all.push(t_max);
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        let mut out: Vec<T> = Vec::with_capacity(all.len());
        for t in all {
            match out.last() {
                Some(&last) if t - last <= tol => {}
                _ => out.push(t),
            }
        }
        if let Some(last) = out.last_mut() {
            if (*last - t_max).abs() <= tol {
                *last = t_max;
            }
        }
        Self::new(out)
    }

    /// Knots `t_k, t_{k+1}, ...` shifted to start at 0.
    pub fn shifted_from(&self, k: usize) -> Result<Self> {
        if k + 1 >= self.times.len() {
            return Err(Error::OutOfRange(format!(
                "no cells after knot {k} of {}",
                self.times.len()
            )));
        }
        let t0 = self.times[k];
        Self::new(self.times[k..].iter().map(|&t| t - t0).collect())
    }

    /// Converts every time to another scalar type.
    pub fn cast<U: Real>(&self) -> TimeGrid<U> {
        TimeGrid::new(self.times.iter().map(|t| U::lit(t.as_f64())).collect())
            .expect("casting keeps a valid grid")
    }
}

/// Interpolation between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Value on `(t_k, t_{k+1}]` is `values[k+1]` (left-continuous steps).
    PiecewiseConstant,
    PiecewiseLinear,
    /// `v_k + (v_{k+1} - v_k) * sqrt((t - t_k) / (t_{k+1} - t_k))` on each cell.
    PiecewiseSqrt,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::PiecewiseConstant => "piecewise-constant",
            Interpolation::PiecewiseLinear => "piecewise-linear",
            Interpolation::PiecewiseSqrt => "piecewise-sqrt",
        }
    }
}

impl std::str::FromStr for Interpolation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise-constant" | "constant" => Ok(Interpolation::PiecewiseConstant),
            "piecewise-linear" | "linear" => Ok(Interpolation::PiecewiseLinear),
            "piecewise-sqrt" | "sqrt" => Ok(Interpolation::PiecewiseSqrt),
            other => Err(Error::invalid(format!("unknown interpolation `{other}`"))),
        }
    }
}

/// A real driving function sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver<T> {
    grid: TimeGrid<T>,
    values: Vec<T>,
    interpolation: Interpolation,
}

/// Builds a driver, validating the normalisation `values[0] = 0`.
pub fn make_driver<T: Real>(
    grid: TimeGrid<T>,
    values: Vec<T>,
    interpolation: Interpolation,
) -> Result<Driver<T>> {
    if values.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} values for {} grid times",
            values.len(),
            grid.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite driver value at index {i}")));
    }
    if values[0] != T::zero() {
        return Err(Error::invalid("driver must start at 0"));
    }
    Ok(Driver {
        grid,
        values,
        interpolation,
    })
}

impl<T: Real> Driver<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>, interpolation: Interpolation) -> Result<Self> {
        make_driver(grid, values, interpolation)
    }

    pub fn zero(grid: TimeGrid<T>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Driver {
            grid,
            values,
            interpolation: Interpolation::PiecewiseLinear,
        }
    }

    /// Samples `f` at the knots of `grid`, subtracting `f(0)`.
    pub fn from_fn(grid: TimeGrid<T>, interpolation: Interpolation, f: impl Fn(T) -> T) -> Self {
        let f0 = f(T::zero());
        let mut values: Vec<T> = grid.times().iter().map(|&t| f(t) - f0).collect();
        values[0] = T::zero();
        Driver {
            grid,
            values,
            interpolation,
        }
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn t_end(&self) -> T {
        self.grid.t_end()
    }

    /// Value at `t`, clamped to `[0, t_end]`.
    pub fn eval(&self, t: T) -> T {
        let times = self.grid.times();
        let t = t.max(T::zero()).min(self.t_end());
        let i = times.partition_point(|&x| x < t);
        if i < times.len() && times[i] == t {
            return self.values[i];
        }
        self.eval_in_cell(i - 1, t)
    }

    /// Value at `t` using the rule of cell `k` (no range check on `t`).
    pub(crate) fn eval_in_cell(&self, k: usize, t: T) -> T {
        let times = self.grid.times();
        let (t0, t1) = (times[k], times[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        match self.interpolation {
            Interpolation::PiecewiseConstant => v1,
            Interpolation::PiecewiseLinear => v0 + (v1 - v0) * ((t - t0) / (t1 - t0)),
            Interpolation::PiecewiseSqrt => {
                v0 + (v1 - v0) * ((t - t0) / (t1 - t0)).max(T::zero()).sqrt()
            }
        }
    }

    /// Knots followed by cell midpoints, sorted.
    pub fn sample_times(&self) -> Vec<T> {
        let times = self.grid.times();
        let mut out = Vec::with_capacity(2 * times.len());
        for w in times.windows(2) {
            out.push(w[0]);
            out.push((w[0] + w[1]) * T::lit(0.5));
        }
        out.push(self.t_end());
        out
    }

    /// `sup |d|` over `[0, t]`, exact for all three rules.
    pub fn sup_abs_until(&self, t: T) -> T {
        let times = self.grid.times();
        let mut m = self.eval(t).abs();
        for (k, &tk) in times.iter().enumerate() {
            if tk > t {
                break;
            }
            m = m.max(self.values[k].abs());
        }
        m
    }

    pub fn sup_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// `d(t0 + s) - d(t0)`; `t0` must be a knot.
    pub fn shifted(&self, t0: T) -> Result<Self> {
        let k = self
            .grid
            .knot_index(t0)
            .ok_or_else(|| Error::invalid(format!("restart time {t0} is not a knot")))?;
        let grid = self.grid.shifted_from(k)?;
        let base = self.values[k];
        let values = self.values[k..].iter().map(|&v| v - base).collect();
        Ok(Driver {
            grid,
            values,
            interpolation: self.interpolation,
        })
    }

    /// Restriction to `[0, t]`; a partial last cell keeps its shape.
    pub fn truncated(&self, t: T) -> Result<Self> {
        if !(t > T::zero()) || t > self.t_end() + self.grid.knot_tol() {
            return Err(Error::OutOfRange(format!(
                "truncation time {t} outside (0, {}]",
                self.t_end()
            )));
        }
        if let Some(k) = self.grid.knot_index(t) {
            if k == 0 {
                return Err(Error::OutOfRange("truncation at time 0".into()));
            }
            let grid = TimeGrid::new(self.grid.times()[..=k].to_vec())?;
            return Ok(Driver {
                grid,
                values: self.values[..=k].to_vec(),
                interpolation: self.interpolation,
            });
        }
        let k = self.grid.cell_of(t);
        let mut times = self.grid.times()[..=k].to_vec();
        let mut values = self.values[..=k].to_vec();
        times.push(t);
        values.push(self.eval(t));
        Ok(Driver {
            grid: TimeGrid::new(times)?,
            values,
            interpolation: self.interpolation,
        })
    }

    /// Holds the final value on `(t_end, t]`; returns a clone when `t <= t_end`.
    pub fn held_until(&self, t: T) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::invalid("hold time must be finite"));
        }
        if t <= self.t_end() + self.grid.knot_tol() {
            return Ok(self.clone());
        }
        let mut times = self.grid.times().to_vec();
        let mut values = self.values.clone();
        times.push(t);
        values.push(values[values.len() - 1]);
        Driver::new(TimeGrid::new(times)?, values, self.interpolation)
    }

    /// Inserts knots without changing the function; square-root cells cannot be split.
    pub fn refined(&self, extra: &[T]) -> Result<Self> {
        let grid = self.grid.merged(extra, self.t_end())?;
        if grid.len() == self.grid.len() {
            return Ok(self.clone());
        }
        if self.interpolation == Interpolation::PiecewiseSqrt {
            return Err(Error::invalid("square-root cells cannot be split without changing the driver"));
        }
        let values = grid
            .times()
            .iter()
            .map(|&t| {
                let k = self.grid.cell_of(t);
                match self.grid.knot_index(t) {
                    Some(i) => self.values[i],
                    None => self.eval_in_cell(k, t),
                }
            })
            .collect();
        Driver::new(grid, values, self.interpolation)
    }

    /// Same knots and rule, values mapped by `f` (the result is renormalised to start at 0).
    pub fn map_values(&self, f: impl Fn(T, T) -> T) -> Self {
        let times = self.grid.times();
        let mut values: Vec<T> = times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| f(t, v))
            .collect();
        let v0 = values[0];
        for v in values.iter_mut() {
            *v -= v0;
        }
        Driver {
            grid: self.grid.clone(),
            values,
            interpolation: self.interpolation,
        }
    }

    /// Piecewise-linear interpolant of this driver on `grid`.
    pub fn resampled(&self, grid: TimeGrid<T>, interpolation: Interpolation) -> Self {
        Driver::from_fn(grid, interpolation, |t| self.eval(t))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> Driver<U> {
        Driver {
            grid: self.grid.cast(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            interpolation: self.interpolation,
        }
    }
}

/// `sup |a - b|` over `[t_lo, t_hi]`, sampled at the knots and midpoints of both drivers.
pub fn sup_gap<T: Real>(a: &Driver<T>, b: &Driver<T>, t_lo: T, t_hi: T) -> T {
    let mut ts: Vec<T> = a
        .sample_times()
        .into_iter()
        .chain(b.sample_times())
        .filter(|&t| t >= t_lo && t <= t_hi)
        .collect();
    ts.push(t_lo);
    ts.push(t_hi);
    ts.iter()
        .fold(T::zero(), |m, &t| m.max((a.eval(t) - b.eval(t)).abs()))
}

/// `sup |(a - a(t_lo)) - (b - b(t_lo))|` over `[t_lo, t_hi]`.
pub fn increment_gap<T: Real>(a: &Driver<T>, b: &Driver<T>, t_lo: T, t_hi: T) -> T {
    let base = a.eval(t_lo) - b.eval(t_lo);
    let mut ts: Vec<T> = a
        .sample_times()
        .into_iter()
        .chain(b.sample_times())
        .filter(|&t| t >= t_lo && t <= t_hi)
        .collect();
    ts.push(t_hi);
    ts.iter()
        .fold(T::zero(), |m, &t| m.max((a.eval(t) - b.eval(t) - base).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_driver_is_zero_everywhere() {
        let d = make_driver(
            TimeGrid::new(vec![0.0, 1.0]).unwrap(),
            vec![0.0, 0.0],
            Interpolation::PiecewiseLinear,
        )
        .unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(d.eval(t), 0.0);
        }
    }

    #[test]
    fn sqrt_rule_on_first_cell() {
        let d = make_driver(
            TimeGrid::new(vec![0.0, 0.25, 1.0]).unwrap(),
            vec![0.0, 1.0, 1.0],
            Interpolation::PiecewiseSqrt,
        )
        .unwrap();
        for t in [0.01, 0.1, 0.2, 0.25] {
            assert!((d.eval(t) - (t / 0.25f64).sqrt()).abs() < 1e-15);
        }
        assert_eq!(d.eval(0.6), 1.0);
    }

    #[test]
    fn constant_rule_is_left_continuous() {
        let d = make_driver(
            TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap(),
            vec![0.0, 2.0, -1.0],
            Interpolation::PiecewiseConstant,
        )
        .unwrap();
        assert_eq!(d.eval(0.0), 0.0);
        assert_eq!(d.eval(0.1), 2.0);
        assert_eq!(d.eval(0.5), 2.0);
        assert_eq!(d.eval(0.5001), -1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(make_driver(g.clone(), vec![0.0], Interpolation::PiecewiseLinear).is_err());
        assert!(make_driver(g, vec![0.1, 0.0], Interpolation::PiecewiseLinear).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::new(vec![0.1, 0.5]).is_err());
    }

    #[test]
    fn shift_and_truncate() {
        let g = TimeGrid::uniform(4, 1.0).unwrap();
        let d = Driver::from_fn(g, Interpolation::PiecewiseLinear, |t: f64| t * t);
        let s = d.shifted(0.5).unwrap();
        assert_eq!(s.t_end(), 0.5);
        assert!((s.eval(0.25) - (0.5625 - 0.25)).abs() < 1e-15);
        assert!(d.shifted(0.3).is_err());
        let tr = d.truncated(0.6).unwrap();
        assert_eq!(tr.t_end(), 0.6);
        assert!((tr.eval(0.6) - d.eval(0.6)).abs() < 1e-15);
    }

    #[test]
    fn merged_grid_dedupes() {
        let g = TimeGrid::uniform(4, 1.0).unwrap();
        let m = g.merged(&[0.5, 0.6, 0.6 + 1e-18], 0.8).unwrap();
        assert_eq!(m.times(), &[0.0, 0.25, 0.5, 0.6, 0.75, 0.8]);
    }

    #[test]
    fn interpolation_names_round_trip() {
        for i in [
            Interpolation::PiecewiseConstant,
            Interpolation::PiecewiseLinear,
            Interpolation::PiecewiseSqrt,
        ] {
            assert_eq!(i.as_str().parse::<Interpolation>().unwrap(), i);
            let j = serde_json::to_string(&i).unwrap();
            assert_eq!(j, format!("\"{}\"", i.as_str()));
        }
    }
}
