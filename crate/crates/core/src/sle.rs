//! SLE sampling on `[0, 1]` plus the restarted traces used by the certifier.
//!
//! Drivers are sampled two cells past 1 so that every knot `t_k <= 1` has a full
//! window `[t_k, t_k + 2/n]`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::driver::{sample_brownian_on, Driver, TimeGrid};
use crate::error::{Error, Result};
use crate::loewner::{compute_trace, restarted_trace, Trace};

/// Imaginary parts below this are reported as 0 (boundary contact).
pub const IMAG_FLOOR: f64 = 1e-9;

/// Output points per driver cell in a restarted window.
pub const RESTART_SUBSTEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct SlePath {
    pub kappa: f64,
    pub seed: u64,
    pub n: usize,
    /// Knots `k / n` for `k = 0..=n + 2`.
    pub driver: Driver<f64>,
    /// Trace on `[0, 1]`.
    pub trace: Trace<f64>,
    /// Restarted trace from knot `k` over local times `[0, 2/n]`.
    pub restarted: BTreeMap<usize, Trace<f64>>,
}

/// Knots `k / n` for `k = 0..=cells`.
pub fn unit_grid(n: usize, cells: usize) -> Result<TimeGrid<f64>> {
    if n == 0 {
        return Err(Error::invalid("need at least one cell per unit time"));
    }
    TimeGrid::new((0..=cells).map(|k| k as f64 / n as f64).collect())
}

/// Local grid `[0, cells * dt]` with `RESTART_SUBSTEPS` points per cell.
fn window_grid(dt: f64, cells: usize) -> Result<TimeGrid<f64>> {
    let m = cells * RESTART_SUBSTEPS;
    TimeGrid::new(
        (0..=m)
            .map(|j| j as f64 * dt / RESTART_SUBSTEPS as f64)
            .collect(),
    )
}

/// Samples `sqrt(kappa) B` on `n` cells of `[0, 1]` (plus two), its trace and all restarted windows.
///
/// `kappa = 0` is accepted and gives the zero driver.
pub fn sample_sle(kappa: f64, n: usize, seed: u64, out_grid: Option<&TimeGrid<f64>>) -> Result<SlePath> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be a nonnegative number, got {kappa}")));
    }
    let driver = sample_brownian_on(kappa, unit_grid(n, n + 2)?, seed)?;
    let own;
    let grid = match out_grid {
        Some(g) => g,
        None => {
            own = unit_grid(n, n)?;
            &own
        }
    };
    let trace = compute_trace(&driver, grid, None)?;
    let restarted = restarted_windows(&driver, n, 0..=n)?;
    Ok(SlePath {
        kappa,
        seed,
        n,
        driver,
        trace,
        restarted,
    })
}

/// Restarted traces of `d` from knots `k / n` over two cells.
pub fn restarted_windows(
    d: &Driver<f64>,
    n: usize,
    knots: impl IntoIterator<Item = usize>,
) -> Result<BTreeMap<usize, Trace<f64>>> {
    let dt = 1.0 / n as f64;
    let local = window_grid(dt, 2)?;
    let ks: Vec<usize> = knots.into_iter().collect();
    ks.par_iter()
        .map(|&k| Ok((k, restarted_trace(d, k as f64 * dt, &local)?)))
        .collect()
}

/// `c_k` of `d` for the given knots `k / n`: minimum of `Im` of the trace restarted at
/// `t_k`, over `[t_{k+1}, t_{k+2}]`.
pub fn window_constants(d: &Driver<f64>, n: usize, knots: impl IntoIterator<Item = usize>) -> Result<Vec<f64>> {
    let windows = restarted_windows(d, n, knots)?;
    constants_of(&windows, n)
}

fn constants_of(windows: &BTreeMap<usize, Trace<f64>>, n: usize) -> Result<Vec<f64>> {
    let dt = 1.0 / n as f64;
    windows
        .iter()
        .map(|(&k, tr)| {
            let t0 = k as f64 * dt;
            window_min(tr, t0, t0 + dt, t0 + 2.0 * dt)
        })
        .collect()
}

/// `sqrt(kappa) B` at `steps` equal steps of `[0, t_end]`, each Gaussian step redrawn
/// until the path is within `tube` of `lam` at the new knot.
///
/// This conditions step by step, which is not the law of the path conditioned on
/// the whole tube event. Fails after `max_tries` draws at one step.
pub fn sample_in_tube(
    kappa: f64,
    lam: &Driver<f64>,
    tube: f64,
    steps: usize,
    t_end: f64,
    seed: u64,
    max_tries: usize,
) -> Result<Driver<f64>> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    if !(kappa >= 0.0) || !(tube > 0.0) || steps == 0 || !(t_end > 0.0) {
        return Err(Error::invalid("need kappa >= 0, tube > 0, steps > 0 and t_end > 0"));
    }
    if t_end > lam.t_end() + lam.grid().knot_tol() {
        return Err(Error::OutOfRange(format!("t_end {t_end} beyond the reference driver")));
    }
    let grid = TimeGrid::new((0..=steps).map(|j| t_end * j as f64 / steps as f64).collect())?;
    let h = t_end / steps as f64;
    let sd = (kappa * h).sqrt();
    let mut rng = crate::driver::rng_for(seed, 0);
    let mut values = vec![0.0];
    for &t in &grid.times()[1..] {
        let prev = values[values.len() - 1];
        let target = lam.eval(t.min(lam.t_end()));
        let mut tries = 0;
        let next = loop {
            let z: f64 = rng.sample(StandardNormal);
            let v = prev + sd * z;
            if (v - target).abs() <= tube {
                break v;
            }
            tries += 1;
            if tries >= max_tries {
                return Err(Error::Numerical(format!("no admissible step at t = {t} after {max_tries} draws")));
            }
        };
        values.push(next);
    }
    Driver::new(grid, values, crate::driver::Interpolation::PiecewiseLinear)
}

/// Independent child seed for sample `index` of a run seeded by `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    crate::driver::rng_for(seed, index.wrapping_add(1)).next_u64()
}

fn floored(v: f64) -> f64 {
    if v < IMAG_FLOOR {
        0.0
    } else {
        v
    }
}

/// Grid minimum of `Im` of the trace restarted at knot `k`, over absolute times `[t1, t2]`.
pub fn min_imag_restarted(p: &SlePath, k: usize, t1: f64, t2: f64) -> Result<f64> {
    let tr = p
        .restarted
        .get(&k)
        .ok_or_else(|| Error::OutOfRange(format!("no restarted window at knot {k}")))?;
    let t0 = k as f64 / p.n as f64;
    window_min(tr, t0, t1, t2)
}

fn window_min(tr: &Trace<f64>, t0: f64, t1: f64, t2: f64) -> Result<f64> {
    let tol = tr.grid().knot_tol();
    if !(t0 <= t1 && t1 < t2) || t2 - t0 > tr.grid().t_end() + tol {
        return Err(Error::OutOfRange(format!(
            "window [{t1}, {t2}] not inside [{t0}, {}]",
            t0 + tr.grid().t_end()
        )));
    }
    let v = tr
        .min_imag_on(t1 - t0 - tol, t2 - t0 + tol)
        .ok_or_else(|| Error::OutOfRange(format!("no grid point in [{t1}, {t2}]")))?;
    Ok(floored(v))
}

/// Driver-level variant: restarts `d` at `t0` and scans `[t0, t2]` at `points` evenly spaced times plus `t1`.
pub fn min_imag_restarted_driver(d: &Driver<f64>, t0: f64, t1: f64, t2: f64, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::invalid("need at least two scan points"));
    }
    if !(t0 >= 0.0 && t0 <= t1 && t1 < t2) || t2 > d.t_end() + d.grid().knot_tol() {
        return Err(Error::OutOfRange(format!(
            "window [{t0}; {t1}, {t2}] outside [0, {}]",
            d.t_end()
        )));
    }
    let span = t2 - t0;
    let mut times: Vec<f64> = (0..points).map(|j| span * j as f64 / (points - 1) as f64).collect();
    times.push(t1 - t0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let local = TimeGrid::new(times)?;
    let tr = restarted_trace(d, t0, &local)?;
    window_min(&tr, t0, t1, t2)
}

/// Backward recursion `e_k = min(e_{k+1} / 2, a c_k)` with base `e_n = min(eps_bar / 2, a c_n)`.
///
/// `c[k - 1]` is the constant for knot `k`; the output has the same indexing.
/// The base is shaded one ulp below `eps_bar / 2` so that `e_k < eps_bar / 2` holds strictly.
pub fn epsilon_schedule(c: &[f64], a: f64, eps_bar: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) || !(eps_bar > 0.0) {
        return Err(Error::invalid("a and eps_bar must be positive"));
    }
    if let Some((k, v)) = c.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Domain(format!("c at knot {} is {v}, not positive", k + 1)));
    }
    let mut out = vec![0.0; c.len()];
    let mut next = eps_bar / 2.0 * (1.0 - f64::EPSILON);
    for k in (0..c.len()).rev() {
        let e = if k + 1 == c.len() { next } else { next / 2.0 };
        out[k] = e.min(a * c[k]);
        next = out[k];
    }
    Ok(out)
}

/// Checks the side conditions a schedule must satisfy; returns the first failing knot.
pub fn schedule_violation(eps: &[f64], c: &[f64], a: f64, eps_bar: f64) -> Option<usize> {
    let mut sum = 0.0;
    for (k, (&e, &ck)) in eps.iter().zip(c).enumerate() {
        sum += e;
        if !(e < eps_bar / 2.0) || e > a * ck || sum > 2.0 * e {
            return Some(k + 1);
        }
    }
    None
}

/// Summary of one sample for reports.
#[derive(Debug, Clone, Serialize)]
pub struct SleSummary {
    pub kappa: f64,
    pub seed: u64,
    pub n: usize,
    pub sup_driver: f64,
    pub min_restarted_imag: f64,
}

impl SlePath {
    /// `c_k` for `k = 0..=n`: the restarted minimum over the second cell of each window.
    pub fn window_constants(&self) -> Result<Vec<f64>> {
        constants_of(&self.restarted, self.n)
    }

    pub fn summary(&self) -> Result<SleSummary> {
        let c = self.window_constants()?;
        Ok(SleSummary {
            kappa: self.kappa,
            seed: self.seed,
            n: self.n,
            sup_driver: self.driver.sup_abs_until(1.0),
            min_restarted_imag: c.into_iter().fold(f64::INFINITY, f64::min),
        })
    }
}
