//! Deterministic certificates that two drivers have traces within `3a` on `[0, 1]`.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{
    holder_on, increment_gap, local_holder_norm, phi, sup_gap, DeltaModulus, Driver, Interpolation,
    ModulusConfig, ProbeBox, TimeGrid,
};
use crate::error::{Error, Result};
use crate::loewner::{compute_trace, restarted_trace, swallowed_interval, Trace, INTERVAL_CONSTANT};
use crate::metrics::sup_distance;
use crate::sle::{min_imag_restarted_driver, unit_grid, window_constants, IMAG_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    /// Probe box is the driver range widened by this margin, height the same.
    pub probe_margin: f64,
    pub modulus: ModulusConfig,
    /// Dyadic levels searched for the step, `dt = 2^-level`.
    pub min_level: u32,
    pub max_level: u32,
    /// Relative slack on the `3a` bound when checking soundness.
    pub slack: f64,
    /// Output points per partition cell for the measured distance.
    pub trace_substeps: usize,
    /// Largest local half-Hölder norm at the driver's mesh accepted as class D.
    pub class_d_threshold: f64,
    /// Overrides the default `min(a / 2, c sqrt(dt) / 4)`.
    pub eps_bar: Option<f64>,
    pub interval_constant: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            probe_margin: 1.0,
            modulus: ModulusConfig::default(),
            min_level: 1,
            max_level: 12,
            slack: 1e-2,
            trace_substeps: 2,
            class_d_threshold: 0.25,
            eps_bar: None,
            interval_constant: INTERVAL_CONSTANT,
        }
    }
}

/// One rung of the step search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRecord {
    pub dt: f64,
    pub phi_dt: f64,
    pub phi_2dt: f64,
    pub eps_bar: f64,
    pub admissible: bool,
}

/// The reference driver on `[0, 1]` with its inverse-map modulus.
#[derive(Debug, Clone)]
pub struct ReferenceDriver {
    lam: Driver<f64>,
    modulus: DeltaModulus<f64>,
    mesh_norm: f64,
}

impl ReferenceDriver {
    pub fn new(lam: &Driver<f64>, opts: &CertifyOptions) -> Result<Self> {
        let tol = lam.grid().knot_tol();
        if lam.t_end() < 1.0 - tol {
            return Err(Error::invalid(format!("reference driver ends at {} before 1", lam.t_end())));
        }
        if lam.values()[0] != 0.0 {
            return Err(Error::invalid("reference driver must start at 0"));
        }
        let lam = if lam.t_end() > 1.0 { lam.truncated(1.0)? } else { lam.clone() };
        let mesh_norm = local_holder_norm(&lam, lam.grid().max_spacing())?;
        let probe = ProbeBox::around(&lam, opts.probe_margin)?;
        let modulus = DeltaModulus::new(&lam, probe, &opts.modulus)?;
        Ok(ReferenceDriver { lam, modulus, mesh_norm })
    }

    pub fn driver(&self) -> &Driver<f64> {
        &self.lam
    }

    /// Empirical `delta(eps)` of the inverse maps.
    pub fn delta(&self, eps: f64) -> Result<f64> {
        self.modulus.delta(eps)
    }

    /// Local half-Hölder norm at the mesh of the driver.
    pub fn mesh_norm(&self) -> f64 {
        self.mesh_norm
    }
}

/// Constants `c_k` for `k = 0..=n` and the step schedule `eps_k` for `k = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub c: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Hypothesis flags at one knot. `eps` and `gap` refer to the cell ending at the knot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotRecord {
    pub k: usize,
    pub t: f64,
    pub c: f64,
    pub eps: Option<f64>,
    pub gap: Option<f64>,
    pub c_positive: bool,
    pub eps_positive: bool,
    pub eps_below_half_bar: bool,
    pub eps_below_ac: bool,
    pub partial_sum_ok: bool,
    pub gap_ok: bool,
    /// Increment gap over `[t_k, t_{k+2}]` (capped at 1) within `eps_bar`.
    pub window_gap_ok: bool,
}

impl KnotRecord {
    fn passed(&self) -> bool {
        self.c_positive
            && self.eps_positive
            && self.eps_below_half_bar
            && self.eps_below_ac
            && self.partial_sum_ok
            && self.gap_ok
            && self.window_gap_ok
    }

    fn first_failure(&self) -> Option<&'static str> {
        [
            (self.c_positive, "restarted trace touches the line"),
            (self.eps_positive, "step bound vanished"),
            (self.eps_below_half_bar, "step bound not below eps_bar / 2"),
            (self.eps_below_ac, "step bound above a c_k"),
            (self.partial_sum_ok, "partial sum above 2 eps_k"),
            (self.gap_ok, "increment gap above eps_k"),
            (self.window_gap_ok, "window gap above eps_bar"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, why)| why)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    /// Gap floor set by the rounding of the driver values.
    pub resolution: f64,
    pub a: f64,
    pub eps_bar: f64,
    pub dt: f64,
    pub partition: Vec<f64>,
    pub delta_a: f64,
    pub phi_dt: f64,
    pub phi_2dt: f64,
    pub phi_dt_ok: bool,
    pub phi_2dt_ok: bool,
    pub eps_bar_ok: bool,
    pub xi_starts_at_zero: bool,
    pub knots: Vec<KnotRecord>,
    pub certified: bool,
    /// First failing hypothesis, if any.
    pub failure: Option<String>,
    pub bound: f64,
    pub slack: f64,
    pub measured_sup: f64,
    /// `measured_sup <= bound (1 + slack)`.
    pub within_bound: bool,
}

/// Certification context for one reference driver and one `a`.
#[derive(Debug, Clone)]
pub struct Certifier {
    reference: ReferenceDriver,
    a: f64,
    opts: CertifyOptions,
    dt: f64,
    n: usize,
    eps_bar: f64,
    delta_a: f64,
    phi_dt: f64,
    phi_2dt: f64,
    levels: Vec<LevelRecord>,
    measure_grid: TimeGrid<f64>,
    lam_trace: Trace<f64>,
}

impl Certifier {
    /// Picks the largest dyadic `dt` with `phi(dt) < a` and `phi(2 dt) + 5 eps_bar <= delta(a)`.
    pub fn new(lam: &Driver<f64>, a: f64, opts: &CertifyOptions) -> Result<Self> {
        let reference = ReferenceDriver::new(lam, opts)?;
        Self::with_reference(reference, a, opts)
    }

    pub fn with_reference(reference: ReferenceDriver, a: f64, opts: &CertifyOptions) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid(format!("a must be positive, got {a}")));
        }
        if opts.min_level == 0 || opts.min_level > opts.max_level || opts.max_level > 30 {
            return Err(Error::invalid("levels must satisfy 1 <= min_level <= max_level <= 30"));
        }
        if opts.trace_substeps == 0 || !(opts.slack >= 0.0) || !(opts.interval_constant > 0.0) {
            return Err(Error::invalid("trace_substeps, slack and interval_constant must be positive"));
        }
        if reference.mesh_norm >= opts.class_d_threshold {
            return Err(Error::Refused {
                reasons: vec![format!(
                    "reference driver fails the class-D diagnostic: local half-Hölder norm {} at its mesh is not below {}",
                    reference.mesh_norm, opts.class_d_threshold
                )],
            });
        }
        let lam = reference.driver();
        let delta_a = reference.delta(a)?;
        let mut levels = Vec::new();
        let mut chosen = None;
        for level in opts.min_level..=opts.max_level {
            let dt = 0.5f64.powi(level as i32);
            let phi_dt = phi(dt, lam)?;
            let phi_2dt = phi(2.0 * dt, lam)?;
            let eps_bar = opts
                .eps_bar
                .unwrap_or_else(|| (a / 2.0).min(opts.interval_constant * dt.sqrt() / 4.0));
            let admissible =
                phi_dt < a && phi_2dt + 5.0 * eps_bar <= delta_a && eps_bar > 0.0 && eps_bar < a;
            levels.push(LevelRecord {
                dt,
                phi_dt,
                phi_2dt,
                eps_bar,
                admissible,
            });
            if admissible {
                chosen = Some((level, dt, eps_bar, phi_dt, phi_2dt));
                break;
            }
        }
        let Some((level, dt, eps_bar, phi_dt, phi_2dt)) = chosen else {
            let last = levels[levels.len() - 1];
            return Err(Error::Refused {
                reasons: vec![format!(
                    "no admissible step down to dt = {}: delta(a) = {delta_a}, phi(2 dt) + 5 eps_bar = {}",
                    last.dt,
                    last.phi_2dt + 5.0 * last.eps_bar
                )],
            });
        };
        let n = 1usize << level;
        let m = n * opts.trace_substeps;
        let measure_grid = unit_grid(m, m)?;
        let lam_trace = compute_trace(lam, &measure_grid, None)?;
        Ok(Certifier {
            reference,
            a,
            opts: opts.clone(),
            dt,
            n,
            eps_bar,
            delta_a,
            phi_dt,
            phi_2dt,
            levels,
            measure_grid,
            lam_trace,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn eps_bar(&self) -> f64 {
        self.eps_bar
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn levels(&self) -> &[LevelRecord] {
        &self.levels
    }

    pub fn reference(&self) -> &ReferenceDriver {
        &self.reference
    }

    pub fn reference_trace(&self) -> &Trace<f64> {
        &self.lam_trace
    }

    pub fn measure_grid(&self) -> &TimeGrid<f64> {
        &self.measure_grid
    }

    fn knot(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// `xi` on `[0, 1 + 2 dt]`, holding its last value past its end.
    pub fn extend(&self, xi: &Driver<f64>) -> Result<Driver<f64>> {
        if xi.t_end() < 1.0 - xi.grid().knot_tol() {
            return Err(Error::invalid(format!("driver ends at {} before 1", xi.t_end())));
        }
        let knots: Vec<f64> = (1..=self.n).map(|k| self.knot(k)).filter(|&t| t < xi.t_end()).collect();
        xi.refined(&knots)?.held_until(self.knot(self.n + 2))
    }

    /// The backward schedule built from the restarted traces of `xi`.
    pub fn schedule(&self, xi: &Driver<f64>) -> Result<Schedule> {
        let xi = self.extend(xi)?;
        let c = window_constants(&xi, self.n, 0..=self.n)?;
        let eps = schedule_from(&c[1..], self.a, self.eps_bar);
        Ok(Schedule { c, eps })
    }

    pub fn certify(&self, xi: &Driver<f64>) -> Result<CertificateReport> {
        let schedule = self.schedule(xi)?;
        self.evaluate(xi, &schedule)
    }

    /// Checks `xi` against a given schedule.
    pub fn evaluate(&self, xi: &Driver<f64>, schedule: &Schedule) -> Result<CertificateReport> {
        if schedule.c.len() != self.n + 1 || schedule.eps.len() != self.n {
            return Err(Error::invalid(format!(
                "schedule has {} constants and {} steps, expected {} and {}",
                schedule.c.len(),
                schedule.eps.len(),
                self.n + 1,
                self.n
            )));
        }
        let xi = self.extend(xi)?;
        let lam = self.reference.driver();
        // Gaps at or below the rounding level of the stored values are not measurable.
        let resolution = 16.0 * f64::EPSILON * xi.sup_abs().max(lam.sup_abs());
        let mut knots = Vec::with_capacity(self.n + 1);
        let mut sum = 0.0;
        for k in 0..=self.n {
            let t = self.knot(k);
            let c = schedule.c[k];
            let mut rec = KnotRecord {
                k,
                t,
                c,
                eps: None,
                gap: None,
                c_positive: c > 0.0,
                eps_positive: true,
                eps_below_half_bar: true,
                eps_below_ac: true,
                partial_sum_ok: true,
                gap_ok: true,
                window_gap_ok: true,
            };
            if k >= 1 {
                let e = schedule.eps[k - 1];
                let gap = increment_gap(&xi, lam, self.knot(k - 1), t);
                sum += e;
                rec.eps = Some(e);
                rec.gap = Some(gap);
                rec.eps_positive = e > 0.0;
                rec.eps_below_half_bar = e < self.eps_bar / 2.0;
                rec.eps_below_ac = e <= self.a * c;
                rec.partial_sum_ok = sum <= 2.0 * e;
                rec.gap_ok = gap <= e.max(resolution);
            }
            if k < self.n {
                let hi = self.knot(k + 2).min(1.0);
                rec.window_gap_ok = increment_gap(&xi, lam, t, hi) <= self.eps_bar;
            }
            knots.push(rec);
        }
        let phi_dt_ok = self.phi_dt < self.a;
        let phi_2dt_ok = self.phi_2dt + 5.0 * self.eps_bar <= self.delta_a;
        let eps_bar_ok = self.eps_bar > 0.0 && self.eps_bar < self.a;
        let xi_starts_at_zero = xi.values()[0] == 0.0;
        let global = [
            (phi_dt_ok, "phi(dt) not below a".to_string()),
            (phi_2dt_ok, "phi(2 dt) + 5 eps_bar above delta(a)".to_string()),
            (eps_bar_ok, "eps_bar outside (0, a)".to_string()),
            (xi_starts_at_zero, "driver does not start at 0".to_string()),
        ];
        let failure = global
            .iter()
            .find(|(ok, _)| !ok)
            .map(|(_, why)| why.clone())
            .or_else(|| {
                knots
                    .iter()
                    .find_map(|r| r.first_failure().map(|why| format!("knot {}: {why}", r.k)))
            });
        let certified = failure.is_none() && knots.iter().all(KnotRecord::passed);
        let xi_trace = compute_trace(&xi, &self.measure_grid, None)?;
        let measured_sup = sup_distance(&xi_trace, &self.lam_trace)?;
        let bound = 3.0 * self.a;
        Ok(CertificateReport {
            resolution,
            a: self.a,
            eps_bar: self.eps_bar,
            dt: self.dt,
            partition: (0..=self.n).map(|k| self.knot(k)).collect(),
            delta_a: self.delta_a,
            phi_dt: self.phi_dt,
            phi_2dt: self.phi_2dt,
            phi_dt_ok,
            phi_2dt_ok,
            eps_bar_ok,
            xi_starts_at_zero,
            knots,
            certified,
            failure,
            bound,
            slack: self.opts.slack,
            measured_sup,
            within_bound: measured_sup <= bound * (1.0 + self.opts.slack),
        })
    }

    /// Builds `xi = lam + p` backwards in time, cell by cell: the step bound of a cell
    /// is fixed by the later increments before the cell's own increments are drawn,
    /// which stay within `fraction` of it at `substeps` points per cell.
    pub fn construct_admissible<R: Rng>(
        &self,
        rng: &mut R,
        fraction: f64,
        substeps: usize,
    ) -> Result<(Driver<f64>, Schedule)> {
        if !(fraction > 0.0 && fraction <= 1.0) || substeps == 0 {
            return Err(Error::invalid("fraction must lie in (0, 1] and substeps be positive"));
        }
        let lam = self.reference.driver();
        if lam.interpolation() != Interpolation::PiecewiseLinear {
            return Err(Error::invalid("construction needs a piecewise-linear reference driver"));
        }
        let sub: Vec<f64> = (0..=self.n * substeps)
            .map(|j| j as f64 / (self.n * substeps) as f64)
            .collect();
        let grid = lam.grid().merged(&sub, 1.0)?;
        let times = grid.times().to_vec();
        // Perturbation increments within each cell, at the sub-knots of that cell.
        let cell_of = |t: f64| -> usize { ((t * self.n as f64).ceil() as usize).clamp(1, self.n) };
        let mut offsets: Vec<Vec<f64>> = vec![Vec::new(); self.n + 1];
        let mut c = vec![0.0; self.n + 1];
        let mut eps = vec![0.0; self.n];
        let build = |offsets: &[Vec<f64>]| -> Result<Driver<f64>> {
            let mut p = vec![0.0; times.len()];
            let mut base = 0.0;
            let mut cell = 1;
            let mut idx = 0;
            for (i, &t) in times.iter().enumerate() {
                if i == 0 {
                    continue;
                }
                let k = cell_of(t);
                if k != cell {
                    base = p[i - 1];
                    cell = k;
                    idx = 0;
                }
                let rel = offsets[k].get(idx).copied().unwrap_or(0.0);
                // Sub-knots carry drawn offsets; other knots interpolate linearly.
                p[i] = base + rel;
                idx += 1;
            }
            let values = times.iter().zip(&p).map(|(&t, &q)| lam.eval(t) + q).collect();
            let d = Driver::new(grid.clone(), values, Interpolation::PiecewiseLinear)?;
            d.held_until(self.knot(self.n + 2))
        };
        for k in (0..=self.n).rev() {
            let partial = build(&offsets)?;
            c[k] = window_constants(&partial, self.n, [k])?[0];
            if k == 0 {
                break;
            }
            let e = if k == self.n {
                self.eps_bar / 2.0 * (1.0 - f64::EPSILON)
            } else {
                eps[k] / 2.0
            };
            eps[k - 1] = e.min(self.a * c[k]);
            let (lo, hi) = (self.knot(k - 1), self.knot(k));
            let in_cell: Vec<f64> = times.iter().copied().filter(|&t| t > lo && t <= hi).collect();
            let drawn: Vec<f64> = in_cell
                .iter()
                .map(|_| fraction * eps[k - 1] * rng.random_range(-1.0..=1.0))
                .collect();
            // Interpolate between drawn sub-knot values so the perturbation stays linear.
            offsets[k] = smooth_offsets(&in_cell, &drawn, lo, hi, substeps);
        }
        let xi = build(&offsets)?;
        Ok((xi, Schedule { c, eps }))
    }
}

/// Offsets at `ts` (all in `(lo, hi]`): drawn values at the sub-knots, linear in between.
fn smooth_offsets(ts: &[f64], drawn: &[f64], lo: f64, hi: f64, substeps: usize) -> Vec<f64> {
    let h = (hi - lo) / substeps as f64;
    let on_sub = |t: f64| {
        let r = (t - lo) / h;
        (r - r.round()).abs() < 1e-9
    };
    let anchors: Vec<(f64, f64)> = std::iter::once((lo, 0.0))
        .chain(ts.iter().zip(drawn).filter(|(t, _)| on_sub(**t)).map(|(&t, &v)| (t, v)))
        .collect();
    ts.iter()
        .map(|&t| {
            let j = anchors.partition_point(|a| a.0 < t).clamp(1, anchors.len() - 1);
            let (t0, v0) = anchors[j - 1];
            let (t1, v1) = anchors[j];
            if t >= t1 {
                v1
            } else {
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        })
        .collect()
}

/// The backward recursion without the positivity check; zeros propagate.
pub(crate) fn schedule_from(c: &[f64], a: f64, eps_bar: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    let mut next = eps_bar / 2.0 * (1.0 - f64::EPSILON);
    for k in (0..c.len()).rev() {
        let e = if k + 1 == c.len() { next } else { next / 2.0 };
        out[k] = e.min(a * c[k].max(0.0));
        next = out[k];
    }
    out
}

/// `d` plus a tent of the given height on `[t_lo, t_hi]`, peaking at the midpoint.
pub fn with_tent(d: &Driver<f64>, t_lo: f64, t_hi: f64, height: f64) -> Result<Driver<f64>> {
    if !(t_lo < t_hi) || t_lo < 0.0 || t_hi > d.t_end() + d.grid().knot_tol() {
        return Err(Error::OutOfRange(format!("tent [{t_lo}, {t_hi}] outside the driver")));
    }
    let mid = 0.5 * (t_lo + t_hi);
    let r = d.refined(&[t_lo, mid, t_hi])?;
    let tent = |t: f64| {
        if t <= t_lo || t >= t_hi {
            0.0
        } else if t <= mid {
            height * (t - t_lo) / (mid - t_lo)
        } else {
            height * (t_hi - t) / (t_hi - mid)
        }
    };
    let values = r.grid().times().iter().zip(r.values()).map(|(&t, &v)| v + tent(t)).collect();
    Driver::new(r.grid().clone(), values, r.interpolation())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaInHReport {
    pub dt: f64,
    pub eps_bar: f64,
    pub interval_constant: f64,
    /// `c sqrt(dt)`.
    pub reach: f64,
    pub lambda_holder: f64,
    pub max_abs_re: f64,
    pub interval_left: f64,
    pub interval_right: f64,
    pub re_ok: bool,
    pub interval_ok: bool,
    /// Minimum of `Im` of the trace of `xi` over `[dt, 2 dt]`, floored.
    pub min_imag: f64,
    pub holds: bool,
}

/// Checks that the trace restarted at `dt` stays within `c sqrt(dt)` of the axis and
/// that the interval `[-c sqrt(dt), c sqrt(dt)]` is swallowed by time `dt`.
pub fn gamma_in_h_check(xi: &Driver<f64>, lam: &Driver<f64>, dt: f64, eps_bar: f64) -> Result<GammaInHReport> {
    gamma_in_h_check_with(xi, lam, dt, eps_bar, INTERVAL_CONSTANT)
}

pub fn gamma_in_h_check_with(
    xi: &Driver<f64>,
    lam: &Driver<f64>,
    dt: f64,
    eps_bar: f64,
    c: f64,
) -> Result<GammaInHReport> {
    if !(dt > 0.0) || !(eps_bar > 0.0) || !(c > 0.0) {
        return Err(Error::invalid("dt, eps_bar and the interval constant must be positive"));
    }
    let end = xi.t_end().min(lam.t_end());
    if 2.0 * dt > end + xi.grid().knot_tol() {
        return Err(Error::OutOfRange(format!("window [0, {}] beyond the drivers' end {end}", 2.0 * dt)));
    }
    let reach = c * dt.sqrt();
    let lambda_holder = holder_on(lam, dt, 2.0 * dt)?;
    let mut reasons = Vec::new();
    if eps_bar > reach / 4.0 {
        reasons.push(format!("eps_bar {eps_bar} above c sqrt(dt) / 4 = {}", reach / 4.0));
    }
    if !(lambda_holder < c / 2.0) {
        reasons.push(format!(
            "half-Hölder constant {lambda_holder} of the reference on [dt, 2 dt] not below c / 2 = {}",
            c / 2.0
        ));
    }
    let g0 = sup_gap(xi, lam, 0.0, dt);
    if g0 > eps_bar {
        reasons.push(format!("gap {g0} on [0, dt] above eps_bar"));
    }
    let g1 = increment_gap(xi, lam, dt, 2.0 * dt);
    if g1 > eps_bar {
        reasons.push(format!("increment gap {g1} on [dt, 2 dt] above eps_bar"));
    }
    if !reasons.is_empty() {
        return Err(Error::Refused { reasons });
    }
    const POINTS: usize = 32;
    let local = TimeGrid::uniform(POINTS, dt)?;
    let rt = restarted_trace(xi, dt, &local)?;
    let max_abs_re = rt.points().iter().fold(0.0f64, |m, p| m.max(p.re.abs()));
    let si = swallowed_interval(xi, dt, reach * 1e-3)?;
    let min_imag = min_imag_restarted_driver(xi, 0.0, dt, 2.0 * dt, 2 * POINTS + 1)?;
    let re_ok = max_abs_re <= reach;
    let interval_ok = si.contains(-reach, reach);
    Ok(GammaInHReport {
        dt,
        eps_bar,
        interval_constant: c,
        reach,
        lambda_holder,
        max_abs_re,
        interval_left: si.interval_left,
        interval_right: si.interval_right,
        re_ok,
        interval_ok,
        min_imag,
        holds: re_ok && interval_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedIntervalReport {
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub a: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub gap0: f64,
    pub gap1: f64,
    pub delta_a: f64,
    pub phi_2dt: f64,
    /// Minimum of `Im` of the trace restarted at `t0`, over `[t1, t2]`.
    pub c: f64,
    /// `a + eps0 / c`.
    pub bound: f64,
    pub measured: f64,
    pub slack: f64,
    pub holds: bool,
}

impl ReferenceDriver {
    /// Checks `|gamma_xi(t) - gamma_lam(t)| <= a + eps0 / c` at grid times in `[t1, t2]`
    /// once the gap, step and modulus hypotheses are verified.
    #[allow(clippy::too_many_arguments)]
    pub fn fixed_interval_bound(
        &self,
        xi: &Driver<f64>,
        t0: f64,
        t1: f64,
        t2: f64,
        a: f64,
        eps0: f64,
        eps1: f64,
        slack: f64,
    ) -> Result<FixedIntervalReport> {
        let lam = &self.lam;
        if !(0.0 <= t0 && t0 < t1 && t1 < t2 && t2 <= 1.0) {
            return Err(Error::invalid(format!("need 0 <= t0 < t1 < t2 <= 1, got {t0}, {t1}, {t2}")));
        }
        if !(a > 0.0 && eps0 > 0.0 && eps1 > 0.0 && slack >= 0.0) {
            return Err(Error::invalid("a, eps0 and eps1 must be positive"));
        }
        if xi.t_end() < t2 - xi.grid().knot_tol() {
            return Err(Error::OutOfRange(format!("driver ends before {t2}")));
        }
        let dt = (t1 - t0).max(t2 - t1);
        let eps_bar = eps0.max(eps1);
        let gap0 = if t0 > 0.0 {
            sup_gap(xi, lam, 0.0, t0)
        } else {
            (xi.eval(0.0) - lam.eval(0.0)).abs()
        };
        let gap1 = increment_gap(xi, lam, t0, t2);
        let delta_a = self.delta(a)?;
        let phi_2dt = phi(2.0 * dt, lam)?;
        let c = min_imag_restarted_driver(xi, t0, t1, t2, 65)?;
        let mut reasons = Vec::new();
        if gap0 > eps0 {
            reasons.push(format!("gap {gap0} on [0, t0] above eps0"));
        }
        if gap1 > eps1 {
            reasons.push(format!("increment gap {gap1} on [t0, t2] above eps1"));
        }
        if phi_2dt + 5.0 * eps_bar > delta_a {
            reasons.push(format!(
                "phi(2 dt) + 5 eps_bar = {} above delta(a) = {delta_a}",
                phi_2dt + 5.0 * eps_bar
            ));
        }
        if !(c > 0.0) {
            reasons.push(format!("restarted trace reaches within {IMAG_FLOOR} of the line"));
        }
        if !reasons.is_empty() {
            return Err(Error::Refused { reasons });
        }
        const POINTS: usize = 32;
        let mut times: Vec<f64> = vec![0.0];
        times.extend((0..=POINTS).map(|j| t1 + (t2 - t1) * j as f64 / POINTS as f64));
        let grid = TimeGrid::new(times)?;
        let tx = compute_trace(xi, &grid, None)?;
        let tl = compute_trace(lam, &grid, None)?;
        let measured = tx.points()[1..]
            .iter()
            .zip(&tl.points()[1..])
            .fold(0.0f64, |m, (p, q): (&Complex<f64>, &Complex<f64>)| m.max((p - q).norm()));
        let bound = a + eps0 / c;
        Ok(FixedIntervalReport {
            t0,
            t1,
            t2,
            a,
            eps0,
            eps1,
            gap0,
            gap1,
            delta_a,
            phi_2dt,
            c,
            bound,
            measured,
            slack,
            holds: measured <= bound * (1.0 + slack),
        })
    }
}

/// One-shot certificate with default options.
pub fn certify_closeness(xi: &Driver<f64>, lam: &Driver<f64>, a: f64) -> Result<CertificateReport> {
    Certifier::new(lam, a, &CertifyOptions::default())?.certify(xi)
}

/// One-shot fixed-interval check with default options.
#[allow(clippy::too_many_arguments)]
pub fn fixed_interval_bound_check(
    xi: &Driver<f64>,
    lam: &Driver<f64>,
    t0: f64,
    t1: f64,
    t2: f64,
    a: f64,
    eps0: f64,
    eps1: f64,
) -> Result<FixedIntervalReport> {
    let opts = CertifyOptions::default();
    ReferenceDriver::new(lam, &opts)?.fixed_interval_bound(xi, t0, t1, t2, a, eps0, eps1, opts.slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::rng_for;

    fn small_opts() -> CertifyOptions {
        CertifyOptions {
            modulus: ModulusConfig {
                nx: 32,
                ny: 32,
                time_stride: 1,
            },
            ..CertifyOptions::default()
        }
    }

    fn zero(n: usize) -> Driver<f64> {
        Driver::zero(TimeGrid::uniform(n, 1.0).unwrap())
    }

    fn gentle(n: usize) -> Driver<f64> {
        Driver::from_fn(TimeGrid::uniform(n, 1.0).unwrap(), Interpolation::PiecewiseLinear, |t: f64| {
            0.2 * (2.0 * t).sin()
        })
    }

    #[test]
    fn identical_zero_drivers_are_certified() {
        let lam = zero(16);
        let cert = Certifier::new(&lam, 1.0, &small_opts()).unwrap();
        let r = cert.certify(&lam).unwrap();
        assert!(r.certified, "{:?}", r.failure);
        assert!(r.knots[1..].iter().all(|k| k.gap == Some(0.0)));
        assert!(r.measured_sup < 1e-12);
        assert!(r.within_bound);
    }

    #[test]
    fn constructed_perturbation_is_certified() {
        let lam = gentle(32);
        let cert = Certifier::new(&lam, 1.0, &small_opts()).unwrap();
        let mut rng = rng_for(5, 0);
        let (xi, sched) = cert.construct_admissible(&mut rng, 0.5, 4).unwrap();
        let r = cert.certify(&xi).unwrap();
        assert!(r.certified, "{:?}", r.failure);
        assert!(r.within_bound);
        let again = cert.schedule(&xi).unwrap();
        for (x, y) in again.eps.iter().zip(&sched.eps) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
        }
        assert!(xi != lam);
    }

    #[test]
    fn violating_cell_is_flagged() {
        let lam = gentle(32);
        let cert = Certifier::new(&lam, 1.0, &small_opts()).unwrap();
        let mut rng = rng_for(6, 0);
        let (xi, sched) = cert.construct_admissible(&mut rng, 0.5, 4).unwrap();
        let k = cert.cells() - 1;
        let (lo, hi) = (cert.knot(k - 1), cert.knot(k));
        let bad = with_tent(&xi, lo, hi, 2.0 * sched.eps[k - 1]).unwrap();
        let r = cert.certify(&bad).unwrap();
        assert!(!r.certified);
        assert!(!r.knots[k].gap_ok);
        assert!(r.failure.unwrap().starts_with(&format!("knot {k}")) || !r.knots[k].gap_ok);
    }

    #[test]
    fn rough_reference_is_refused() {
        let lam = crate::driver::sample_brownian_driver(2.0f64, 64, 1).unwrap();
        assert!(matches!(Certifier::new(&lam, 1.0, &small_opts()), Err(Error::Refused { .. })));
    }

    #[test]
    fn tiny_a_is_refused() {
        let lam = zero(16);
        let opts = CertifyOptions {
            max_level: 6,
            ..small_opts()
        };
        assert!(matches!(Certifier::new(&lam, 0.05, &opts), Err(Error::Refused { .. })));
    }

    #[test]
    fn tent_has_requested_height() {
        let d = zero(4);
        let t = with_tent(&d, 0.25, 0.5, 0.3).unwrap();
        assert!((t.eval(0.375) - 0.3).abs() < 1e-15);
        assert_eq!(t.eval(0.5), 0.0);
        assert_eq!(increment_gap(&t, &d, 0.25, 0.5), 0.3);
    }

    #[test]
    fn gamma_in_h_for_equal_drivers() {
        let lam = zero(64);
        let dt = 1.0 / 64.0;
        let c = INTERVAL_CONSTANT;
        let r = gamma_in_h_check(&lam, &lam, dt, c * dt.sqrt() / 4.0).unwrap();
        assert!(r.holds);
        assert!(r.max_abs_re < 1e-12);
        assert!(r.interval_right > 1.9 * dt.sqrt());
        assert!(r.min_imag > 0.0);
        let err = gamma_in_h_check(&lam, &lam, dt, c * dt.sqrt()).unwrap_err();
        assert!(matches!(err, Error::Refused { .. }));
    }

    #[test]
    fn fixed_interval_bound_for_equal_and_far_drivers() {
        let lam = gentle(32);
        let opts = small_opts();
        let reference = ReferenceDriver::new(&lam, &opts).unwrap();
        let r = reference
            .fixed_interval_bound(&lam, 0.25, 0.25 + 1.0 / 128.0, 0.25 + 2.0 / 128.0, 1.0, 1e-4, 1e-4, 1e-2)
            .unwrap();
        assert!(r.holds);
        assert!(r.measured < 1e-12);
        let far = lam.map_values(|t, v| v + 0.5 * t);
        assert!(matches!(
            reference.fixed_interval_bound(&far, 0.25, 0.26, 0.27, 1.0, 1e-4, 1e-4, 1e-2),
            Err(Error::Refused { .. })
        ));
    }
}
