//! Wong–Zakai convergence, support probing and the Christmas-tree curves.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wilson_interval, ExperimentReport};
use crate::driver::{local_holder_norm, sample_brownian_driver, Driver, Interpolation, TimeGrid};
use crate::error::{Error, Result};
use crate::loewner::{compute_trace, hull_bounds_check, Trace};
use crate::metrics::{frechet, hausdorff, strong_distance, sup_distance};
use crate::sle::{split_seed, unit_grid};
use crate::zipper::{truncate_at_capacity, zip_curve_with, RawCurve, ZipOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WongZakaiConfig {
    pub kappa: f64,
    pub seed: u64,
    pub n_list: Vec<usize>,
    /// Cells of the sampled path standing in for the Brownian driver.
    pub reference_cells: usize,
    /// Output cells of every trace.
    pub out_cells: usize,
}

impl Default for WongZakaiConfig {
    fn default() -> Self {
        WongZakaiConfig {
            kappa: 2.0,
            seed: 0,
            n_list: vec![16, 64, 256, 512],
            reference_cells: 4096,
            out_cells: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WongZakaiRun {
    pub n: usize,
    pub sup_distance: f64,
    pub strong_distance: f64,
    /// Local half-Hölder norm of the interpolant at window `1/n`.
    pub holder_norm: f64,
    /// `max slope * sqrt(1/n)` of the interpolant.
    pub slope_bound: f64,
    pub hull_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct WongZakaiSummary {
    first_n: usize,
    last_n: usize,
    first: f64,
    last: f64,
    decreasing: bool,
}

#[derive(Debug, Clone)]
pub struct WongZakaiOutcome {
    pub report: ExperimentReport,
    pub runs: Vec<WongZakaiRun>,
    pub driver: Driver<f64>,
    pub reference: Trace<f64>,
    pub approximations: Vec<Trace<f64>>,
}

impl WongZakaiOutcome {
    /// Largest `n` strictly closer than the smallest `n`.
    pub fn decreasing(&self) -> bool {
        match (self.runs.first(), self.runs.last()) {
            (Some(a), Some(b)) => b.sup_distance < a.sup_distance,
            _ => false,
        }
    }
}

/// Traces of the piecewise-linear interpolants of one Brownian sample against the sample's own trace.
pub fn wong_zakai_experiment(cfg: &WongZakaiConfig) -> Result<WongZakaiOutcome> {
    if cfg.kappa == 8.0 {
        return Err(Error::Domain("kappa = 8 is outside the scope of this experiment".into()));
    }
    if cfg.n_list.is_empty() || cfg.n_list.windows(2).any(|w| w[1] <= w[0]) || cfg.n_list[0] == 0 {
        return Err(Error::invalid("n_list must be nonempty, positive and strictly increasing"));
    }
    if cfg.n_list[cfg.n_list.len() - 1] > cfg.reference_cells || cfg.out_cells == 0 {
        return Err(Error::invalid("every n must be at most reference_cells, and out_cells positive"));
    }
    let driver = sample_brownian_driver(cfg.kappa, cfg.reference_cells, cfg.seed)?;
    let grid = unit_grid(cfg.out_cells, cfg.out_cells)?;
    let reference = compute_trace(&driver, &grid, None)?;
    let results: Vec<(WongZakaiRun, Trace<f64>)> = cfg
        .n_list
        .par_iter()
        .map(|&n| {
            let approx = driver.resampled(unit_grid(n, n)?, Interpolation::PiecewiseLinear);
            let tr = compute_trace(&approx, &grid, None)?;
            let h = 1.0 / n as f64;
            let slope = approx
                .values()
                .windows(2)
                .fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs() / h));
            let run = WongZakaiRun {
                n,
                sup_distance: sup_distance(&tr, &reference)?,
                strong_distance: strong_distance(&tr, &reference).distance,
                holder_norm: local_holder_norm(&approx, h)?,
                slope_bound: slope * h.sqrt(),
                hull_ok: hull_bounds_check(&tr, &approx, 1e-9).holds,
            };
            Ok((run, tr))
        })
        .collect::<Result<_>>()?;
    let (runs, approximations): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let (first, last) = (&runs[0], &runs[runs.len() - 1]);
    let summary = WongZakaiSummary {
        first_n: first.n,
        last_n: last.n,
        first: first.sup_distance,
        last: last.sup_distance,
        decreasing: last.sup_distance < first.sup_distance,
    };
    let report = ExperimentReport::new("wong-zakai", cfg, &runs, &summary, vec![cfg.seed])?;
    Ok(WongZakaiOutcome {
        report,
        runs,
        driver,
        reference,
        approximations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupportProbeConfig {
    pub kappa: f64,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Cells of each sampled driver on `[0, 1]`.
    pub cells: usize,
    /// Normal quantile of the confidence interval.
    pub z: f64,
}

impl Default for SupportProbeConfig {
    fn default() -> Self {
        SupportProbeConfig {
            kappa: 2.0,
            epsilon: 0.5,
            n_samples: 10_000,
            seed: 0,
            cells: 64,
            z: 1.96,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRun {
    pub index: usize,
    pub seed: u64,
    pub sup_distance: f64,
    pub hit: bool,
}

/// Hit counts; merging is associative and commutative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tally {
    pub samples: u64,
    pub hits: u64,
    pub min_distance: f64,
}

impl Tally {
    pub fn empty() -> Self {
        Tally {
            samples: 0,
            hits: 0,
            min_distance: f64::INFINITY,
        }
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            samples: self.samples + other.samples,
            hits: self.hits + other.hits,
            min_distance: self.min_distance.min(other.min_distance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ProbeSummary {
    samples: u64,
    hits: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    min_distance: f64,
    reference_mesh_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SupportProbeOutcome {
    pub report: ExperimentReport,
    pub runs: Vec<ProbeRun>,
    pub tally: Tally,
    pub ci: (f64, f64),
    pub reference: Trace<f64>,
    /// Trace of the closest sample.
    pub closest: Option<Trace<f64>>,
}

/// Counts independent SLE samples whose trace is uniformly within `epsilon` of the trace of `lam`.
pub fn support_probe(kappa: f64, lam: &Driver<f64>, epsilon: f64, n_samples: usize, seed: u64) -> Result<SupportProbeOutcome> {
    support_probe_with(
        &SupportProbeConfig {
            kappa,
            epsilon,
            n_samples,
            seed,
            ..SupportProbeConfig::default()
        },
        lam,
    )
}

pub fn support_probe_with(cfg: &SupportProbeConfig, lam: &Driver<f64>) -> Result<SupportProbeOutcome> {
    if !(cfg.epsilon > 0.0) || cfg.cells == 0 || !(cfg.z > 0.0) {
        return Err(Error::invalid("epsilon, cells and z must be positive"));
    }
    if lam.t_end() < 1.0 - lam.grid().knot_tol() {
        return Err(Error::invalid("reference driver must cover [0, 1]"));
    }
    let grid = unit_grid(cfg.cells, cfg.cells)?;
    let reference = compute_trace(lam, &grid, None)?;
    let runs: Vec<ProbeRun> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let s = split_seed(cfg.seed, i as u64);
            let xi = sample_brownian_driver(cfg.kappa, cfg.cells, s)?;
            let tr = compute_trace(&xi, &grid, None)?;
            let d = sup_distance(&tr, &reference)?;
            Ok(ProbeRun {
                index: i,
                seed: s,
                sup_distance: d,
                hit: d < cfg.epsilon,
            })
        })
        .collect::<Result<_>>()?;
    let tally = runs
        .iter()
        .map(|r| Tally {
            samples: 1,
            hits: r.hit as u64,
            min_distance: r.sup_distance,
        })
        .fold(Tally::empty(), Tally::merge);
    let ci = wilson_interval(tally.hits, tally.samples, cfg.z);
    let closest = match runs.iter().min_by(|a, b| a.sup_distance.total_cmp(&b.sup_distance)) {
        Some(r) => Some(compute_trace(&sample_brownian_driver(cfg.kappa, cfg.cells, r.seed)?, &grid, None)?),
        None => None,
    };
    let summary = ProbeSummary {
        samples: tally.samples,
        hits: tally.hits,
        p_hat: if tally.samples > 0 { tally.hits as f64 / tally.samples as f64 } else { 0.0 },
        ci_low: ci.0,
        ci_high: ci.1,
        min_distance: tally.min_distance,
        reference_mesh_norm: local_holder_norm(lam, lam.grid().max_spacing())?,
    };
    let seeds = runs.iter().map(|r| r.seed).collect();
    let report = ExperimentReport::new("support-probe", cfg, &runs, &summary, seeds)?;
    Ok(SupportProbeOutcome {
        report,
        runs,
        tally,
        ci,
        reference,
        closest,
    })
}

/// Polygon through `0, z_1, w_1, zh_1, wh_1, z_2, ...` for `k = 1..=levels`, with
/// `z_k = -1/n + ik/n`, `w_k = ik/(2n)`, `zh_k = 1/n + ik/n`, `wh_k = i(k + 1/2)/(2n)`.
pub fn christmas_tree_curve(n: usize, levels: usize) -> Result<RawCurve<f64>> {
    if n < 2 || levels == 0 {
        return Err(Error::invalid("need n >= 2 and at least one level"));
    }
    let nf = n as f64;
    let mut pts = vec![Complex::new(0.0, 0.0)];
    for k in 1..=levels {
        let kf = k as f64;
        pts.push(Complex::new(-1.0 / nf, kf / nf));
        pts.push(Complex::new(0.0, kf / (2.0 * nf)));
        pts.push(Complex::new(1.0 / nf, kf / nf));
        pts.push(Complex::new(0.0, (kf + 0.5) / (2.0 * nf)));
    }
    RawCurve::new(pts, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChristmasTreeConfig {
    pub ns: Vec<usize>,
    /// Longest segment after densifying.
    pub max_segment: f64,
    /// Shortest segment next to a vertex, in units of `1/n`.
    pub corner_scale: f64,
    /// Samples of the slit `[0, 2i]` for the set distances.
    pub slit_samples: usize,
    /// Output times (at most) for the trace round trip.
    pub roundtrip_points: usize,
}

impl Default for ChristmasTreeConfig {
    fn default() -> Self {
        ChristmasTreeConfig {
            ns: vec![4, 8, 16, 32, 64],
            max_segment: 1.0 / 16.0,
            corner_scale: 1.0 / 16.0,
            slit_samples: 1024,
            roundtrip_points: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChristmasTreeRun {
    pub n: usize,
    pub levels: usize,
    pub vertices: usize,
    /// Vertices whose capacity increment is below floating-point resolution.
    pub degenerate: usize,
    pub sup_driver: f64,
    /// `sup |U| * sqrt(n)`.
    pub scaled_bound: f64,
    /// Against `2i sqrt(t)` at the vertices' capacity times.
    pub sup_distance: f64,
    pub strong_distance: f64,
    pub hausdorff: f64,
    /// Largest gap between the trace of the zipped driver and the vertices.
    pub roundtrip_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TreeSummary {
    fitted_c: f64,
    loglog_slope: f64,
    min_sup_distance: f64,
    strong_decreasing: bool,
    hausdorff_decreasing: bool,
}

#[derive(Debug, Clone)]
pub struct ChristmasTreeOutcome {
    pub report: ExperimentReport,
    pub runs: Vec<ChristmasTreeRun>,
    pub curves: Vec<RawCurve<f64>>,
    pub drivers: Vec<Driver<f64>>,
    /// Smallest `c` with `sup |U| <= c / sqrt(n)` over all runs.
    pub fitted_c: f64,
    /// Least-squares slope of `ln sup |U|` against `ln n`.
    pub loglog_slope: f64,
}

fn tree_run(n: usize, cfg: &ChristmasTreeConfig) -> Result<(RawCurve<f64>, Driver<f64>, ChristmasTreeRun)> {
    if !(cfg.max_segment > 0.0) || !(cfg.corner_scale > 0.0) || cfg.slit_samples < 2 || cfg.roundtrip_points == 0 {
        return Err(Error::invalid("max_segment, slit_samples and roundtrip_points must be positive"));
    }
    let opts = ZipOptions {
        max_capacity: Some(1.0),
        skip_degenerate: true,
        ..ZipOptions::default()
    };
    let mut levels = 2 * n + 4;
    let (curve, zr) = loop {
        let curve = graded(&christmas_tree_curve(n, levels)?, cfg.max_segment, cfg.corner_scale / n as f64)?;
        let zr = zip_curve_with(&curve, &opts)?;
        if zr.capacity_times[zr.capacity_times.len() - 1] >= 1.0 {
            break (curve, zr);
        }
        if levels > 64 * n {
            return Err(Error::Numerical("tree capacity does not reach 1".into()));
        }
        levels = levels * 3 / 2 + 1;
    };
    let (cut, driver) = truncate_at_capacity(&curve, &zr, 1.0)?;
    let caps = &zr.capacity_times[..cut.points().len()];
    let pts = cut.points();
    let sup_distance = pts
        .iter()
        .zip(caps)
        .fold(0.0f64, |m, (p, &t)| m.max((p - Complex::new(0.0, 2.0 * t.min(1.0).sqrt())).norm()));
    let slit: Vec<Complex<f64>> = (0..cfg.slit_samples)
        .map(|j| Complex::new(0.0, 2.0 * j as f64 / (cfg.slit_samples - 1) as f64))
        .collect();
    let strong_distance = frechet(pts, &slit).distance;
    let hausdorff = hausdorff(pts, &slit);
    // Round trip at a subsample of vertex times inside the driver's range.
    let kept: Vec<usize> = (0..caps.len()).filter(|i| zr.skipped.binary_search(i).is_err()).collect();
    let stride = (kept.len() / cfg.roundtrip_points).max(1);
    let mut idx: Vec<usize> = kept.into_iter().step_by(stride).filter(|&i| caps[i] <= driver.t_end()).collect();
    idx.dedup_by_key(|i| caps[*i].to_bits());
    let grid = TimeGrid::new(idx.iter().map(|&i| caps[i]).collect())?;
    let tr = compute_trace(&driver, &grid, None)?;
    let roundtrip_error = idx
        .iter()
        .zip(tr.points())
        .fold(0.0f64, |m, (&i, p)| m.max((p - pts[i]).norm()));
    let sup_driver = driver.sup_abs();
    let run = ChristmasTreeRun {
        n,
        levels,
        vertices: pts.len(),
        degenerate: zr.skipped.iter().filter(|&&i| i < pts.len()).count(),
        sup_driver,
        scaled_bound: sup_driver * (n as f64).sqrt(),
        sup_distance,
        strong_distance,
        hausdorff,
        roundtrip_error,
    };
    Ok((cut, driver, run))
}

/// The Christmas-tree curve for one `n`, truncated at capacity time 1, with its zipped driver.
pub fn christmas_tree(n: usize) -> Result<(RawCurve<f64>, Driver<f64>, ExperimentReport)> {
    let cfg = ChristmasTreeConfig {
        ns: vec![n],
        ..ChristmasTreeConfig::default()
    };
    let (curve, driver, run) = tree_run(n, &cfg)?;
    let report = ExperimentReport::new("christmas-tree", &cfg, std::slice::from_ref(&run), &run, Vec::new())?;
    Ok((curve, driver, report))
}

pub fn christmas_tree_family(cfg: &ChristmasTreeConfig) -> Result<ChristmasTreeOutcome> {
    if cfg.ns.is_empty() || cfg.ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ns must be nonempty and strictly increasing"));
    }
    let mut runs = Vec::new();
    let mut curves = Vec::new();
    let mut drivers = Vec::new();
    for &n in &cfg.ns {
        let (c, d, r) = tree_run(n, cfg)?;
        curves.push(c);
        drivers.push(d);
        runs.push(r);
    }
    let fitted_c = runs.iter().fold(0.0f64, |m, r| m.max(r.scaled_bound));
    let xs: Vec<f64> = runs.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = runs.iter().map(|r| r.sup_driver.max(f64::MIN_POSITIVE).ln()).collect();
    let loglog_slope = least_squares_slope(&xs, &ys);
    let summary = TreeSummary {
        fitted_c,
        loglog_slope,
        min_sup_distance: runs.iter().fold(f64::INFINITY, |m, r| m.min(r.sup_distance)),
        strong_decreasing: runs.windows(2).all(|w| w[1].strong_distance < w[0].strong_distance),
        hausdorff_decreasing: runs.windows(2).all(|w| w[1].hausdorff < w[0].hausdorff),
    };
    let report = ExperimentReport::new("christmas-tree", cfg, &runs, &summary, Vec::new())?;
    Ok(ChristmasTreeOutcome {
        report,
        runs,
        curves,
        drivers,
        fitted_c,
        loglog_slope,
    })
}

/// Subdivides every edge with points geometrically graded towards both ends,
/// from `min_len` up to `max_len`, and uniform spacing `<= max_len` between.
fn graded(c: &RawCurve<f64>, max_len: f64, min_len: f64) -> Result<RawCurve<f64>> {
    let p = c.points();
    let mut out = vec![p[0]];
    for w in p.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b - a).norm();
        let mut offsets = Vec::new();
        let mut r = min_len;
        while r < len / 2.0 && r < max_len {
            offsets.push(r);
            r *= 2.0;
        }
        let inner = offsets.last().copied().unwrap_or(0.0);
        let span = len - 2.0 * inner;
        let m = (span / max_len).ceil().max(1.0) as usize;
        let mut s: Vec<f64> = offsets.clone();
        s.extend((1..m).map(|j| inner + span * j as f64 / m as f64));
        s.extend(offsets.iter().rev().map(|o| len - o));
        for t in s {
            out.push(a + (b - a) * (t / len));
        }
        out.push(b);
    }
    RawCurve::new(out, c.simple_flag())
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kappa_interpolants_match_the_reference() {
        let cfg = WongZakaiConfig {
            kappa: 0.0,
            n_list: vec![4, 16],
            reference_cells: 64,
            out_cells: 32,
            ..WongZakaiConfig::default()
        };
        let out = wong_zakai_experiment(&cfg).unwrap();
        // Only the extrapolation residual near t = 0 remains.
        assert!(out.runs.iter().all(|r| r.sup_distance < 1e-7), "{:?}", out.runs);
        let bad = WongZakaiConfig { kappa: 8.0, ..cfg.clone() };
        assert!(wong_zakai_experiment(&bad).is_err());
    }

    #[test]
    fn interpolant_norm_is_the_slope_bound() {
        let cfg = WongZakaiConfig {
            n_list: vec![8, 32],
            reference_cells: 256,
            out_cells: 64,
            ..WongZakaiConfig::default()
        };
        let out = wong_zakai_experiment(&cfg).unwrap();
        for r in &out.runs {
            assert!(r.holder_norm <= r.slope_bound * (1.0 + 1e-12), "{r:?}");
            assert!(r.hull_ok);
        }
        let again = wong_zakai_experiment(&cfg).unwrap();
        assert_eq!(out.runs, again.runs);
    }

    #[test]
    fn vacuous_epsilon_hits_every_sample() {
        let lam = Driver::zero(TimeGrid::uniform(16, 1.0).unwrap());
        let out = support_probe_with(
            &SupportProbeConfig {
                epsilon: 100.0,
                n_samples: 20,
                cells: 16,
                ..SupportProbeConfig::default()
            },
            &lam,
        )
        .unwrap();
        assert_eq!(out.tally.hits, 20);
        assert!(out.ci.0 > 0.8);
    }

    #[test]
    fn tally_merge_is_associative() {
        let t = |s, h, m| Tally { samples: s, hits: h, min_distance: m };
        let (a, b, c) = (t(3, 1, 0.4), t(5, 0, 0.9), t(2, 2, 0.1));
        assert_eq!(a.merge(b).merge(c), a.merge(b.merge(c)));
    }

    #[test]
    fn tree_vertices_follow_the_pattern() {
        let c = christmas_tree_curve(4, 2).unwrap();
        let p = c.points();
        assert_eq!(p.len(), 9);
        assert_eq!(p[1], Complex::new(-0.25, 0.25));
        assert_eq!(p[2], Complex::new(0.0, 0.125));
        assert_eq!(p[3], Complex::new(0.25, 0.25));
        assert_eq!(p[4], Complex::new(0.0, 0.1875));
        
    }

    #[test]
    fn small_tree_runs() {
        let (curve, driver, report) = christmas_tree(4).unwrap();
        assert!(curve.points().len() > 10);
        assert!((driver.t_end() - 1.0).abs() < 1e-9);
        assert_eq!(report.runs.len(), 1);
        assert!(report.summary["sup_distance"].as_f64().unwrap() > 0.2);
    }
}
