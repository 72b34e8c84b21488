//! The subcommands.

use std::path::{Path, PathBuf};

use loewner_lab::driver::{Driver, TimeGrid};
use loewner_lab::io::{
    driver_digest, read_driver_files, read_polyline_file, svg::tube, svg::Plot, write_driver_files,
    write_trace_files,
};
use loewner_lab::loewner::{compute_trace, hull_bounds_check, TraceMeta};
use loewner_lab::sle::sample_sle;
use loewner_lab::support::{
    christmas_tree_family, support_probe_with, wong_zakai_experiment, Certifier, CertifyOptions,
    ChristmasTreeConfig, SupportProbeConfig, WongZakaiConfig,
};
use loewner_lab::zipper::{zip_curve_with, ZipOptions};
use loewner_lab::{Error, Trace};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::output::{report, runs_table, trace_xy, xy, OutDir, RunConfig};
use crate::{Common, Experiment, Failure, EXIT_DOMAIN, EXIT_TOLERANCE};

const HULL_TOL: f64 = 1e-9;
const ZIP_TOL: f64 = 1e-3;

pub struct Inputs {
    pub config: Option<PathBuf>,
    pub lam: Option<PathBuf>,
    pub xi: Option<PathBuf>,
}

fn with_digest(tr: Trace<f64>, d: &Driver<f64>) -> Trace<f64> {
    let meta = TraceMeta {
        driver_digest: Some(driver_digest(d)),
        ..tr.meta().clone()
    };
    tr.with_meta(meta)
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, Failure> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Failure::input(format!("--{name} must be positive, got {x}"))),
        _ => Ok(v),
    }
}

pub fn trace(driver: &Path, common: &Common, threads: Option<usize>) -> Result<u8, Failure> {
    let tol = positive("tol", common.tol)?.unwrap_or(HULL_TOL);
    let d = read_driver_files(driver)?;
    let grid = match common.n {
        Some(0) => return Err(Failure::input("--n must be positive")),
        Some(n) => TimeGrid::uniform(n, d.t_end())?,
        None => d.grid().clone(),
    };
    let tr = with_digest(compute_trace(&d, &grid, None)?, &d);
    let hull = hull_bounds_check(&tr, &d, tol);
    let mut out = OutDir::new(&common.out);
    let csv = out.path("trace.csv");
    write_trace_files(&tr, &csv)?;
    out.track(csv);
    out.svg("trace.svg", &Plot::new("trace").line("trace", trace_xy(&tr)))?;
    let run = RunConfig::new("trace", common, vec![driver.to_path_buf()], threads);
    out.json(
        "report.json",
        &report(
            &run,
            &json!({
                "driver_digest": driver_digest(&d),
                "points": tr.len(),
                "tip": [tr.points()[tr.len() - 1].re, tr.points()[tr.len() - 1].im],
                "hull": hull,
            }),
        ),
    )?;
    Ok(if hull.holds { 0 } else { EXIT_TOLERANCE })
}

pub fn zip(curve: &Path, common: &Common, threads: Option<usize>) -> Result<u8, Failure> {
    let tol = positive("tol", common.tol)?.unwrap_or(ZIP_TOL);
    let c = read_polyline_file(curve)?;
    let zr = zip_curve_with(&c, &ZipOptions::default())?;
    let grid = zr.driver.grid().clone();
    let tr = compute_trace(&zr.driver, &grid, None)?;
    let origin = c.points()[0].re;
    let roundtrip = tr
        .points()
        .iter()
        .zip(c.points())
        .fold(0.0f64, |m, (p, q)| m.max((p + origin - q).norm()));
    let mut out = OutDir::new(&common.out);
    let csv = out.path("driver.csv");
    write_driver_files(&zr.driver, &csv)?;
    out.track(csv);
    let steps: Vec<(f64, f64)> = grid.times().iter().zip(zr.driver.values()).map(|(&t, &v)| (t, v)).collect();
    out.svg("driver.svg", &Plot::new("driver").line("driver", steps))?;
    let run = RunConfig::new("zip", common, vec![curve.to_path_buf()], threads);
    let ok = roundtrip <= tol;
    out.json(
        "report.json",
        &report(
            &run,
            &json!({
                "vertices": zr.vertices,
                "hcap": zr.hcap(),
                "origin": origin,
                "driver_digest": driver_digest(&zr.driver),
                "roundtrip_error": roundtrip,
                "roundtrip_tol": tol,
                "roundtrip_ok": ok,
            }),
        ),
    )?;
    Ok(if ok { 0 } else { EXIT_TOLERANCE })
}

pub fn sample(common: &Common, threads: Option<usize>) -> Result<u8, Failure> {
    let kappa = common.kappa.unwrap_or(2.0);
    let seed = common.seed.unwrap_or(0);
    let n = common.n.unwrap_or(256);
    let tol = positive("tol", common.tol)?.unwrap_or(HULL_TOL);
    if n == 0 {
        return Err(Failure::input("--n must be positive"));
    }
    let p = sample_sle(kappa, n, seed, None)?;
    let d = p.driver.truncated(1.0)?;
    let tr = with_digest(p.trace.clone(), &d);
    let hull = hull_bounds_check(&tr, &d, tol);
    let mut out = OutDir::new(&common.out);
    let (dcsv, tcsv) = (out.path("driver.csv"), out.path("trace.csv"));
    write_driver_files(&d, &dcsv)?;
    write_trace_files(&tr, &tcsv)?;
    out.track(dcsv);
    out.track(tcsv);
    out.svg("trace.svg", &Plot::new(format!("SLE({kappa}) seed {seed}")).line("trace", trace_xy(&tr)))?;
    let run = RunConfig::new("sample", common, Vec::new(), threads);
    out.json(
        "report.json",
        &report(&run, &json!({ "summary": p.summary()?, "hull": hull, "driver_digest": driver_digest(&d) })),
    )?;
    Ok(if hull.holds { 0 } else { EXIT_TOLERANCE })
}

fn load_config<C: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<C, Failure> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            serde_json::from_slice(&bytes).map_err(|e| {
                Failure::from(Error::Format {
                    line: Some(e.line()),
                    message: format!("{}: {e}", p.display()),
                })
            })
        }
    }
}

fn driver_or_zero(path: &Option<PathBuf>, cells: usize) -> Result<Driver<f64>, Failure> {
    match path {
        Some(p) => Ok(read_driver_files(p)?),
        None => Ok(Driver::zero(TimeGrid::uniform(cells, 1.0)?)),
    }
}

pub fn experiment(name: Experiment, inputs: &Inputs, common: &Common, threads: Option<usize>) -> Result<u8, Failure> {
    let mut files: Vec<PathBuf> = [&inputs.config, &inputs.lam, &inputs.xi].into_iter().flatten().cloned().collect();
    files.sort();
    let mut run = RunConfig::new("experiment", common, files, threads);
    run.experiment = Some(name);
    let mut out = OutDir::new(&common.out);
    match name {
        Experiment::WongZakai => {
            let mut cfg: WongZakaiConfig = load_config(&inputs.config)?;
            if let Some(k) = common.kappa {
                cfg.kappa = k;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(n) = common.n {
                cfg.n_list.retain(|&m| m < n);
                cfg.n_list.push(n);
                cfg.reference_cells = cfg.reference_cells.max(n);
            }
            let o = wong_zakai_experiment(&cfg)?;
            let mut plot = Plot::new(format!("Wong-Zakai, kappa {}", cfg.kappa)).line("reference", trace_xy(&o.reference));
            for (r, tr) in o.runs.iter().zip(&o.approximations) {
                plot = plot.line(format!("n = {}", r.n), trace_xy(tr));
            }
            out.bytes("runs.csv", &runs_table(&o.report.runs).to_bytes())?;
            out.svg("plot.svg", &plot)?;
            out.json("report.json", &report(&run, &o.report))?;
            Ok(0)
        }
        Experiment::SupportProbe => {
            let mut cfg: SupportProbeConfig = load_config(&inputs.config)?;
            if let Some(k) = common.kappa {
                cfg.kappa = k;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(n) = common.n {
                cfg.n_samples = n;
            }
            if let Some(e) = positive("epsilon", common.epsilon)? {
                cfg.epsilon = e;
            }
            let lam = driver_or_zero(&inputs.lam, cfg.cells)?;
            let o = support_probe_with(&cfg, &lam)?;
            let refp = trace_xy(&o.reference);
            let mut plot = Plot::new(format!("support probe, kappa {}", cfg.kappa))
                .band(tube(&refp, cfg.epsilon))
                .line("reference", refp);
            if let Some(c) = &o.closest {
                plot = plot.line("closest sample", trace_xy(c));
            }
            out.bytes("runs.csv", &runs_table(&o.report.runs).to_bytes())?;
            out.svg("plot.svg", &plot)?;
            out.json("report.json", &report(&run, &o.report))?;
            Ok(0)
        }
        Experiment::ChristmasTree => {
            let mut cfg: ChristmasTreeConfig = load_config(&inputs.config)?;
            if let Some(n) = common.n {
                cfg.ns = vec![n];
            }
            let o = christmas_tree_family(&cfg)?;
            let mut plot = Plot::new("Christmas tree").line("slit", vec![(0.0, 0.0), (0.0, 2.0)]);
            if let Some(c) = o.curves.last() {
                plot = plot.line(format!("n = {}", cfg.ns[cfg.ns.len() - 1]), xy(c.points()));
            }
            out.bytes("runs.csv", &runs_table(&o.report.runs).to_bytes())?;
            out.svg("plot.svg", &plot)?;
            out.json("report.json", &report(&run, &o.report))?;
            Ok(0)
        }
        Experiment::Certify => certify(inputs, common, &run, &mut out),
    }
}

fn certify(inputs: &Inputs, common: &Common, run: &RunConfig, out: &mut OutDir) -> Result<u8, Failure> {
    let mut opts: CertifyOptions = load_config(&inputs.config)?;
    if let Some(s) = positive("tol", common.tol)? {
        opts.slack = s;
    }
    let a = positive("a", common.a)?.unwrap_or(1.0);
    let lam = driver_or_zero(&inputs.lam, common.n.unwrap_or(32))?;
    let xi = match &inputs.xi {
        Some(p) => read_driver_files(p)?,
        None => lam.clone(),
    };
    let cert = match Certifier::new(&lam, a, &opts) {
        Ok(c) => c,
        Err(Error::Refused { reasons }) => {
            out.json("report.json", &report(run, &json!({ "options": opts, "certified": false, "refused": reasons })))?;
            return Ok(EXIT_DOMAIN);
        }
        Err(e) => return Err(e.into()),
    };
    let r = cert.certify(&xi)?;
    let mut table = loewner_lab::io::Table::new(&["k", "t", "c", "eps", "gap", "passed"]);
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for k in &r.knots {
        table.push(&[
            k.k.to_string(),
            k.t.to_string(),
            k.c.to_string(),
            fmt(k.eps),
            fmt(k.gap),
            (k.gap_ok && k.window_gap_ok && k.c_positive).to_string(),
        ]);
    }
    let bars = |f: fn(&loewner_lab::support::KnotRecord) -> Option<f64>| -> Vec<(f64, f64, f64)> {
        r.knots
            .iter()
            .filter_map(|k| f(k).map(|v| (k.t - r.dt, k.t, v)))
            .collect()
    };
    let plot = Plot::new("step bounds and increment gaps")
        .bars(bars(|k| k.eps))
        .line("gap", bars(|k| k.gap).into_iter().map(|(_, t, v)| (t, v)).collect());
    out.bytes("knots.csv", &table.to_bytes())?;
    out.svg("schedule.svg", &plot)?;
    let tr = compute_trace(&xi.held_until(1.0)?.truncated(1.0)?, cert.measure_grid(), None)?;
    let refp = trace_xy(cert.reference_trace());
    out.svg(
        "traces.svg",
        &Plot::new("traces")
            .band(tube(&refp, 3.0 * a))
            .line("reference", refp)
            .line("compared", trace_xy(&tr)),
    )?;
    out.json(
        "report.json",
        &report(run, &json!({ "options": opts, "levels": cert.levels(), "certificate": r })),
    )?;
    Ok(if !r.certified {
        EXIT_DOMAIN
    } else if !r.within_bound {
        EXIT_TOLERANCE
    } else {
        0
    })
}
