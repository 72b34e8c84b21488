//! File formats: driver and trace CSV with JSON sidecars, polylines, SVG plots.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::{Driver, Interpolation, TimeGrid};
use crate::error::{Error, Result};
use crate::loewner::{Trace, TraceMeta};
use crate::scalar::Real;
use crate::zipper::RawCurve;

/// SHA-256 over the interpolation name and the little-endian `(t, value)` pairs.
pub fn driver_digest<T: Real>(d: &Driver<T>) -> String {
    let mut h = Sha256::new();
    h.update(d.interpolation().as_str().as_bytes());
    for (t, v) in d.grid().times().iter().zip(d.values()) {
        h.update(t.as_f64().to_le_bytes());
        h.update(v.as_f64().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSidecar {
    pub interpolation: Interpolation,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    #[serde(flatten)]
    pub meta: TraceMeta,
    pub t_end: f64,
    /// Largest extrapolation error estimate over the samples.
    pub max_tip_error: f64,
}

/// `foo.csv` -> `foo.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes via a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let res = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = res {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn to_json<S: Serialize>(value: &S) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("serialisable value");
    s.push(b'\n');
    s
}

/// Parses numeric CSV rows; `header` lists the accepted header names, or `None` for bare data.
fn parse_rows<R: Read>(r: R, columns: usize, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut out = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format {
            line: e.position().map(|p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let names: Vec<&str> = rec.iter().collect();
            if names == header {
                continue;
            }
        }
        if rec.len() != columns {
            return Err(Error::Format {
                line: Some(line),
                message: format!("expected {columns} fields, found {}", rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(columns);
        for f in rec.iter() {
            let v: f64 = f.parse().map_err(|_| Error::Format {
                line: Some(line),
                message: format!("not a number: {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Format {
                    line: Some(line),
                    message: format!("non-finite value: {f:?}"),
                });
            }
            vals.push(v);
        }
        out.push((line, vals));
    }
    if out.is_empty() {
        return Err(Error::Format {
            line: None,
            message: "no data rows".into(),
        });
    }
    Ok(out)
}

fn grid_from_rows(rows: &[(usize, Vec<f64>)]) -> Result<TimeGrid<f64>> {
    for w in rows.windows(2) {
        if !(w[1].1[0] > w[0].1[0]) {
            return Err(Error::Format {
                line: Some(w[1].0),
                message: "times must be strictly increasing".into(),
            });
        }
    }
    if rows[0].1[0] != 0.0 {
        return Err(Error::Format {
            line: Some(rows[0].0),
            message: "first time must be 0".into(),
        });
    }
    TimeGrid::new(rows.iter().map(|r| r.1[0]).collect()).map_err(|e| Error::Format {
        line: None,
        message: e.to_string(),
    })
}

pub fn write_driver_csv<T: Real, W: Write>(d: &Driver<T>, mut w: W) -> Result<()> {
    let mut s = String::from("t,value\n");
    for (t, v) in d.grid().times().iter().zip(d.values()) {
        s.push_str(&format!("{},{}\n", t.as_f64(), v.as_f64()));
    }
    w.write_all(s.as_bytes()).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn read_driver_csv<R: Read>(r: R, interpolation: Interpolation) -> Result<Driver<f64>> {
    let rows = parse_rows(r, 2, &["t", "value"])?;
    let grid = grid_from_rows(&rows)?;
    if rows[0].1[1] != 0.0 {
        return Err(Error::Format {
            line: Some(rows[0].0),
            message: "driver must start at 0".into(),
        });
    }
    Driver::new(grid, rows.iter().map(|r| r.1[1]).collect(), interpolation)
}

/// Writes `path` and its sidecar.
pub fn write_driver_files<T: Real>(d: &Driver<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_driver_csv(d, &mut buf)?;
    write_atomic(path, &buf)?;
    let side = DriverSidecar {
        interpolation: d.interpolation(),
        t_end: d.t_end().as_f64(),
    };
    write_atomic(&sidecar_path(path), &to_json(&side))
}

/// Reads a driver CSV together with its sidecar, which must exist.
pub fn read_driver_files(path: &Path) -> Result<Driver<f64>> {
    let side_path = sidecar_path(path);
    let side: DriverSidecar = serde_json::from_slice(&read_file(&side_path)?).map_err(|e| Error::Format {
        line: Some(e.line()),
        message: format!("{}: {e}", side_path.display()),
    })?;
    let d = read_driver_csv(read_file(path)?.as_slice(), side.interpolation)?;
    if (d.t_end() - side.t_end).abs() > d.grid().knot_tol() {
        return Err(Error::Format {
            line: None,
            message: format!("sidecar t_end {} differs from last time {}", side.t_end, d.t_end()),
        });
    }
    Ok(d)
}

pub fn write_trace_csv<T: Real, W: Write>(tr: &Trace<T>, mut w: W) -> Result<()> {
    let mut s = String::from("t,re,im\n");
    for (t, p) in tr.times().iter().zip(tr.points()) {
        s.push_str(&format!("{},{},{}\n", t.as_f64(), p.re.as_f64(), p.im.as_f64()));
    }
    w.write_all(s.as_bytes()).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Trace<f64>> {
    let rows = parse_rows(r, 3, &["t", "re", "im"])?;
    let grid = grid_from_rows(&rows)?;
    if let Some(row) = rows.iter().find(|r| r.1[2] < 0.0) {
        return Err(Error::Format {
            line: Some(row.0),
            message: "trace point below the real line".into(),
        });
    }
    Trace::new(grid, rows.iter().map(|r| Complex::new(r.1[1], r.1[2])).collect())
}

pub fn write_trace_files<T: Real>(tr: &Trace<T>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trace_csv(tr, &mut buf)?;
    write_atomic(path, &buf)?;
    let side = TraceSidecar {
        meta: tr.meta().clone(),
        t_end: tr.grid().t_end().as_f64(),
        max_tip_error: tr.tip_error().iter().fold(0.0f64, |m, e| m.max(e.as_f64())),
    };
    write_atomic(&sidecar_path(path), &to_json(&side))
}

/// Reads a trace CSV; the sidecar is optional and only supplies provenance.
pub fn read_trace_files(path: &Path) -> Result<Trace<f64>> {
    let tr = read_trace_csv(read_file(path)?.as_slice())?;
    let side_path = sidecar_path(path);
    if side_path.exists() {
        let side: TraceSidecar = serde_json::from_slice(&read_file(&side_path)?).map_err(|e| Error::Format {
            line: Some(e.line()),
            message: format!("{}: {e}", side_path.display()),
        })?;
        return Ok(tr.with_meta(side.meta));
    }
    Ok(tr)
}

/// Reads `re,im` rows, or `t,re,im` rows of a trace file.
pub fn read_polyline_csv<R: Read>(mut r: R) -> Result<RawCurve<f64>> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|e| Error::Format {
        line: None,
        message: e.to_string(),
    })?;
    let three = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.split(',').count() == 3);
    let pts: Vec<Complex<f64>> = if three {
        parse_rows(text.as_bytes(), 3, &["t", "re", "im"])?
            .into_iter()
            .map(|(_, v)| Complex::new(v[1], v[2]))
            .collect()
    } else {
        let rows = parse_rows(text.as_bytes(), 2, &["re", "im"])?;
        if let Some(row) = rows.iter().find(|r| r.1[1] < 0.0) {
            return Err(Error::Format {
                line: Some(row.0),
                message: "point below the real line".into(),
            });
        }
        rows.into_iter().map(|(_, v)| Complex::new(v[0], v[1])).collect()
    };
    let mut dedup: Vec<Complex<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        if dedup.last() != Some(&p) {
            dedup.push(p);
        }
    }
    RawCurve::new(dedup, false)
}

pub fn read_polyline_file(path: &Path) -> Result<RawCurve<f64>> {
    read_polyline_csv(read_file(path)?.as_slice())
}

pub fn write_polyline_csv<T: Real, W: Write>(c: &RawCurve<T>, mut w: W) -> Result<()> {
    let mut s = String::from("re,im\n");
    for p in c.points() {
        s.push_str(&format!("{},{}\n", p.re.as_f64(), p.im.as_f64()));
    }
    w.write_all(s.as_bytes()).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<S: Serialize>(value: &S) -> Vec<u8> {
    to_json(value)
}

/// Simple CSV table builder.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: &[S]) {
        self.rows.push(row.iter().map(|c| c.to_string()).collect());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

/// Static SVG overlay of polylines and shaded bands.
pub mod svg {
    use std::fmt::Write;

    pub struct Series {
        pub label: String,
        pub points: Vec<(f64, f64)>,
        pub color: &'static str,
    }

    /// Closed polygon drawn translucent behind the series.
    pub struct Band {
        pub outline: Vec<(f64, f64)>,
        pub color: &'static str,
    }

    /// Vertical bars, e.g. a schedule over cells.
    pub struct Bars {
        pub cells: Vec<(f64, f64, f64)>,
        pub color: &'static str,
    }

    #[derive(Default)]
    pub struct Plot {
        pub title: String,
        pub series: Vec<Series>,
        pub bands: Vec<Band>,
        pub bars: Vec<Bars>,
    }

    pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    impl Plot {
        pub fn new(title: impl Into<String>) -> Self {
            Plot {
                title: title.into(),
                ..Default::default()
            }
        }

        pub fn line(mut self, label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
            let color = PALETTE[self.series.len() % PALETTE.len()];
            self.series.push(Series {
                label: label.into(),
                points,
                color,
            });
            self
        }

        pub fn band(mut self, outline: Vec<(f64, f64)>) -> Self {
            self.bands.push(Band {
                outline,
                color: "#999999",
            });
            self
        }

        pub fn bars(mut self, cells: Vec<(f64, f64, f64)>) -> Self {
            self.bars.push(Bars {
                cells,
                color: "#8c564b",
            });
            self
        }

        pub fn render(&self) -> String {
            let (w, h, m) = (640.0, 480.0, 40.0);
            let all = self
                .series
                .iter()
                .flat_map(|s| s.points.iter().copied())
                .chain(self.bands.iter().flat_map(|b| b.outline.iter().copied()))
                .chain(self.bars.iter().flat_map(|b| b.cells.iter().flat_map(|&(a, c, v)| [(a, 0.0), (c, v)])));
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for (x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            if !x0.is_finite() {
                (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
            }
            let span = ((x1 - x0).max(y1 - y0)).max(1e-12);
            let scale = ((w - 2.0 * m) / span).min((h - 2.0 * m) / span);
            let px = |x: f64| m + (x - x0) * scale;
            let py = |y: f64| h - m - (y - y0) * scale;
            let path = |pts: &[(f64, f64)]| {
                pts.iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let mut s = String::new();
            let _ = writeln!(
                s,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
            );
            let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
            let _ = writeln!(s, r#"<text x="{m}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(&self.title));
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#444" stroke-width="0.5"/>"##,
                px(x0),
                py(y0.max(0.0).min(y1)),
                px(x1),
                py(y0.max(0.0).min(y1))
            );
            for b in &self.bars {
                for &(a, c, v) in &b.cells {
                    let top = py(v.max(0.0));
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5"/>"#,
                        px(a),
                        (px(c) - px(a)).max(0.5),
                        (py(0.0) - top).max(0.0),
                        b.color
                    );
                }
            }
            for b in &self.bands {
                let _ = writeln!(
                    s,
                    r#"<polygon points="{}" fill="{}" fill-opacity="0.25" stroke="none"/>"#,
                    path(&b.outline),
                    b.color
                );
            }
            for (i, ser) in self.series.iter().enumerate() {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
                    path(&ser.points),
                    ser.color
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" fill="{}">{}</text>"#,
                    w - 180.0,
                    40.0 + 16.0 * i as f64,
                    ser.color,
                    escape(&ser.label)
                );
            }
            s.push_str("</svg>\n");
            s
        }
    }

    fn escape(s: &str) -> String {
        s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
    }

    /// Outline of the `eps`-neighbourhood band around a polyline, as a union of segment hulls
    /// approximated by offsetting along the normal.
    pub fn tube(points: &[(f64, f64)], eps: f64) -> Vec<(f64, f64)> {
        let n = points.len();
        if n < 2 {
            return Vec::new();
        }
        let normal = |i: usize| {
            let (a, b) = if i + 1 < n { (points[i], points[i + 1]) } else { (points[i - 1], points[i]) };
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let l = (dx * dx + dy * dy).sqrt().max(1e-300);
            (-dy / l, dx / l)
        };
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for (i, &p) in points.iter().enumerate() {
            let nn = normal(i);
            left.push((p.0 + eps * nn.0, p.1 + eps * nn.1));
            right.push((p.0 - eps * nn.0, p.1 - eps * nn.1));
        }
        right.reverse();
        left.extend(right);
        left
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_round_trip_and_digest() {
        let g = TimeGrid::uniform(4, 1.0).unwrap();
        let d = Driver::new(g, vec![0.0, 0.1, -0.2, 0.3, 1.0 / 3.0], Interpolation::PiecewiseSqrt).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_driver_files(&d, &p).unwrap();
        let back = read_driver_files(&p).unwrap();
        assert_eq!(back, d);
        assert_eq!(driver_digest(&back), driver_digest(&d));
        let other = d.map_values(|_, v| v * 2.0);
        assert_ne!(driver_digest(&other), driver_digest(&d));
    }

    #[test]
    fn malformed_rows_report_lines() {
        let err = read_driver_csv("t,value\n0,0\n0.5,abc\n".as_bytes(), Interpolation::PiecewiseLinear).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(3), .. }), "{err:?}");
        let err = read_driver_csv("t,value\n0,0\n0.5,1,2\n".as_bytes(), Interpolation::PiecewiseLinear).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(3), .. }));
        let err = read_driver_csv("t,value\n0,0\n0.5,1\n0.4,1\n".as_bytes(), Interpolation::PiecewiseLinear).unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(4), .. }));
    }

    #[test]
    fn polyline_formats() {
        let c = read_polyline_csv("re,im\n0,0\n0,1\n0.5,1.5\n".as_bytes()).unwrap();
        assert_eq!(c.points().len(), 3);
        let c = read_polyline_csv("0,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(c.points()[1], Complex::new(0.0, 1.0));
        let c = read_polyline_csv("t,re,im\n0,0,0\n0.25,0,1\n".as_bytes()).unwrap();
        assert_eq!(c.points().len(), 2);
        assert!(read_polyline_csv("0,0\n0,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn trace_round_trip() {
        let g = TimeGrid::uniform(3, 1.0).unwrap();
        let tr = Trace::new(g, vec![Complex::new(0.0, 0.0), Complex::new(0.1, 0.5), Complex::new(0.2, 0.7), Complex::new(0.1, 2.0)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tr.csv");
        write_trace_files(&tr, &p).unwrap();
        let back = read_trace_files(&p).unwrap();
        assert_eq!(back.points(), tr.points());
    }
}
