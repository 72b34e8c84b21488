//! Report assembly and atomic file output.

use std::path::{Path, PathBuf};

use loewner_lab::io::{json_bytes, svg::Plot, write_atomic, Table};
use loewner_lab::Trace;
use num_complex::Complex;
use serde::Serialize;
use serde_json::Value;

use crate::{Common, Experiment, Failure};

/// Everything needed to rerun a command, echoed into its report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub experiment: Option<Experiment>,
    pub version: &'static str,
    #[serde(flatten)]
    pub flags: Common,
    pub inputs: Vec<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(command: &'static str, flags: &Common, inputs: Vec<PathBuf>, threads: Option<usize>) -> Self {
        RunConfig {
            command,
            experiment: None,
            version: env!("CARGO_PKG_VERSION"),
            flags: flags.clone(),
            inputs,
            threads,
        }
    }
}

pub struct OutDir<'a> {
    dir: &'a Path,
    pub written: Vec<PathBuf>,
}

impl<'a> OutDir<'a> {
    pub fn new(dir: &'a Path) -> Self {
        OutDir {
            dir,
            written: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let p = self.path(name);
        write_atomic(&p, bytes)?;
        self.written.push(p);
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), Failure> {
        self.bytes(name, &json_bytes(value))
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> Result<(), Failure> {
        self.bytes(name, plot.render().as_bytes())
    }

    /// Records a file written by a library writer.
    pub fn track(&mut self, p: PathBuf) {
        self.written.push(p);
    }
}

/// Report object: the run config under `run`, then the payload's fields.
pub fn report<S: Serialize>(run: &RunConfig, payload: &S) -> Value {
    let mut v = serde_json::to_value(payload).unwrap_or(Value::Null);
    let run = serde_json::to_value(run).unwrap_or(Value::Null);
    match v {
        Value::Object(ref mut m) => {
            m.insert("run".into(), run);
            v
        }
        other => serde_json::json!({ "run": run, "result": other }),
    }
}

/// CSV with one row per JSON object; columns are the first row's scalar fields.
pub fn runs_table(rows: &[Value]) -> Table {
    let header: Vec<String> = match rows.first() {
        Some(Value::Object(m)) => m
            .iter()
            .filter(|(_, v)| !v.is_object() && !v.is_array())
            .map(|(k, _)| k.clone())
            .collect(),
        _ => Vec::new(),
    };
    let mut t = Table::new(&header);
    for r in rows {
        let cells: Vec<String> = header
            .iter()
            .map(|k| match r.get(k) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Null) | None => String::new(),
                Some(v) => v.to_string(),
            })
            .collect();
        t.push(&cells);
    }
    t
}

pub fn xy(points: &[Complex<f64>]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.re, p.im)).collect()
}

pub fn trace_xy(tr: &Trace<f64>) -> Vec<(f64, f64)> {
    xy(tr.points())
}
