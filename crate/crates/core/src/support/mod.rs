//! Closeness certificates and the Monte Carlo experiments around them.

mod certify;
mod experiments;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use certify::{
    certify_closeness, fixed_interval_bound_check, gamma_in_h_check, gamma_in_h_check_with, with_tent,
    CertificateReport, Certifier, CertifyOptions, FixedIntervalReport, GammaInHReport, KnotRecord,
    LevelRecord, ReferenceDriver, Schedule,
};
pub use experiments::{
    christmas_tree, christmas_tree_curve, christmas_tree_family, support_probe, support_probe_with,
    wong_zakai_experiment, ChristmasTreeConfig, ChristmasTreeOutcome, ChristmasTreeRun, ProbeRun,
    SupportProbeConfig, SupportProbeOutcome, Tally, WongZakaiConfig, WongZakaiOutcome, WongZakaiRun,
};

/// Name, configuration, per-run rows, summary and seeds of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: Value,
    pub runs: Vec<Value>,
    pub summary: Value,
    pub seeds: Vec<u64>,
}

impl ExperimentReport {
    pub fn new<C: Serialize, R: Serialize, S: Serialize>(
        name: &str,
        config: &C,
        runs: &[R],
        summary: &S,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        let json = |v: serde_json::Result<Value>| v.map_err(|e| Error::invalid(format!("report encoding: {e}")));
        Ok(ExperimentReport {
            name: name.to_string(),
            config: json(serde_json::to_value(config))?,
            runs: runs
                .iter()
                .map(|r| json(serde_json::to_value(r)))
                .collect::<Result<_>>()?,
            summary: json(serde_json::to_value(summary))?,
            seeds,
        })
    }
}

/// Wilson score interval for `hits` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // Reference: 10 of 100 at z = 1.96 gives (0.0552, 0.1744).
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!((lo - 0.05522).abs() < 1e-4 && (hi - 0.17437).abs() < 1e-4, "{lo} {hi}");
        let (lo, hi) = wilson_interval(0, 50, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn report_echoes_config() {
        let r = ExperimentReport::new("x", &serde_json::json!({"k": 1}), &[1, 2], &"ok", vec![3]).unwrap();
        assert_eq!(r.config["k"], 1);
        assert_eq!(r.runs.len(), 2);
        assert_eq!(r.seeds, vec![3]);
    }
}
