//! Side-by-side timing of the threshold baseline and the anomaly pipeline.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use super::{clean_corpus, threshold_clean, CleanReport, RunConfig, ThresholdRuleSet};
use crate::anomaly::DetectorConfig;
use crate::error::Result;
use crate::features::{FeatureConfig, Resources};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteRun {
    pub method: String,
    pub seconds: f64,
    pub phases: Vec<(String, f64)>,
    pub docs_total: u64,
    pub docs_kept: u64,
    pub retained_pct: f64,
    /// Process peak resident set after this route, when the platform reports it.
    pub peak_rss_kib: Option<u64>,
}

impl RouteRun {
    fn from_report(method: &str, seconds: f64, r: &CleanReport) -> Self {
        let t = r.total();
        RouteRun {
            method: method.into(),
            seconds,
            phases: r.timings.clone(),
            docs_total: t.docs.total(),
            docs_kept: t.docs.keep,
            retained_pct: 100.0 * r.retained_fraction(),
            peak_rss_kib: peak_rss_kib(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub threshold: RouteRun,
    pub anomaly: RouteRun,
}

impl BenchReport {
    /// Anomaly wall time over threshold wall time.
    pub fn overhead_ratio(&self) -> f64 {
        self.anomaly.seconds / self.threshold.seconds
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tseconds\tdocs_total\tdocs_kept\tretained_pct\tpeak_rss_kib\tphases\n");
        for r in [&self.threshold, &self.anomaly] {
            let phases: Vec<String> = r.phases.iter().map(|(p, s)| format!("{p}={s:.3}")).collect();
            let _ = writeln!(
                out,
                "{}\t{:.3}\t{}\t{}\t{:.2}\t{}\t{}",
                r.method,
                r.seconds,
                r.docs_total,
                r.docs_kept,
                r.retained_pct,
                r.peak_rss_kib.map_or("-".to_string(), |k| k.to_string()),
                phases.join(",")
            );
        }
        let _ = writeln!(out, "# overhead_ratio={:.3}", self.overhead_ratio());
        out
    }
}

/// `VmHWM` from `/proc/self/status`.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Runs the threshold route into `run.out_dir/threshold`, then the anomaly
/// route into `run.out_dir/anomaly`, with the same worker setting.
pub fn benchmark(
    inputs: &[PathBuf],
    resources: &Resources,
    features: &FeatureConfig,
    detector: &DetectorConfig,
    rules: &ThresholdRuleSet,
    run: &RunConfig,
) -> Result<BenchReport> {
    let mut t_run = run.clone();
    t_run.out_dir = run.out_dir.join("threshold");
    t_run.scatter = None;
    let t = Instant::now();
    let tr = threshold_clean(inputs, resources, features, rules, &t_run)?;
    let threshold = RouteRun::from_report("threshold", t.elapsed().as_secs_f64(), &tr);

    let mut a_run = run.clone();
    a_run.out_dir = run.out_dir.join("anomaly");
    a_run.scatter = None;
    let t = Instant::now();
    let ar = clean_corpus(inputs, resources, features, detector, &a_run)?;
    let anomaly = RouteRun::from_report("anomaly", t.elapsed().as_secs_f64(), &ar);
    Ok(BenchReport { threshold, anomaly })
}
