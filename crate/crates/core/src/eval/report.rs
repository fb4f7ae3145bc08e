//! Experiment reports: per-environment scores, per-method means, and the
//! JSON / text renderings written next to the panels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{metrics, ConfusionCounts, Metrics};
use crate::error::{Error, Result};

/// One method scored on one environment at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub env: String,
    pub stage: String,
    pub method: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Mean of each metric over the environments a method was scored on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub stage: String,
    pub method: String,
    pub label: String,
    pub n: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl SummaryRow {
    pub fn as_array(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f_measure]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub env: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub rows: Vec<ScoreRow>,
    pub summary: Vec<SummaryRow>,
    pub skipped: Vec<Skipped>,
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";

impl ExperimentReport {
    pub fn new(experiment: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            seeds,
            rows: Vec::new(),
            summary: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn push(&mut self, env: &str, stage: &str, method: &str, counts: ConfusionCounts) {
        self.rows.push(ScoreRow {
            env: env.into(),
            stage: stage.into(),
            method: method.into(),
            counts,
            metrics: metrics(&counts),
        });
    }

    /// Rebuilds the summary; `methods` fixes row order and display labels.
    pub fn summarize(&mut self, stages: &[&str], methods: &[(&str, &str)]) {
        self.summary.clear();
        for &stage in stages {
            for &(method, label) in methods {
                let picked: Vec<&Metrics> = self
                    .rows
                    .iter()
                    .filter(|r| r.stage == stage && r.method == method)
                    .map(|r| &r.metrics)
                    .collect();
                if picked.is_empty() {
                    continue;
                }
                let n = picked.len();
                let mean = |f: fn(&Metrics) -> f64| picked.iter().map(|m| f(m)).sum::<f64>() / n as f64;
                self.summary.push(SummaryRow {
                    stage: stage.into(),
                    method: method.into(),
                    label: label.into(),
                    n,
                    accuracy: mean(|m| m.accuracy),
                    precision: mean(|m| m.precision),
                    recall: mean(|m| m.recall),
                    f_measure: mean(|m| m.f_measure),
                });
            }
        }
    }

    pub fn mean(&self, stage: &str, method: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.stage == stage && s.method == method)
    }

    pub fn rows_for<'a>(&'a self, stage: &'a str, method: &'a str) -> impl Iterator<Item = &'a ScoreRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.stage == stage && r.method == method)
    }

    /// Aligned text table, one block per stage. Within a block the best
    /// value of each column is wrapped as `_x_`.
    pub fn table(&self) -> String {
        let mut stages: Vec<&str> = Vec::new();
        for s in &self.summary {
            if !stages.contains(&s.stage.as_str()) {
                stages.push(&s.stage);
            }
        }
        let width = self
            .summary
            .iter()
            .map(|s| s.label.len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.experiment);
        for stage in stages {
            let block: Vec<&SummaryRow> = self.summary.iter().filter(|s| s.stage == stage).collect();
            let mut best = [f64::NEG_INFINITY; 4];
            for s in &block {
                for (b, v) in best.iter_mut().zip(s.as_array()) {
                    *b = b.max(v);
                }
            }
            let _ = writeln!(out, "\n[{stage}]");
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}  {:>4}",
                "Method", "Accuracy", "Precision", "Recall", "F-measure", "n"
            );
            for s in block {
                let _ = write!(out, "{:<width$}", s.label);
                for (v, b) in s.as_array().into_iter().zip(best) {
                    let cell = if v == b { format!("_{v:.4}_") } else { format!("{v:.4}") };
                    let _ = write!(out, "  {cell:>10}");
                }
                let _ = writeln!(out, "  {:>4}", s.n);
            }
        }
        let _ = writeln!(out, "\n_x_ marks the best value of each column within a block.");
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped:");
            for s in &self.skipped {
                let _ = writeln!(out, "  {}: {}", s.env, s.reason);
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(REPORT_JSON);
        fs::write(&json, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&json, e))?;
        let txt = dir.join(REPORT_TXT);
        fs::write(&txt, self.table()).map_err(|e| Error::io(&txt, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(REPORT_JSON);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    #[test]
    fn summary_means_and_underline() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({}), vec![1]);
        r.push("e0", "s", "a", counts(2, 1, 1, 12));
        r.push("e1", "s", "a", counts(4, 0, 0, 12));
        r.push("e0", "s", "b", counts(0, 0, 4, 12));
        r.summarize(&["s"], &[("a", "method a"), ("b", "method b")]);
        let a = r.mean("s", "a").unwrap();
        assert_eq!(a.n, 2);
        assert!((a.f_measure - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-12);
        assert!((a.accuracy - (14.0 / 16.0 + 1.0) / 2.0).abs() < 1e-12);
        let t = r.table();
        let line = t.lines().find(|l| l.starts_with("method a")).unwrap();
        assert_eq!(line.matches('_').count(), 8, "{line}");
        let line = t.lines().find(|l| l.starts_with("method b")).unwrap();
        assert!(!line.contains('_'));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentReport::new("demo", serde_json::json!({"k": 1}), vec![3, 4]);
        r.push("e0", "s", "a", counts(1, 2, 3, 4));
        r.summarize(&["s"], &[("a", "A")]);
        r.skipped.push(Skipped {
            env: "e9".into(),
            reason: "diverged".into(),
        });
        r.write(dir.path()).unwrap();
        assert_eq!(ExperimentReport::load(dir.path()).unwrap(), r);
        let txt = fs::read_to_string(dir.path().join(REPORT_TXT)).unwrap();
        assert!(txt.contains("e9: diverged"));
    }
}
