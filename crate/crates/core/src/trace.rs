//! Per-iteration optimizer records and their CSV/JSON encodings.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::Layout;
use crate::constraints::FitnessValue;
use crate::error::{Error, Result};
use crate::kgr::{Precoder, PrecoderParts};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub best_fitness: f64,
    pub best_kgr: f64,
    pub penalty: f64,
    /// Milliseconds since the run started (monotonic clock).
    pub elapsed_ms: f64,
}

impl TraceRecord {
    pub fn new(iteration: usize, best: &FitnessValue, elapsed_ms: f64) -> Self {
        Self { iteration, best_fitness: best.fitness, best_kgr: best.raw_kgr, penalty: best.penalty, elapsed_ms }
    }
}

/// Convergence record of one optimizer or baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    pub records: Vec<TraceRecord>,
    pub best_precoder: Precoder,
    pub best_layout: Layout,
    pub best: FitnessValue,
}

impl OptTrace {
    pub fn final_kgr(&self) -> f64 {
        self.best.raw_kgr
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.elapsed_ms)
    }

    /// True when the best fitness never decreases between records.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness)
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("iteration,best_fitness,best_kgr,penalty,elapsed_ms\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3}",
                r.iteration,
                fmt_float(r.best_fitness),
                fmt_float(r.best_kgr),
                fmt_float(r.penalty),
                r.elapsed_ms
            );
        }
        out
    }
}

/// Nine significant digits, `.` decimal separator.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

/// `# key: value` lines embedding run metadata at the top of a CSV file.
pub fn csv_header(meta: &serde_json::Value) -> String {
    let mut out = String::new();
    if let serde_json::Value::Object(map) = meta {
        for (k, v) in map {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
    out
}

/// Final solution of a run, for JSON summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub best_kgr: f64,
    pub best_fitness: f64,
    pub penalty: f64,
    pub precoder: PrecoderParts,
    pub layout: Layout,
}

impl From<&OptTrace> for SolutionSummary {
    fn from(t: &OptTrace) -> Self {
        Self {
            best_kgr: t.best.raw_kgr,
            best_fitness: t.best.fitness,
            penalty: t.best.penalty,
            precoder: t.best_precoder.to_parts(),
            layout: t.best_layout.clone(),
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_nine_digits() {
        assert_eq!(fmt_float(42.0), "4.20000000e1");
        assert_eq!(fmt_float(-0.001234567891), "-1.23456789e-3");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_layout() {
        let best = FitnessValue::new(3.0, 0.0, 100.0);
        let t = OptTrace {
            records: vec![TraceRecord::new(0, &best, 0.5), TraceRecord::new(1, &best, 1.25)],
            best_precoder: Precoder::zeros(1, 1),
            best_layout: Layout::new(vec![[0.0, 0.0]]),
            best,
        };
        let csv = t.to_csv(&csv_header(&serde_json::json!({"seed": 4})));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed: 4");
        assert_eq!(lines[1], "iteration,best_fitness,best_kgr,penalty,elapsed_ms");
        assert_eq!(lines[2], "0,3.00000000e0,3.00000000e0,0.00000000e0,0.500");
        assert!(t.is_monotone());
    }
}
