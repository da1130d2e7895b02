//! Machine-readable run reports.
//!
//! A report wraps the outcome of one command invocation. The JSON encoding
//! is byte-stable: struct fields serialize in declaration order, every
//! finite float is written with 17 significant digits in scientific
//! notation, and no timing or environment data leaks into the encoding
//! unless the caller puts it there. Two runs with the same command, seed,
//! and version therefore produce identical bytes.

use crate::bounds::BoundReport;
use crate::contact::Classification;
use crate::geodesic::ProbeReport;
use crate::identity::CheckResult;
use serde::Serialize;
use std::io::{self, Write};

/// Schema version stamped into every report.
pub const REPORT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One entry in a report's `results` array. Serializes transparently as
/// the wrapped value.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ResultItem {
    Check(CheckResult),
    Probe(ProbeReport),
    Bounds(BoundReport),
    Classification(ClassificationSummary),
}

/// Flattened view of a classification verdict for report output.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationSummary {
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl From<&Classification> for ClassificationSummary {
    fn from(c: &Classification) -> Self {
        match c {
            Classification::Compatible {
                theta_prime,
                spread,
            } => ClassificationSummary {
                verdict: "compatible".into(),
                theta_prime: Some(*theta_prime),
                failed: None,
                residual: Some(*spread),
            },
            Classification::WeaklyCompatible { failed, .. } => ClassificationSummary {
                verdict: "weakly-compatible".into(),
                theta_prime: None,
                failed: Some(failed.clone()),
                residual: None,
            },
            Classification::Incompatible {
                failed, residual, ..
            } => ClassificationSummary {
                verdict: "incompatible".into(),
                theta_prime: None,
                failed: Some(failed.clone()),
                residual: Some(*residual),
            },
        }
    }
}

/// The envelope emitted by every command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub model: String,
    pub results: Vec<ResultItem>,
    pub elapsed_ms: u64,
}

impl Report {
    pub fn new(command: impl Into<String>, seed: u64, model: impl Into<String>) -> Self {
        Report {
            version: REPORT_VERSION.to_string(),
            command: command.into(),
            seed,
            model: model.into(),
            results: Vec::new(),
            elapsed_ms: 0,
        }
    }

    /// Stable JSON encoding (compact, fixed field order, 17-significant-digit
    /// floats).
    pub fn to_json(&self) -> String {
        let mut buf = Vec::with_capacity(1024);
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
        self.serialize(&mut ser)
            .expect("report serialization cannot fail");
        String::from_utf8(buf).expect("serializer emits UTF-8")
    }
}

/// Compact JSON formatter that writes every finite float with 17
/// significant digits (`{:.16e}`), making the encoding independent of the
/// shortest-roundtrip heuristics of the default formatter.
struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.7e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_check() -> CheckResult {
        CheckResult {
            check_id: "phi-square".into(),
            residual: 2.5e-12,
            margin: None,
            tolerance: 1e-6,
            pass: true,
            worst_point: vec![0.5, -0.25, 0.125],
            samples: 40,
        }
    }

    #[test]
    fn json_field_order_is_fixed() {
        let mut r = Report::new("verify --model heisenberg3", 7, "heisenberg3");
        r.results.push(ResultItem::Check(sample_check()));
        let s = r.to_json();
        let keys = ["\"version\"", "\"command\"", "\"seed\"", "\"model\"", "\"results\"", "\"elapsed_ms\""];
        let mut last = 0;
        for k in keys {
            let pos = s.find(k).unwrap_or_else(|| panic!("missing {k}"));
            assert!(pos > last || last == 0, "field {k} out of order");
            last = pos;
        }
    }

    #[test]
    fn floats_use_seventeen_significant_digits() {
        let mut r = Report::new("bounds", 0, "round-s3");
        r.results.push(ResultItem::Check(CheckResult {
            check_id: "t".into(),
            residual: 0.6861406616345072,
            margin: Some(2.0),
            tolerance: 1e-6,
            pass: true,
            worst_point: vec![],
            samples: 1,
        }));
        let s = r.to_json();
        assert!(
            s.contains("6.8614066163450715e-1"),
            "residual not in 17-digit scientific form: {s}"
        );
        assert!(s.contains("2.0000000000000000e0"), "margin form: {s}");
    }

    #[test]
    fn identical_reports_are_byte_identical() {
        let build = || {
            let mut r = Report::new("verify --points 100", 42, "round-s3");
            r.results.push(ResultItem::Check(sample_check()));
            r.to_json()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn margin_is_omitted_when_absent() {
        let mut r = Report::new("verify", 0, "m");
        r.results.push(ResultItem::Check(sample_check()));
        let s = r.to_json();
        assert!(!s.contains("\"margin\""));
    }
}
