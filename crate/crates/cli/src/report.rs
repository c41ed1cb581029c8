//! Check rows, the report wrapper and its CSV/JSON forms.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const CSV_HEADER: [&str; 6] = ["check", "instance", "value", "bound", "violation", "pass"];

/// One checked quantity. `pass` iff `violation <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check: String,
    pub instance: String,
    #[serde(with = "float")]
    pub value: f64,
    #[serde(with = "float")]
    pub bound: f64,
    #[serde(with = "float")]
    pub violation: f64,
    pub pass: bool,
}

impl Row {
    /// `value <= bound`.
    pub fn at_most(check: impl Into<String>, instance: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::from_violation(check, instance, value, bound, value - bound)
    }

    /// `value >= bound`.
    pub fn at_least(check: impl Into<String>, instance: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::from_violation(check, instance, value, bound, bound - value)
    }

    /// `value < bound`.
    pub fn below(check: impl Into<String>, instance: impl Into<String>, value: f64, bound: f64) -> Self {
        let mut row = Self::at_most(check, instance, value, bound);
        row.pass = value < bound;
        row
    }

    fn from_violation(
        check: impl Into<String>,
        instance: impl Into<String>,
        value: f64,
        bound: f64,
        violation: f64,
    ) -> Self {
        // NaN never passes.
        let pass = violation <= 0.0;
        Row { check: check.into(), instance: instance.into(), value, bound, violation, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    #[serde(with = "float")]
    pub max_violation: f64,
}

impl Summary {
    pub fn of(rows: &[Row]) -> Self {
        let passed = rows.iter().filter(|r| r.pass).count();
        Summary {
            total: rows.len(),
            passed,
            failed: rows.len() - passed,
            max_violation: rows.iter().map(|r| r.violation).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub suite: String,
    pub seed: u64,
    pub summary: Summary,
    pub rows: Vec<Row>,
    pub config: ExperimentConfig,
}

impl Report {
    pub fn new(suite: &str, config: &ExperimentConfig, rows: Vec<Row>) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            suite: suite.into(),
            seed: config.seed,
            summary: Summary::of(&rows),
            rows,
            config: config.clone(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{}: {} checks, {} passed, {} failed, max violation {:.3e} => {}",
            self.suite,
            self.summary.total,
            self.summary.passed,
            self.summary.failed,
            self.summary.max_violation,
            if self.all_pass() { "PASS" } else { "FAIL" }
        )
    }
}

/// CSV with the fixed header; numbers in 17 significant digits.
pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.check.as_str(),
            r.instance.as_str(),
            &format_number(r.value),
            &format_number(r.bound),
            &format_number(r.violation),
            if r.pass { "true" } else { "false" },
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_report(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

/// Finite floats as JSON numbers, the rest as strings.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
