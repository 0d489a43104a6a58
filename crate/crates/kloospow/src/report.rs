//! Experiment reports with reproducibility manifests.
//!
//! Every CLI run that produces data emits an [`ExperimentReport`]: a
//! manifest recording how to regenerate the rows, a schema naming the
//! columns, and the rows themselves. Reports serialize to CSV (manifest
//! and schema as `#` comment lines, RFC 4180 quoting) or JSON (one
//! object). Both writers print a float as its shortest round-trip
//! decimal, so the two emissions of one report always carry identical
//! numeric text, and a report regenerated from its own manifest is
//! byte-identical no matter how many threads produced it.

use std::fmt::Write as _;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Names the column layout of a report; every row of a report conforms to
/// the schema it was opened with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaId {
    /// Single Kloosterman evaluations with their method and cross-check.
    KloostOracle,
    /// Averaged complete sums over an (m, a, N) grid.
    KloostAverage,
    /// Divisor error-term scans, one summary row per (X, q).
    DivisorScan,
    /// Polynomial root counts with the rigid bound.
    RootCount,
    /// Exponential-sum bound reports.
    Korobov,
    /// Coefficient valuations against the factorial envelope.
    Valuation,
}

impl SchemaId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemaId::KloostOracle => "kloost-oracle",
            SchemaId::KloostAverage => "kloost-average",
            SchemaId::DivisorScan => "divisor-scan",
            SchemaId::RootCount => "root-count",
            SchemaId::Korobov => "korobov",
            SchemaId::Valuation => "valuation",
        }
    }

    /// The fixed column names of this schema.
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            SchemaId::KloostOracle => &["n", "a", "p", "k", "q", "value", "method", "cross_check"],
            SchemaId::KloostAverage => &[
                "p",
                "k",
                "q",
                "N",
                "lambda_hat",
                "m",
                "a",
                "sum",
                "normalized",
                "tau_hat",
            ],
            SchemaId::DivisorScan => &[
                "X",
                "p",
                "k",
                "q",
                "q_over_x23",
                "a_mode",
                "max_abs_e",
                "max_normalized",
                "delta_hat",
            ],
            SchemaId::RootCount => &["p", "mu", "q", "degree", "Q", "count", "rigid_bound"],
            SchemaId::Korobov => &[
                "degree", "p", "mu", "q", "P", "r", "beta", "c", "lhs", "trivial", "big_r",
                "n_used", "rhs", "bound_holds", "hypotheses_ok",
            ],
            SchemaId::Valuation => &["p", "k", "u", "exact", "bound", "ok"],
        }
    }
}

impl std::fmt::Display for SchemaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SchemaId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

/// One report cell. Integers stay integers; floats print as shortest
/// round-trip decimals; non-finite floats become the sentinels `inf`,
/// `-inf`, `nan` in both output formats.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i128),
    Float(f64),
    Text(String),
}

impl Value {
    /// Integers wider than i128 keep their exact decimal digits as text;
    /// odd prime powers below 2^127 never take that path.
    pub fn from_u128(v: u128) -> Self {
        match i128::try_from(v) {
            Ok(v) => Value::Int(v),
            Err(_) => Value::Text(v.to_string()),
        }
    }

    pub fn flag(v: bool) -> Self {
        Value::Int(v as i128)
    }

    pub fn text(v: impl Into<String>) -> Self {
        Value::Text(v.into())
    }

    fn csv_field(&self, out: &mut String) {
        match self {
            Value::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Value::Float(f) if f.is_finite() => {
                // the JSON serializer is the single float-to-text path, so
                // CSV and JSON emissions agree byte for byte
                out.push_str(&serde_json::to_string(f).expect("finite float serializes"));
            }
            Value::Float(f) => out.push_str(float_sentinel(*f)),
            Value::Text(t) => push_quoted(out, t),
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i128)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i128)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => serializer.serialize_i128(*v),
            Value::Float(f) if f.is_finite() => serializer.serialize_f64(*f),
            Value::Float(f) => serializer.serialize_str(float_sentinel(*f)),
            Value::Text(t) => serializer.serialize_str(t),
        }
    }
}

fn float_sentinel(f: f64) -> &'static str {
    if f.is_nan() {
        "nan"
    } else if f > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// RFC 4180: quote a field containing a comma, quote, or line break;
/// double embedded quotes.
fn push_quoted(out: &mut String, field: &str) {
    if field.contains([',', '"', '\n', '\r']) {
        out.push('"');
        for c in field.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// One recorded parameter of a run, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub name: String,
    pub value: String,
}

/// Everything needed to regenerate a report: tool identity, the canonical
/// compute arguments, and the sampling seed. The timestamp defaults to
/// empty so that reruns compare byte-for-byte; pass one explicitly to
/// stamp an archived run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Subcommand plus compute-relevant flags; excludes thread count and
    /// output destination, which never change the rows.
    pub command: String,
    pub seed: u64,
    pub timestamp: String,
    pub params: Vec<Param>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Manifest {
            tool: "kloospow".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            timestamp: String::new(),
            params: Vec::new(),
        }
    }

    pub fn with_timestamp(mut self, timestamp: impl Into<String>) -> Self {
        self.timestamp = timestamp.into();
        self
    }

    pub fn param(mut self, name: &str, value: impl std::fmt::Display) -> Self {
        self.params.push(Param {
            name: name.into(),
            value: value.to_string(),
        });
        self
    }
}

/// An ordered table of experiment rows under a fixed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub meta: Manifest,
    pub schema_id: SchemaId,
    rows: Vec<Vec<Value>>,
}

impl ExperimentReport {
    pub fn new(schema_id: SchemaId, meta: Manifest) -> Self {
        ExperimentReport {
            meta,
            schema_id,
            rows: Vec::new(),
        }
    }

    /// Row arity must match the schema; this is a programming error, not
    /// an input error.
    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.schema_id.columns().len(),
            "row arity does not match schema {}",
            self.schema_id
        );
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// CSV: manifest and schema as `#` comment lines, then a header row of
    /// schema columns, then data rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# manifest: ");
        out.push_str(&serde_json::to_string(&self.meta).expect("manifest serializes"));
        out.push('\n');
        out.push_str("# schema: ");
        out.push_str(self.schema_id.as_str());
        out.push('\n');
        out.push_str(&self.schema_id.columns().join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.csv_field(&mut out);
            }
            out.push('\n');
        }
        out
    }

    /// JSON: one object `{meta, schema_id, columns, rows}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

impl Serialize for ExperimentReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Shape<'a> {
            meta: &'a Manifest,
            schema_id: SchemaId,
            columns: &'static [&'static str],
            rows: Rows<'a>,
        }
        struct Rows<'a>(&'a [Vec<Value>]);
        impl Serialize for Rows<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
                for row in self.0 {
                    seq.serialize_element(row)?;
                }
                seq.end()
            }
        }
        Shape {
            meta: &self.meta,
            schema_id: self.schema_id,
            columns: self.schema_id.columns(),
            rows: Rows(&self.rows),
        }
        .serialize(serializer)
    }
}

/// Output encodings the CLI can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let meta = Manifest::new("divisor-scan --p 3 --k 4 --x 10000", 42)
            .param("p", 3)
            .param("k", 4);
        let mut report = ExperimentReport::new(SchemaId::DivisorScan, meta);
        report.push_row(vec![
            Value::Int(10_000),
            Value::Int(3),
            Value::Int(4),
            Value::Int(81),
            Value::Float(0.174_524),
            Value::text("all-units(54)"),
            Value::Float(12.5),
            Value::Float(0.101_25),
            Value::Float(0.248_6),
        ]);
        report
    }

    #[test]
    fn csv_layout_has_manifest_schema_header_rows() {
        let csv = sample_report().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("# manifest: {"));
        assert_eq!(lines[1], "# schema: divisor-scan");
        assert_eq!(
            lines[2],
            "X,p,k,q,q_over_x23,a_mode,max_abs_e,max_normalized,delta_hat"
        );
        assert_eq!(
            lines[3],
            "10000,3,4,81,0.174524,all-units(54),12.5,0.10125,0.2486"
        );
    }

    #[test]
    fn empty_report_keeps_a_valid_manifest() {
        let report = ExperimentReport::new(SchemaId::KloostAverage, Manifest::new("average", 0));
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"].as_array().unwrap().len(), 0);
        assert_eq!(json["meta"]["tool"], "kloospow");
        assert_eq!(json["meta"]["timestamp"], "");
    }

    #[test]
    fn csv_quotes_fields_with_separators() {
        let mut out = String::new();
        Value::text("sample(200, seed=42)").csv_field(&mut out);
        assert_eq!(out, "\"sample(200, seed=42)\"");
        let mut out = String::new();
        Value::text("say \"hi\"").csv_field(&mut out);
        assert_eq!(out, "\"say \"\"hi\"\"\"");
        let mut out = String::new();
        Value::text("plain").csv_field(&mut out);
        assert_eq!(out, "plain");
    }

    #[test]
    fn non_finite_floats_become_sentinels_in_both_formats() {
        let meta = Manifest::new("average", 0);
        let mut report = ExperimentReport::new(SchemaId::Valuation, meta);
        report.push_row(vec![
            Value::Int(3),
            Value::Int(60),
            Value::Int(25),
            Value::Float(f64::INFINITY),
            Value::Float(79.5),
            Value::flag(false),
        ]);
        let csv = report.to_csv();
        assert!(csv.lines().last().unwrap().contains("inf"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["rows"][0][3], "inf");
        assert_eq!(json["rows"][0][4], 79.5);
        let mut out = String::new();
        Value::Float(f64::NEG_INFINITY).csv_field(&mut out);
        assert_eq!(out, "-inf");
        let mut out = String::new();
        Value::Float(f64::NAN).csv_field(&mut out);
        assert_eq!(out, "nan");
    }

    #[test]
    fn csv_and_json_print_floats_identically() {
        for f in [0.1, 1.0 / 3.0, 6.02e23, 1e-300, -0.248_617_395_123_8] {
            let mut csv = String::new();
            Value::Float(f).csv_field(&mut csv);
            let json = serde_json::to_string(&Value::Float(f)).unwrap();
            assert_eq!(csv, json, "float text must agree across formats");
            assert_eq!(csv.parse::<f64>().unwrap(), f, "round trip");
        }
    }

    #[test]
    fn wide_integers_fall_back_to_exact_text() {
        assert_eq!(Value::from_u128(81), Value::Int(81));
        let wide = Value::from_u128(u128::MAX);
        assert_eq!(wide, Value::Text(u128::MAX.to_string()));
    }

    #[test]
    #[should_panic(expected = "row arity")]
    fn arity_mismatch_is_a_programming_error() {
        let mut report = ExperimentReport::new(SchemaId::Valuation, Manifest::new("verify", 0));
        report.push_row(vec![Value::Int(3)]);
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let meta = Manifest::new("roots --p 3 --mu 9", 7)
            .with_timestamp("2026-01-15T00:00:00Z")
            .param("mu", 9);
        let text = serde_json::to_string(&meta).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["command"], "roots --p 3 --mu 9");
        assert_eq!(back["seed"], 7);
        assert_eq!(back["params"][0]["name"], "mu");
    }
}
