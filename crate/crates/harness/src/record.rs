use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Kind;

/// One line of the records file. Reproducible bit for bit from the experiment spec and
/// the replicate index; no wall-clock fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub experiment: String,
    pub kind: Kind,
    pub seed: u64,
    pub replicate: usize,
    /// Grid position (length, direction, exponent, check) of the replicate.
    pub index: usize,
    /// Substream key of the replicate's randomness, where it has one.
    pub stream: Option<u64>,
    pub params: Value,
    pub outputs: Value,
    pub trusted: Option<bool>,
    pub error: Option<String>,
}

impl ReplicateRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// Rows of a comma-separated summary table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: Kind,
    pub experiment: String,
    pub seed: u64,
    pub jobs: usize,
    pub failures: usize,
    /// More than a tenth of the jobs failed, so nothing was aggregated.
    pub aborted: bool,
    /// Outcome of the kind's acceptance predicate, if it has one.
    pub pass: Option<bool>,
    /// Aggregation failure, e.g. too many untrusted paths.
    pub error: Option<String>,
    pub table: Table,
    /// Named scalar results.
    pub metrics: Vec<(String, f64)>,
    pub details: Value,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.0 == name).map(|m| m.1)
    }

    pub fn metrics_csv(&self) -> String {
        let mut t = Table::new(&["metric", "value"]);
        for (k, v) in &self.metrics {
            t.push(vec![k.clone(), crate::run::fmt(*v)]);
        }
        t.to_csv()
    }
}
