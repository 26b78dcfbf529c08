use std::collections::BTreeMap;

use serde::Serialize;

/// Outcome of a numeric check: a residual compared against a tolerance, plus
/// named auxiliary quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Passes iff `residual ≤ tolerance` (a NaN residual fails).
    pub fn new(check: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            pass: residual <= tolerance,
            residual,
            tolerance,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// Force a failure while keeping the residual (used by composite checks).
    pub fn fail(mut self) -> Self {
        self.pass = false;
        self
    }
}
