//! Machine-readable check reports shared by every verification routine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// One row of a study: a single (R, t, k, f) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub study: String,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub k: Option<u32>,
    pub f_id: String,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema_version: u32,
    pub check_name: String,
    pub params: Value,
    pub grid_spec: Value,
    pub fitted_constant: Option<f64>,
    pub worst_ratio: Option<f64>,
    pub refinement_delta: Option<f64>,
    pub pass: bool,
    /// Named scalar results; keys sort deterministically.
    pub metrics: BTreeMap<String, f64>,
    pub cells: Vec<StudyCell>,
}

impl CheckReport {
    pub fn new(check_name: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            check_name: check_name.into(),
            params: Value::Null,
            grid_spec: Value::Null,
            fitted_constant: None,
            worst_ratio: None,
            refinement_delta: None,
            pass: false,
            metrics: BTreeMap::new(),
            cells: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }
}

/// Relative change between a coarse and a refined supremum.
pub fn relative_delta(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        return 0.0;
    }
    (fine - coarse).abs() / coarse.abs().max(fine.abs())
}
