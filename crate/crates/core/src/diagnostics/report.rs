use serde::{Deserialize, Serialize};

/// One NDJSON diagnostic record per (anchor, radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub kind: String,
    /// `[t0, x0...]`.
    pub z0: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub defect: Option<f64>,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
}

impl ReportRecord {
    /// Serializes to one JSON line; non-finite numbers become `null`.
    pub fn to_ndjson(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}
