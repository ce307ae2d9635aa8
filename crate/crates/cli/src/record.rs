//! The JSON document every command writes.

use covfuse_core::maxdet::{SolverReport, SolverStatus};
use covfuse_core::{Estimate, SearchStatus};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub command: String,
    pub method: String,
    /// Hex SHA-256 of the input file.
    pub input_digest: String,
    pub seed: u64,
    pub inputs: Vec<Estimate>,
    pub results: Vec<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// `log det` of the result covariance; absent when it is singular.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub diagnostics: Diagnostics,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Fusion,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDistance {
    pub i: usize,
    pub j: usize,
    /// Squared Mahalanobis distance of the means.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSummary {
    pub status: SolverStatus,
    pub gap: f64,
    pub kkt: f64,
    pub newton_steps: usize,
}

impl From<&SolverReport> for SolverSummary {
    fn from(r: &SolverReport) -> Self {
        Self { status: r.status, gap: r.gap, kkt: r.kkt, newton_steps: r.newton_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckSummary {
    pub direct_objective: f64,
    pub mee_objective: f64,
    pub logdet_gap: f64,
    pub logdet_tol: f64,
    /// The direct solution contains every input ellipsoid.
    pub direct_encloses: bool,
    /// The enclosing ellipsoid satisfies every GCU inequality.
    pub mee_gcu_feasible: bool,
    pub containment: bool,
    pub max_tau: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<SearchStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    /// Index of an input that already encloses the others.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nested: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<PairDistance>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheckSummary>,
    /// Failed post-hoc checks; a non-empty list makes the process exit with code 4.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub check_failures: Vec<String>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(bytes: &[u8]) -> CliResult<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// The record with its wall time zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunRecord {
        RunRecord { wall_time_ms: 0.0, ..self.clone() }
    }
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_exactly() {
        let e = Estimate::from_rows(&[0.1, 1.0 / 3.0], &[vec![2.0 / 3.0, 1e-17], vec![1e-17, 7.123456789012345]])
            .unwrap();
        let r = RunRecord {
            command: "union".into(),
            method: "gcu-mee".into(),
            input_digest: "00".into(),
            seed: u64::MAX,
            inputs: vec![e.clone()],
            results: vec![e],
            weights: Some(vec![0.1 + 0.2, 1.0 - (0.1 + 0.2)]),
            objective: Some(std::f64::consts::PI),
            diagnostics: Diagnostics {
                tau: Some(vec![5e-324, 1.0 - f64::EPSILON]),
                branch: Some(Branch::Union),
                distances: Some(vec![PairDistance { i: 0, j: 1, distance: 16.000000000000004 }]),
                ..Diagnostics::default()
            },
            wall_time_ms: 0.25,
        };
        let back = RunRecord::from_json(r.to_json().as_bytes()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), r.to_json());
    }
}
