//! JSON documents written by the command-line tool.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::energy::{DivergenceReport, EnergyEstimate, MeasureSpec};
use crate::equilibrium::{Classification, TraceEntry};
use crate::harmonics::{HarmonicCoefficient, PositivityScan};
use crate::potential::PotentialReport;
use crate::shape::ShapeSpec;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub psi: Vec<HarmonicCoefficient>,
    pub psi_hat: Vec<HarmonicCoefficient>,
    pub psi_positivity: PositivityScan,
    pub psi_hat_positivity: PositivityScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub semiaxes: [f64; 3],
    pub rotation: [[f64; 3]; 3],
    pub shape_matrix: [[f64; 3]; 3],
}

impl ShapeReport {
    pub fn spec(&self) -> ShapeSpec {
        ShapeSpec {
            semiaxes: self.semiaxes,
            rotation: self.rotation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub passed: bool,
    pub constancy_tol: f64,
    pub exterior_tol: f64,
    pub details: PotentialReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub value: f64,
    pub error: f64,
    /// f(M₀)/5 from the objective; an independent estimate of the same number.
    pub from_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub profile: ProfileSummary,
    pub classification: Classification,
    pub shape: ShapeReport,
    pub el_residual: f64,
    pub exterior_el_min: f64,
    pub verification: VerifySummary,
    pub energy: EnergySummary,
    pub extrapolated_semiaxes: Option<[f64; 2]>,
    pub iterations: usize,
    pub condition_estimate: f64,
    pub continuation_trace: Vec<TraceEntry>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub shape: ShapeSpec,
    pub verification: VerifySummary,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnergyOutcome {
    Finite { estimate: EnergyEstimate },
    Divergent { levels: DivergenceReport },
    /// A segment whose level table did not grow; reported rather than hidden.
    Undetermined { levels: DivergenceReport },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub measure: MeasureSpec,
    pub result: EnergyOutcome,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub degree: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierReport {
    pub tool: ToolInfo,
    pub max_degree: usize,
    pub multipliers: Vec<Multiplier>,
    pub profile: ProfileSummary,
}

/// True when every number in the serialised document is finite
/// (serde_json writes non-finite floats as null).
pub fn all_finite<T: Serialize>(doc: &T) -> bool {
    fn walk(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
            serde_json::Value::Array(a) => a.iter().all(walk),
            serde_json::Value::Object(o) => o.iter().all(|(k, v)| {
                // optional fields are legitimately null
                !v.is_null() || matches!(k.as_str(), "extrapolated_semiaxes" | "report" | "csv")
            } && walk(v)),
            _ => true,
        }
    }
    serde_json::to_value(doc).map(|v| walk(&v)).unwrap_or(false)
}
