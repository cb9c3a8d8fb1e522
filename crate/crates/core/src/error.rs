use std::fmt;

use serde::Serialize;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the adequacy engine.
///
/// Every variant maps to a stable machine-readable code via [`Error::code`],
/// which the command-line front end writes into its error JSON.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("risk is flat over [{lower}, {upper}] MW of firm capacity; equivalent firm capacity is undefined")]
    FlatRisk { lower: f64, upper: f64 },

    #[error("firm-capacity derivative of EEU is zero (LOLE of non-empty resources is 0)")]
    ZeroDerivative,

    #[error("target {target} is unreachable within firm capacity bracket [0, {upper}] MW")]
    TargetUnreachable { target: f64, upper: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("auction did not converge after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last_sets: [Vec<String>; 2],
    },

    #[error("optimum lies on the search bracket edge at {at} MW")]
    BoundaryOptimum { at: f64 },

    #[error("resource family contains storage; the LOLE pivot does not apply")]
    StorageNotPivotable,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::FlatRisk { .. } => "flat_risk",
            Error::ZeroDerivative => "zero_derivative",
            Error::TargetUnreachable { .. } => "target_unreachable",
            Error::Infeasible(_) => "infeasible",
            Error::NonConvergence { .. } => "non_convergence",
            Error::BoundaryOptimum { .. } => "boundary_optimum",
            Error::StorageNotPivotable => "storage_not_pivotable",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// Structured form written by the CLI on failure.
    pub fn report(&self) -> ErrorReport {
        let detail = match self {
            Error::NonConvergence { last_sets, .. } => Some(serde_json::json!({
                "last_sets": last_sets,
            })),
            _ => None,
        };
        ErrorReport {
            error: self.code(),
            message: self.to_string(),
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}
