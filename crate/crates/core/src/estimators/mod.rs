//! Estimators for θ from noisy observations of efficient solutions.

pub mod admm;
pub mod clustering;
pub mod fit;
pub mod kkt;
pub mod kmeans;
pub mod oracle;

use serde::{Deserialize, Serialize};

pub use admm::{estimate_admm, AdmmConfig, AdmmResidual};
pub use clustering::{estimate_clustering, ClusteringConfig, Init};
pub use fit::{inner_fit, FitConfig, Prox, Targets};
pub use kkt::kkt_init;
pub use kmeans::kmeans;
pub use oracle::{brute_force_oracle, OracleResult};

use crate::model::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Init,
    Assign,
    Update,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub step: Step,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateStatus {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub theta: ParamVector,
    /// Empirical risk of `theta` with the nearest-point assignment.
    pub objective: f64,
    pub assignment: Vec<usize>,
    /// x_k(θ̂) for every weight.
    pub front: Vec<Vec<f64>>,
    pub trace: Vec<TraceEntry>,
    /// Number of observations whose assignment changed, per outer iteration.
    pub assignment_changes: Vec<usize>,
    pub assignment_history: Vec<Vec<usize>>,
    pub residuals: Vec<AdmmResidual>,
    pub iterations: usize,
    pub status: EstimateStatus,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Clustering(ClusteringConfig),
    Admm(AdmmConfig),
}
