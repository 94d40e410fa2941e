//! JSON trace documents: a config echo, one record per iteration and the
//! terminal status.

use serde::{Deserialize, Serialize};

use rescaled_core::ConvergenceTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub function: String,
    pub source: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub radius: Option<f64>,
    pub mode: String,
    pub eps: f64,
    pub delta: f64,
    pub eps1: f64,
    pub max_iters: usize,
    pub fixed_iters: Option<usize>,
    pub damping: Option<f64>,
    pub weights: String,
    pub start: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub dist_to_ref: Option<f64>,
    pub sketch_nnz: Option<usize>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub config: ConfigEcho,
    pub status: String,
    pub message: Option<String>,
    pub iterations: Vec<TraceRecord>,
    pub x_final: Vec<f64>,
    pub final_dist_to_ref: Option<f64>,
}

impl TraceDocument {
    pub fn new(config: ConfigEcho, trace: &ConvergenceTrace, x_ref: Option<&nalgebra::DVector<f64>>) -> Self {
        let iterations = trace
            .records
            .iter()
            .map(|r| TraceRecord {
                iter: r.iter,
                loss: r.loss,
                grad_norm: r.grad_norm,
                step_norm: r.step_norm,
                dist_to_ref: r.dist_to_ref,
                sketch_nnz: r.sketch_nnz,
                wall_ms: r.wall_ms,
            })
            .collect();
        let message = match &trace.status {
            rescaled_core::solver::TerminalStatus::Error(msg) => Some(msg.clone()),
            _ => None,
        };
        Self {
            config,
            status: trace.status.label().to_string(),
            message,
            iterations,
            x_final: trace.x_final.iter().copied().collect(),
            final_dist_to_ref: x_ref.map(|r| (&trace.x_final - r).norm()),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
