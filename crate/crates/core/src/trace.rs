//! Per-iteration records shared by all solvers.

use std::time::Instant;

use serde::Serialize;

use crate::minerr::Orthogonalization;
use crate::numerics::dist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Breakdown,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Breakdown => "breakdown",
        }
    }
}

/// Quantities observed at iterate `x_k`.
///
/// `rho = ‖P(x_k) - x_k‖²`, `omega = ‖w(x_k)‖²`, `gamma = (omega + rho) / 2`.
/// `qtilde_norm` is the norm of the new search direction before
/// normalisation, when the solver builds one at this iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub rho: f64,
    pub omega: f64,
    pub gamma: f64,
    pub qtilde_norm: Option<f64>,
    pub true_error: Option<f64>,
    /// `‖b - A x_k‖` of the original system.
    pub residual_norm: f64,
    /// Milliseconds since the solve started.
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    /// `x_0, x_1, ...`, one per record.
    pub iterates: Vec<Vec<f64>>,
    pub status: SolveStatus,
    /// Step index at which a breakdown was detected, if any.
    pub breakdown_step: Option<usize>,
}

impl SolveTrace {
    pub(crate) fn new() -> Self {
        Self {
            records: Vec::new(),
            iterates: Vec::new(),
            status: SolveStatus::MaxIter,
            breakdown_step: None,
        }
    }

    /// Number of updates applied, i.e. the index of the last iterate.
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn true_errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.true_error).collect()
    }
}

/// Shared solver settings.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop once `‖P(x_k) - x_k‖ <= tol * (1 + ‖x_k‖)`.
    pub tol: f64,
    /// Known solution, used only to fill `true_error`.
    pub reference: Option<Vec<f64>>,
    /// Minimal-error method: Gram-Schmidt variant.
    pub orthogonalization: Orthogonalization,
    /// Minimal-error method: breakdown when `‖q̃‖ <= breakdown_tol * ‖r_k‖`.
    pub breakdown_tol: f64,
    /// Affine search: singularity threshold for the scaled normal equations,
    /// relative to their largest eigenvalue.
    pub normal_eq_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
            reference: None,
            orthogonalization: Orthogonalization::Reorthogonalized,
            breakdown_tol: 1e-12,
            normal_eq_tol: 1e-14,
        }
    }
}

impl SolveOptions {
    pub fn new(max_iter: usize, tol: f64) -> Self {
        Self {
            max_iter,
            tol,
            ..Self::default()
        }
    }

    pub fn with_reference(mut self, x_star: Vec<f64>) -> Self {
        self.reference = Some(x_star);
        self
    }

    pub fn with_orthogonalization(mut self, o: Orthogonalization) -> Self {
        self.orthogonalization = o;
        self
    }

    pub(crate) fn converged(&self, rho: f64, x_norm: f64) -> bool {
        let t = self.tol * (1.0 + x_norm);
        rho <= t * t
    }

    pub(crate) fn true_error(&self, x: &[f64]) -> Option<f64> {
        self.reference.as_deref().map(|r| dist(x, r))
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(crate::Error::Contract(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}
