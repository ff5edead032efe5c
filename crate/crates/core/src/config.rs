//! Numerical tolerances shared by every module.
//!
//! The passivity verdict is a boundary decision, so all thresholds live in
//! one record that is threaded through the call graph and echoed into every
//! machine-readable report.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed non-Hermiticity, relative to the largest absolute entry.
    pub herm_tol: f64,
    /// PSD slack, relative to `max(1, ‖·‖_op)` of the operator under test.
    pub psd_tol: f64,
    /// Relative eigen-reconstruction tolerance.
    pub eig_tol: f64,
    /// Relative gap below which a ground state counts as degenerate.
    pub deg_tol: f64,
    /// Squared Schmidt coefficients at or below this are treated as zero.
    pub schmidt_tol: f64,
    /// Absolute unit-trace tolerance for density matrices.
    pub trace_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            psd_tol: 1e-9,
            eig_tol: 1e-8,
            deg_tol: 1e-8,
            schmidt_tol: 1e-20,
            trace_tol: 1e-10,
        }
    }
}

impl Tolerances {
    /// Absolute PSD threshold for an operator of the given operator norm.
    pub fn psd_threshold(&self, op_norm: f64) -> f64 {
        self.psd_tol * op_norm.max(1.0)
    }

    /// Absolute Hermiticity threshold for a matrix with the given largest entry.
    pub fn herm_threshold(&self, max_abs_entry: f64) -> f64 {
        self.herm_tol * max_abs_entry
    }
}
