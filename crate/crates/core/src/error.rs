use thiserror::Error;

use crate::sdp::SdpSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {allowed:.3e}")]
    NotHermitian { residual: f64, allowed: f64 },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("not a valid Choi matrix: {0}")]
    InvalidChoi(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Hermitian eigensolver failed to converge on a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error(
        "energy identity violated: tr[C dA|Phi><Phi|] = {via_c:.12e} but tr[H rho] = {direct:.12e}"
    )]
    EnergyIdentity { via_c: f64, direct: f64 },

    #[error("system too large: {0}")]
    Oversize(String),

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGround { gap: f64 },

    #[error("ground state does not have full Schmidt rank (q_min = {q_min:.3e})")]
    RankDeficientGround { q_min: f64 },

    #[error("SDP solver did not converge after {} iterations (gap {:.3e})", .0.iterations, .0.gap)]
    NotConverged(Box<SdpSolution>),
}
