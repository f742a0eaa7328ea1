//! Dense simulation of quantum state-to-state control under control-field
//! dephasing noise.
//!
//! The physical setting is a driven two-mode Bose-Hubbard dimer at fixed
//! particle number N, equivalently a spin j = N/2 system with drift
//! `H0 = -2Δ Jx + U Jz²` and a single scalar control entering as `2 u(t) Jz`.
//! White noise on the control amplitude dephases the system in the Jz basis;
//! the dephasing rate carries a static part and a part proportional to the
//! squared control amplitude.
//!
//! The crate provides:
//!
//! * [`algebra`] — spin-j operator representations, drift and Bose-Hubbard
//!   Hamiltonians, spin-coherent states;
//! * [`dynamics`] — unitary, stochastic-realization and Lindblad propagation
//!   on a uniform time grid, plus ensemble averaging;
//! * [`metrics`] — purity, fidelity, operator variances, generalized purity,
//!   quasi-distance and the sign operator built from it;
//! * [`bounds`] — analytic minimum-time and purity-loss bounds and the
//!   tolerable-noise conditions, with audit reports;
//! * [`control`] — the random spectral control field and a greedy local
//!   control strategy that preserves spin coherence;
//! * [`experiments`] — seeded ensemble studies (rate law, size scaling,
//!   noise contours, purity traces) with reproducible CSV/JSON outputs.

pub mod algebra;
pub mod bounds;
pub mod control;
pub mod dynamics;
pub mod experiments;
pub mod linalg;
pub mod metrics;

pub use algebra::{build_bose_hubbard, build_drift, scs_state, ModelParams, QuantumState, SpinRep};
pub use dynamics::{ControlField, DensityMatrix, NoiseSpec, StateTrajectory, StepKernel};

use thiserror::Error;

/// Largest supported Hilbert-space dimension for dense operators.
pub const MAX_DIM: usize = 2048;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
