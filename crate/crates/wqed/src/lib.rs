//! Heralded collective atomic excitations in waveguide QED.
//!
//! This crate simulates the generation of collective excitations in atomic
//! ensembles coupled to a one-dimensional waveguide, where the atoms both
//! create the excitations and herald their successful transfer, and the
//! merging of excitations stored in different internal levels into large
//! single-mode states.
//!
//! The pieces:
//!
//! * [`hilbert`] / [`dynamics`] — finite-dimensional open-system engine:
//!   truncated symmetric bases, non-Hermitian propagation, Lindblad
//!   integration, and jump-resolved (quantum-trajectory) probabilities.
//! * [`zeno`] — the dissipative excitation-transfer step between two
//!   ensembles: effective Hamiltonians, analytic dark/superradiant
//!   envelopes, jump integrals, and piecewise-constant pulse shaping.
//! * [`protocols`] — the four heralding protocols: per-step success
//!   probabilities, error budgets, accumulated infidelities, and
//!   repetition-count statistics.
//! * [`merging`] — beam-splitter combinatorics in the bosonic
//!   (Holstein–Primakoff) limit, merge schedulers (one-by-one, doubling,
//!   number-resolved), and the photon-counting detection model.
//! * [`fullspace`] — brute-force full tensor-product oracle for 2–3 atoms,
//!   validating the symmetric-subspace reduction.
//! * [`cli`] — command-line front end emitting CSV/JSON tables.
//!
//! # Units and conventions
//!
//! Rates are plain `f64`s; most protocol-level entry points work in units of
//! the free-space rate `Γ* = 1`, so the waveguide rate equals the Purcell
//! factor `P_1d = Γ_1d/Γ*`. Jump channels use the standard Lindblad form
//! `γ (O ρ O† − ½{O†O, ρ})`; a dissipator written as `(γ/2) D_O` with
//! `D_O[ρ] = 2 O ρ O† − {O†O, ρ}` is the same thing with rate `γ`.

pub mod cli;
pub mod dynamics;
pub mod fullspace;
pub mod hilbert;
pub mod linalg;
pub mod merging;
pub mod ode;
pub mod optimize;
pub mod protocols;
pub mod quad;
pub mod zeno;

pub use linalg::{c64, CMat, CVec};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error("step size underflow at t = {t:.6e}; the problem is stiff at the requested tolerance (raise tol or shrink the horizon)")]
    StepSizeUnderflow { t: f64 },
    #[error("truncation overflow: state support exceeds n_max = {0}")]
    TruncationOverflow(usize),
    #[error("projection has zero probability")]
    ZeroProbability,
    #[error("empty level list for ensemble {0}")]
    EmptyLevels(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
