//! Merging stored collective excitations in the bosonic limit.
//!
//! For m ≪ N the collective raising operators behave as bosonic creation
//! operators, so excitations stored in different internal levels can be
//! combined with beam-splitter transformations (driven by microwave/Raman
//! fields) plus post-selection on atomic detection. This module holds the
//! Fock-space transformations, the exact detection combinatorics, the
//! analytic repetition-count recursions, Monte Carlo schedulers, and the
//! photon-counting model used for number-resolved readout.

pub mod combinatorics;
pub mod counting;
pub mod fock;
pub mod scheduler;

pub use combinatorics::{
    detection_amplitude, detection_distribution, detection_probability_exact, doubling_d,
    doubling_d_exact, doubling_ln_rm, doubling_rm, number_resolved_levels, number_resolved_rm,
    number_resolved_success, one_by_one_ln_rm, one_by_one_q, one_by_one_q_closed, one_by_one_rm,
    DoublingPadding,
};
pub use counting::{discrimination_error, CountingModel};
pub use fock::{
    apply_beamsplitter, excitation_trim, superposition_merge, BeamSplitter, FockVector,
    TwoModeFock,
};
pub use scheduler::{simulate, MergeStrategy, SchedulerStats};
