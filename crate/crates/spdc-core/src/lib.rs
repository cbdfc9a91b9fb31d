//! Numerical model of parametric down-conversion with a depleted quantum
//! pump, and of the hybrid entanglement it leaves between the emitted
//! photon pairs and the bright pump mode.
//!
//! A single-pass down-converter pumped by a coherent state |alpha> emits
//! signal/idler pairs while removing one pump photon per pair. Treating the
//! pump as a dynamical mode instead of a fixed classical amplitude makes the
//! output a superposition of pair numbers, each correlated with its own
//! slightly depleted, slightly distorted pump state: micro-macro
//! entanglement between a few-photon system and a macroscopic beam.
//!
//! The crate is organized bottom-up:
//!
//! - [`fock`]: sparse multimode Fock states with per-mode displacement
//!   frames, density operators, partial trace and partial transposition;
//! - [`pump`]: the conserved-block amplitude flow of the pump and the pump
//!   states conditioned on emitted pair number;
//! - [`gmatrix`]: overlaps of those pump states with displaced number
//!   states, numerically and as weak-coupling series;
//! - [`spdc`]: the full signal/idler/pump output state, its undepleted
//!   limit, and the reduced pair density matrix;
//! - [`multisource`]: joint states of two or three independent sources and
//!   their expansions over entangled micro and pump bases;
//! - [`transforms`]: beam-splitter and three-port Fourier mixing of modes;
//! - [`conditioning`]: click/no-click detection on pump ports and the
//!   heralded entangled states it prepares;
//! - [`metrics`]: negativity and a Gram-matrix entanglement witness;
//! - [`verify`]: the consistency-check suite wired into the CLI.

pub mod conditioning;
pub mod error;
pub mod fock;
pub mod gmatrix;
pub mod metrics;
pub mod multisource;
pub mod pump;
pub mod spdc;
pub mod transforms;
pub mod verify;

pub use conditioning::{
    apd_project, herald_three_source, herald_two_source, probability_scaling, ComponentWeights,
    FidelityReport, HeraldResult, Outcome, ScalingPoint, ScalingReport,
};
pub use error::{Error, Result};
pub use fock::{
    displacement_matrix_element, DensityOperator, Mode, StateVector, FRAME_CHANGE_NORM_TOL,
    FRAME_TOL,
};
pub use gmatrix::{gmatrix_numeric, gmatrix_series, GMatrix, GMethod};
pub use metrics::{hybrid_witness, negativity, Bipartition, EIGEN_BUDGET};
pub use multisource::{
    block_amplitudes, block_members, build_basis, joint_output, micro_modes, pump_modes,
    verify_block_decomposition, BlockAmplitudes, BlockDecompositionReport, BlockMember,
};
pub use pump::{
    build_phi, default_l_cut, expm_oracle, generator_matrix, phi_family, recommended_steps,
    retained_weight, solve_f, solve_f_banded, FBlock, PhiState,
};
pub use spdc::{
    assemble_output, correlation_j, correlation_j_windowed, default_n_cut, propagate_oracle,
    reduced_rho12, rho12_from_j, tmsv_reference, undepleted_fidelity, CorrelationJ, HybridOutput,
};
pub use transforms::{apply_mode_unitary, bs2, dft3, ModeUnitary, MIXING_PHOTON_BUDGET};
pub use verify::{run_verify, Check, CheckStatus, VerifyReport};

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;
