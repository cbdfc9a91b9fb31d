//! Sparse multimode Fock algebra with per-mode displacement frames.
//!
//! The pump mode of a depleted-pump down-converter lives close to a bright
//! coherent state, so number-basis bookkeeping around a displaced origin is
//! the natural representation: a handful of displaced Fock amplitudes covers
//! what would need hundreds of bare Fock terms. This module provides the
//! displaced-basis matrix elements, sparse state vectors with one
//! displacement frame per mode, and sparse density operators with partial
//! trace and partial transposition.

mod density;
mod displacement;
mod state;

pub use density::DensityOperator;
pub use displacement::{displacement_matrix_element, ln_factorial};
pub use state::{Mode, StateVector, FRAME_CHANGE_NORM_TOL, FRAME_TOL};

pub(crate) use state::PRUNE_REL_TOL;
