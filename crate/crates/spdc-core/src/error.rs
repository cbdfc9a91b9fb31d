//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for state assembly, frame changes, and measurement plumbing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A truncation lost more weight than the operation tolerates, or an
    /// expansion was asked for occupations beyond its combinatorial budget.
    #[error("cutoff too small in {context}: lost {lost:.3e} against tolerance {tolerance:.3e}")]
    CutoffTooSmall {
        context: &'static str,
        lost: f64,
        tolerance: f64,
    },

    /// Dividing a pump state by (alpha*eta)^n is undefined at alpha*eta = 0.
    #[error("cannot rescale the n = {n} pump state: alpha*eta = 0")]
    RescaleUndefined { n: u32 },

    /// Neighbor ratio hit a zero denominator entry.
    #[error("neighbor ratio undefined: g[{n}][{m}] = 0")]
    DivisionByZeroEntry { n: usize, m: usize },

    /// A block-amplitude formula needs a g entry the table does not cover.
    #[error("g table does not cover g[{n}][{m}]")]
    MissingGEntry { n: usize, m: usize },

    /// Entangled-basis label outside the supported families.
    #[error("unknown entangled-basis label {0:?}")]
    UnknownLabel(String),

    /// Mode selection inconsistent with the state or with a unitary's size.
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    /// Vacuum projection attempted on a mode still carrying a displacement.
    #[error("mode {mode} carries displacement magnitude {frame:.3e}; rotate it away before click/no-click projection")]
    NonZeroFrame { mode: String, frame: f64 },

    /// Dense eigen-decomposition refused above this dimension.
    #[error("density matrix dimension {dim} exceeds eigen budget {max}")]
    DimensionTooLarge { dim: usize, max: usize },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
