//! Error taxonomy shared by the whole crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong, from rejected tables to config typos.
#[derive(Debug, Error)]
pub enum Error {
    /// A table parameter triple violates one of the admissibility
    /// inequalities. `condition` names the failed inequality.
    #[error("inadmissible table: {condition} violated ({detail})")]
    InvalidTable {
        condition: &'static str,
        detail: String,
    },

    /// A centering offset exceeds the table's `eps`.
    #[error("centering norm {norm} exceeds eps = {eps}")]
    InvalidCentering { norm: f64, eps: f64 },

    /// A traced trajectory came within `margin` of the singularity set
    /// (tangency, corner, clean-pass boundary, or a tie between events).
    /// Callers running Monte Carlo loops discard and resample.
    #[error("trajectory within {margin:e} of the singularity set ({what})")]
    SingularityProximity { what: &'static str, margin: f64 },

    /// A phase point lies outside the domain it was claimed to be in.
    #[error("phase point outside cross section: {0}")]
    OutsideSection(String),

    /// A sequence-model description is invalid (non-stochastic rows,
    /// reducible or periodic chain, state/centering mismatch).
    #[error("sequence model: {0}")]
    Model(String),

    /// Config file or command-line problem.
    #[error("config: {0}")]
    Config(String),

    /// I/O while reading config or writing reports.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code for the CLI: usage and config problems exit 1,
    /// everything else (runtime check failures) exits 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}
