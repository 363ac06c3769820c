use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::det::Excitation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("spin-orbital index {index} out of range (system has {limit} spin orbitals)")]
    OrbitalOutOfRange { index: usize, limit: usize },

    #[error("{count} spin orbitals exceeds the determinant capacity of {max}")]
    TooManyOrbitals { count: usize, max: usize },

    #[error("invalid electron configuration: {0}")]
    InvalidConfiguration(&'static str),

    #[error("determinant {bits:#x} is outside the (n_e = {n_electrons}, 2S_z = {ms2}) sector")]
    SectorMismatch { bits: u64, n_electrons: usize, ms2: i32 },

    #[error("state is empty")]
    EmptyState,

    #[error("factor index {index} out of range for a list of {len} factors")]
    FactorIndexOutOfRange { index: usize, len: usize },

    #[error("excitation {0} appears more than once in the factor list")]
    DuplicateExcitation(Excitation),

    #[error("angle for excitation {0} is not finite")]
    NonFiniteAngle(Excitation),

    #[error("degenerate orbital energies for excitation {0}: |denominator| = {1:e}")]
    DegenerateOrbitals(Excitation, f64),

    #[error("requested {requested} exact factors but only {available} exist")]
    TooManyLargeFactors { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("linear system is unsolvable: the matrix is identically zero but the right-hand side is not")]
    UnsolvableSystem,

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (gradient max-norm {gradient_norm:e}, best energy {best_value})"
    )]
    OptimizerNotConverged {
        iterations: usize,
        best_value: f64,
        gradient_norm: f64,
        best_angles: Vec<f64>,
    },

    #[error("Davidson solver did not converge in {iterations} iterations")]
    DavidsonNotConverged {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("requested {requested} roots from a space of dimension {dimension}")]
    TooManyRoots { requested: usize, dimension: usize },

    #[error("promotion round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}
