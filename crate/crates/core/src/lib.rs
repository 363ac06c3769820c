#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![doc = include_str!("../README.md")]

extern crate alloc;

pub mod bfgs;
pub mod det;
pub mod error;
pub mod fci;
pub mod hamiltonian;
pub mod integrals;
pub mod linalg;
pub mod mp2;
mod par;
pub mod solver;
pub mod state;
pub mod ucc;

pub use det::{apply_second_quantized, enumerate_excitations, Determinant, Excitation, Sign};
pub use error::{Error, Result};
pub use hamiltonian::{DeterminantSpace, Hamiltonian};
pub use integrals::IntegralSet;
pub use state::{inner, SparseState};
pub use ucc::{FactorList, UccFactor};
pub use fci::{fci_solve, track_hf_state, FciSolution};
pub use linalg::{quadratic_energy, solve_angle_update, SolvePath};
pub use mp2::{mp2_amplitudes, mp2_energy, RankedFactors, SeedOrder};
pub use solver::{promote_and_iterate, QuccConfig, QuccResult};
