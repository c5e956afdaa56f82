//! Two-photon discrete-time quantum walks on a line with binary `{0, π}`
//! phase disorder.
//!
//! The crate builds the single-particle unitary of a phase-disordered walk,
//! turns it into two-photon coincidence matrices, and scores those with the
//! Cauchy–Schwarz violation `V_ij = (2/3)√(Γ_ii Γ_jj) − Γ_ij`. On top of that
//! sit random and exhaustive searches for correlation-enhancing phase maps, a
//! p-diluted disorder model with disorder averaging, and a Poissonian
//! emulation of coincidence counting.
//!
//! ```
//! use qwalk::{walk, correlations, violation};
//!
//! let map = walk::PhaseMap::zeros(1);
//! let unitary = walk::build_unitary(1, &map, &walk::CoinSpec::balanced(), &walk::origin_inputs()).unwrap();
//! let gamma = correlations::gamma_indistinguishable(&unitary, &correlations::BiphotonInput::default()).unwrap();
//! let v = violation::violation_matrix(&gamma).unwrap();
//! assert!((v.mav - 1.0 / 3.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod correlations;
pub mod disorder;
pub mod emulation;
pub mod error;
pub mod export;
pub mod lattice;
pub mod search;
pub mod violation;
pub mod walk;

mod numeric;

pub use error::{Error, Result};
pub use lattice::{Coin, Mode, ModeIndexing};
