//! Multiple-phase estimation of commuting unitaries.
//!
//! Quantum Fisher information for single-system (`mpeu`), entangled (`mpee`)
//! and full `SU(d)` models, optimal and LOCC measurements, classical Fisher
//! information, and Monte Carlo maximum-likelihood experiments.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod generators;
pub mod info;
pub mod measurement;
pub mod model;
pub mod operator;
pub mod qfi;
pub mod states;

pub use error::{Error, Result};
