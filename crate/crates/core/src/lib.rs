//! Quantum battery capacity toolkit.
//!
//! Computes ergotropy, antiergotropy and capacity of finite-dimensional
//! quantum batteries, the entropy/coherence/entanglement quantities they are
//! compared against, and runs a simulated two-photon experiment end to end:
//! state preparation, Poissonian coincidence counting, maximum-likelihood
//! tomography and bootstrap error bars.

pub mod battery;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod photonics;
pub mod pipeline;
pub mod report;
pub mod resources;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};
pub use hamiltonian::ObservableHamiltonian;
pub use state::DensityMatrix;
