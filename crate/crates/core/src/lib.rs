//! Numerical toolkit for bosonic Fock states in a truncated Fock space:
//! genuine quantum non-Gaussianity certification, displacement-sensing
//! Fisher information under loss, and qubit-oscillator pulse synthesis
//! with simulated readout.

pub mod channels;
pub mod control;
pub mod error;
pub mod hilbert;
pub mod io;
pub mod metrology;
pub mod optim;
pub mod qng;

pub use error::{FockError, Result};
pub use hilbert::{
    CoreStateParams, DensityMatrix, EdgeChecked, FockBasis, FockDistribution, StateVector,
};
