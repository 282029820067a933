//! Pulse-level simulator and parameter-tuning toolkit for Grover's quantum
//! search on a trapped-ion chain.
//!
//! The register is the half-excited manifold of `N` ions sharing `N/2`
//! excitations with a single center-of-mass phonon mode; the oracle and the
//! inversion-about-average operator are single Gaussian red-sideband pulses
//! addressing half of, respectively all of, the ions.

pub mod algorithm;
pub mod cli;
pub mod collective;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod ideal;
pub mod sparse;
pub mod tuner;

pub use error::{IgsError, Result};
