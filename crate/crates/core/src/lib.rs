//! Simulator for two fixed-frequency transmon qubits coupled through a
//! double-transmon coupler: spectra versus coupler flux, flux-pulse gate
//! dynamics, gate metrics and calibration.

pub mod calibration;
pub mod constants;
pub mod device;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod metrics;
pub mod ode;
pub mod operators;
pub mod optimize;
pub mod pulses;
pub mod sparse;
pub mod spectrum;

pub use device::{DerivedParams, DeviceParams};
pub use error::{Error, Result};
pub use operators::{HamiltonianModel, OperatorSet};
