//! Simulation and design tools for dispersive qubit readout through a readout
//! resonator coupled to a dedicated Purcell filter.
//!
//! Frequencies are angular (rad/s) and times are in seconds throughout the API;
//! file formats and the `readout` command line use Hz.

pub mod calibration;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lindblad;
pub mod lm;
pub mod model;
pub mod normal_modes;
pub mod presets;
pub mod shots;
pub mod snr;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result, Warning};
pub use model::{derive_dispersive, n_crit, DeviceParams, DispersiveDerived, QubitState};
pub use normal_modes::{approx_modes, exact_modes, NormalModes};
