//! Complex-baseband simulation of LoRa direct-to-satellite uplinks under
//! LEO Doppler and AWGN.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! pieces: chirp modem, Doppler profiles, channel, the Doppler estimators
//! and the Monte Carlo trial logic. File formats, the CLI and parallel
//! sweeps live in the `lora-dts` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod modem;
pub mod orbit;
pub mod sim;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use estimators::{CompensationPlan, EstimateReport, EstimatorKind, Segment};
pub use modem::{BasebandSignal, ChirpKind, FrameLayout, Modem, ModemConfig, SymbolSequence};
pub use orbit::{DopplerProfile, OrbitGeometry};
pub use sim::{NoiseSpec, ScenarioConfig, SerPoint, Simulator, TrialOutcome};
