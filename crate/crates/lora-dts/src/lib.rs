//! Sweeps, file formats and the command-line front end for
//! [`lora_dts_core`].
//!
//! * [`config`]: TOML manifests and grid expansion
//! * [`sweep`]: parallel, order-independent grid evaluation
//! * [`output`]: CSV and JSON result tables
//! * [`plot`]: SVG figures
//! * [`iq`]: raw I/Q dumps
//! * [`cli`]: the `lora-dts` binary

pub mod cli;
pub mod config;
pub mod iq;
pub mod output;
pub mod plot;
pub mod sweep;

pub use config::{ConfigError, Manifest};
pub use sweep::{run_sweep, CellResult};
