//! Batch front-end for the vorticity BSDE solver: config parsing, the
//! `oracle`, `solve`, `compare` and `diagnose` commands, and run manifests.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod psi;

pub use commands::{run, Command, RunOutcome};

/// Directory searched for config files given by relative path, and for
/// `<command>.cfg` when no path is given.
pub const CONFIG_DIR_ENV: &str = "VBSDE_CONFIG_DIR";
