//! Text formats, report writers and configuration files for the `hho`
//! command-line driver. The numerics live in [`hho_core`].

pub mod config;
pub mod dump;
pub mod io;
pub mod report;

pub use hho_core;
