//! Configuration, file formats and subcommands of the `qillum` binary.

pub mod commands;
pub mod config;
pub mod table;

pub use config::{Layers, Preset, RunConfig};
