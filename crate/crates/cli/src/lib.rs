//! Command-line front end for `mpg-core`: image and trace file formats, the
//! `phantom`, `corrupt`, `denoise` and `bench` commands, and the argument
//! grammar of the `mpg` binary.

pub mod args;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod trace;

pub use args::run;
pub use error::{CliError, CliResult};
