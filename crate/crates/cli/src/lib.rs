//! File formats, CSV handling and subcommands for the `pai` binary.

pub mod commands;
pub mod csv_io;
pub mod error;
pub mod files;
