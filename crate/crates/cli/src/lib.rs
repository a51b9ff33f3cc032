//! Command-line front end: system documents, certificates, CSV export.

pub mod commands;
pub mod document;
pub mod error;
pub mod format;

pub use error::CliError;
