//! Command-line front end: index building, matching, annotation and
//! nearest-definition probing.
//!
//! Exit statuses: 0 success, 2 input or parse failure, 3 nothing matchable,
//! 4 annotation does not fit.

pub mod commands;
pub mod result;

pub use commands::{run, Cli, CliError};
pub use result::ResultDocument;
