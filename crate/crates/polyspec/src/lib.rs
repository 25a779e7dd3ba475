//! Command-line front end: argument handling, file formats, thread pool and
//! the built-in self test. The numerics live in `polyspec-core`.

mod cli;
mod commands;
mod error;
mod io;
mod parse;
mod selftest;

pub use cli::run;
pub use error::CliError;
