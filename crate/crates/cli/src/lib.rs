//! Command-line pipeline around `gl2census-core`: a resumable curve store,
//! parallel classification, and CSV reports for the census, the family
//! densities and the pair sieve.

pub mod args;
pub mod commands;
pub mod report;
pub mod store;

pub use args::{Cli, Command, CommonArgs, SieveArgs};
pub use commands::{run, CliError, RunConfig};
pub use store::{read_store, scan, StoreContents, StoreError, StoreHeader, StoreRecord, StoreWriter};
