use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "gl2census", version, about = "Count GL2(F_ell)-extensions through division fields of elliptic curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write every curve of height at most --height-bound to the store.
    Enumerate(CommonArgs),
    /// Classify the store's curves in place (resumable).
    Classify(CommonArgs),
    /// Bucket counts M_hat and F_hat at each --grid cutoff, as CSV.
    Census(CommonArgs),
    /// Nested family counts at each height in --grid, as CSV.
    Density(CommonArgs),
    /// Mean-square pair statistic at each prime bound in --grid, as CSV.
    Sieve(SieveArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 5)]
    pub ell: u64,
    #[arg(long)]
    pub height_bound: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub window_bound: u64,
    #[arg(long, default_value_t = 1000)]
    pub probe_bound: u64,
    /// Exponent of ell in the discriminant bound [default: 2 #GL2(F_ell)].
    #[arg(long)]
    pub cexp: Option<u64>,
    /// Comma-separated cutoffs; products such as 2^4*31 are accepted.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "curves.store")]
    pub store: PathBuf,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SieveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    pub d: u64,
    #[arg(long, default_value_t = 0)]
    pub t1: u64,
    #[arg(long, default_value_t = 0)]
    pub t2: u64,
}
