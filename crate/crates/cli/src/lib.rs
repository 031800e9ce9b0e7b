//! File I/O and subcommands behind the `spiketrum` binary.

pub mod commands;
pub mod signals;
pub mod wav;

pub use commands::{
    cmd_bench, cmd_decode, cmd_encode, cmd_kernels, cmd_sweep, BankSource, BenchOptions,
    BenchResult, DecodeOptions, EncodeOptions, KernelsOptions, RunConfig, SweepOptions,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SPIKETRUM_THREADS";
