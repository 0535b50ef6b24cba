//! Configuration-driven runs, sweeps and comparison of their results.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod output;

pub use compare::{compare, load_run, RunRow};
pub use config::{Experiment, RunConfig};
pub use experiment::{child_seed, execute, expand_sweep, run_experiment, sweep, RunResult, SweepPoint};
