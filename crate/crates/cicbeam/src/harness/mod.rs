//! Configuration and experiment drivers behind the `cicbeam` CLI.

pub mod config;
pub mod experiments;

pub use config::{parse_config, parse_config_str, ExperimentConfig, ExperimentKind};
pub use experiments::{
    run_convergence, run_dof_vs_m, run_single, run_sweep_power, run_sweep_theta, summarize, DofRow, SweepPoint,
    SweepRow,
};
