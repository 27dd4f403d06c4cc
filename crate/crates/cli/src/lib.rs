//! Batch driver around the bead-chain cilium model: configuration loading,
//! the simulate/optimize/gradcheck/sweep commands, and their file outputs.

pub mod commands;
pub mod config;

pub use commands::{
    apply_overrides, cmd_gradcheck, cmd_optimize, cmd_simulate, cmd_sweep, validate_overridden,
    GradcheckOutput, OptimizeOutput, SimulateSummary, SweepOutput,
};
pub use config::{load_config, parse_config, save_config, CliError, InitialControlSpec, RunConfig};
