//! Library surface of the `relaxcrb` CLI: configuration parsing, command
//! orchestration and report emission.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_compare, cmd_evaluate, cmd_optimize, cmd_simulate, run_command, CmdOutput};
pub use config::{parse_config, Command, ConfigError, OutputFormat, RunConfig};
pub use report::{format_f64, print_tables, write_tables, Cell, ReportTable};
