//! Configuration parsing and scenario orchestration for the `cns1d` binary.

pub mod config;
pub mod scenario;

pub use config::{parse_config, ConfigError, RunConfig, ScenarioKind, SweepAxis};
pub use scenario::{run_scenario, ExitStatus, RunnerError};
