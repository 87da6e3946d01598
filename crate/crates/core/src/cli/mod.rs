//! Scenario configuration, batch execution and output layout.

mod batch;
mod config;
mod scenario;

pub use batch::{run_batch, run_scenario, scenario_dir, BatchReport, CONFIG_ECHO};
pub use config::{parse_config, parse_config_str, ConfigError};
pub use scenario::{DemandSource, NetworkSource, ProfileSource, Scenario, TrafficConfig};
