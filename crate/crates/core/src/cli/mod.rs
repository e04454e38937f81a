//! Configuration, scenario orchestration and CSV output.

pub mod config;
pub mod output;
pub mod scenario;

pub use config::{parse_config, serialize_config, RunConfig};
pub use scenario::{run_scenario, Overrides, Summary};
