//! Verification suites driven by declarative config files.

pub mod config;
pub mod report;
pub mod suites;

pub use config::{load_config, load_config_with_seed, parse_config, random_psd, ExperimentConfig, Suite};
pub use report::{CheckRecord, SuiteReport};
pub use config::{Auto, InitRule};
pub use suites::{cross_rank, flow_schedule, random_params, run_suite, run_suite_in_memory, RandomParams, SuiteOutput};
