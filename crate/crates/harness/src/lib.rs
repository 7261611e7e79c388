//! Configuration, artifact output and cross-route verification for
//! `spikewin-core`.

pub mod config;
pub mod dense;
pub mod output;
pub mod suite;

pub use config::{load_config, save_config, ConfigError, ExperimentConfig};
pub use output::{Check, Summary};
pub use suite::{run_suite, Suite};
