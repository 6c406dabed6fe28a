//! Experiment harness: configuration, the experiment suite, comparison
//! baselines and result emission.

pub mod baselines;
pub mod config;
pub mod experiments;
pub mod oracles;
pub mod output;

pub use config::{load_config, SimConfig};
pub use experiments::{run_experiment, EXPERIMENTS};
pub use output::{emit_results, Format, ResultTable};
