//! Experiment harness behind the `esc` binary.
//!
//! Every experiment returns its CSV rows together with the files needed to
//! recompute them (preferences, designs, and a manifest tying rows to files).

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Scenario, ScenarioConfig};
pub use experiments::{
    gen_data, run_continuous, run_demo, run_experiment, run_fig1, run_fig4, Experiment,
};
pub use report::{Artifact, CsvRow, ManifestEntry};
