//! Simulation engine for hybrid probabilistic-snowball sampling on
//! cliques-and-blocks social networks.
//!
//! The pipeline of one run is: [`netgen`] builds a population,
//! [`recruitment`] draws the golden random sample and grows the four hybrid
//! scenarios from it, and [`evaluation`] compares the estimates across many
//! runs produced by [`harness`].

pub mod distributions;
pub mod evaluation;
pub mod harness;
pub mod mixing;
pub mod netgen;
pub mod plot;
pub mod recruitment;
pub mod report;
pub mod stats;

pub use evaluation::{evaluate, EvaluationReport, RunResult};
pub use harness::{execute_run, execute_sweep, sample_run_config, RunConfig, SweepManifest};
pub use mixing::MixingMatrix;
pub use netgen::{NetworkParams, Population};
pub use recruitment::Scenario;
