//! Scenario-driven experiment runner.
//!
//! A scenario file names an experiment kind, the equation data and a grid.
//! [`run::run_scenario`] builds the fields, solves on every refinement level,
//! runs the matching checkers and returns a [`run::RunReport`] that
//! [`output::write_report`] serializes deterministically.

pub mod fields;
pub mod output;
pub mod run;
pub mod scenario;

pub use run::{run_scenario, RunReport, Status};
pub use scenario::{parse_scenario, parse_scenario_str, ConfigError, Kind, Scenario};
