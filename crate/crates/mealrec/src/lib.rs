//! File formats, reports, the HTTP service and the command-line front end
//! for the `mealrec-core` planner.

pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod model;
pub mod report;
pub mod service;

pub use dataset::{fixture, load_dataset, parse_dataset, LoadError, Loaded, FIXTURE_JSON};
pub use experiment::run_experiment_parallel;
pub use report::{emit_report, ReportFormat};
