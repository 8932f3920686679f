//! Scenario configs and Monte Carlo trials.
//!
//! One arm instance per seed: its joint biases are drawn once, the insertion pose is
//! recorded with that arm at IC1 and the target placed where its tip really was. Every
//! strategy and initial condition is then tried with that instance.

mod builtin;
mod config;
mod reference;
mod report;
mod trial;

pub use builtin::{needle, usb};
pub use config::{CropBox, ObjectSpec, ScanPlan, ScenarioConfig, TargetSpec};
pub use reference::{make_reference_cloud, make_reference_cloud_file};
pub use report::{run_experiment, run_with, ConditionSummary, ExperimentReport, StrategySummary};
pub use trial::{run_trial, Harness, Strategy, TraceEvent, TrialRecord};
