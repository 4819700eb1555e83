//! Dataset and run-configuration loading.
//!
//! A run is described by a JSON [`RunConfig`]; the CSV it points at is read
//! into a [`Dataset`] whose units are already split into treated and control
//! groups by the configured treatment rule.

mod config;
mod dataset;

pub use config::{load_config, CmpOp, Condition, Literal, NSpec, RunConfig, TreatmentRule};
pub use dataset::{load_dataset, load_dataset_from_reader, CovValue, Dataset, Unit};
