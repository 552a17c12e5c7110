//! File formats, experiment execution and reports on top of `relbo-core`.
//!
//! * [`config`]: TOML experiment files.
//! * [`trace`]: append-only CSV traces, one per repeat.
//! * [`experiment`]: parallel repeats with resumption and a JSON manifest.
//! * [`score`]: re-scoring the recommendations of a trace.
//! * [`report`]: aggregated curves, SVG figures and a markdown summary.

pub mod config;
pub mod experiment;
pub mod report;
pub mod score;
pub mod trace;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Manifest, Overrides};
