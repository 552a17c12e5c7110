//! Experiment execution: initial designs, the BO loop, recommendations and
//! ground-truth scoring.

mod recommend;
mod run;

pub use recommend::{recommend, RecommendSpec, Recommendation};
pub use run::{
    checkpoint, initial_design, run_bo, Checkpoint, Phase, RunConfig, RunOutcome, TraceRecord, TraceSink, SCORE_SAMPLES,
};
