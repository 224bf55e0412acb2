//! The end-to-end update loop, multi-seed suites and trace replay.

mod checks;
mod episode;
mod preview;
mod replay;
mod suite;

pub use checks::{
    episode_reports, group_analysis, group_constants, trace_convergence_lhs, trace_convergence_rhs,
    AnalysisSettings, GroupAnalysis,
};
pub use episode::{run_episode, InferenceSource, Objective, RunConfig};
pub use preview::{preview_schedule, SchedulePreview};
pub use replay::{replay_decisions, resimulate, ReplayReport};
pub use suite::{run_suite, CrnCheck, SuiteResult, SummaryRow};
