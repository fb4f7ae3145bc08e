//! Occupancy scoring, the retrieval baseline and the two experiment harnesses.

mod experiments;
mod metrics;
mod panel;
mod report;

pub use experiments::{
    explore, run_experiment1, run_experiment2, Exp1Config, Exp2Config, ExplorationRun, ModelPaths,
    BASELINE, LATE, MCN_GAN, MCN_GAN_CROSS, MCN_L2, MCN_L2_CROSS, ONE_SCAN, RAW, TEST_STAGE,
};
pub use metrics::{
    baseline_best_match, best_match_index, confusion, metrics, ConfusionCounts, Metrics,
};
pub use panel::{panel, save_panel, write_png};
pub use report::{ExperimentReport, ScoreRow, Skipped, SummaryRow, REPORT_JSON, REPORT_TXT};
