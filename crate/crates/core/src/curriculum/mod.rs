//! Hardness-aware dynamic curriculum fine-tuning.
//!
//! Every mini-batch is scored by the live model, ranked by per-sample loss,
//! and the update is applied either to a hard subset or to a larger set
//! depending on how much of the batch loss the hard subset carries relative
//! to a threshold that decays linearly over each epoch.

mod select;
mod stage;
mod threshold;

pub use select::{
    decide_update_stage1, decide_update_stage2, hard_count, rank_by_loss, select_top_k,
    select_top_k_prime, BatchHardness, Branch, UpdateDecision,
};
pub use stage::{
    epoch_order, fine_tune, run_hadcl, run_stage, run_stage_observed, run_stage_with, stage2_seed,
    CurriculumConfig, HadclOutcome, IterationRecord, IterationTrace, Selection, Stage, StageConfig,
    StageObserver, StageReport, REPORT_SCHEMA_VERSION,
};
pub use threshold::ThresholdSchedule;
