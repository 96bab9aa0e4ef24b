//! Experiment runner: data per seed, pretraining, the fine-tuning
//! strategies, evaluation and reports.

mod config;
mod plots;
mod report;
mod run;

pub use config::{
    CurriculumSettings, DataConfig, ExperimentConfig, ModelConfig, ModelSelection, SlideConfig, Strategy,
    TrainingConfig,
};
pub use plots::{emit_plot_data, render_plot_tables, EPOCHS_FILE, ITERATIONS_FILE, ROC_FILE};
pub use report::{
    median, AblationEntry, AblationReport, AblationRow, BaselineComparison, CellMetrics, CellOutcome, CellReport,
    EpochPoint, RocCurves, RunReport, RUN_REPORT_SCHEMA,
};
pub use run::{
    evaluate, finetune_seed, initial_model, loss_and_accuracy, positive_scores, run_ablation_alpha,
    run_experiment, run_experiment_with_jobs, seed_data, train_phase, Evaluation, SeedData, Trained,
};
