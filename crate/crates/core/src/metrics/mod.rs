//! Accuracy, rank-based ROC AUC, and DeLong variance, confidence intervals
//! and paired tests.

mod auc;
mod delong;

pub use auc::{accuracy, auc, midranks, roc_points, ScoredOutcomes};
pub use delong::{delong_ci, delong_paired_test, AucEstimate, PairedAucTest};
