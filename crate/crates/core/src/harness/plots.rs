use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::report::{CellOutcome, RunReport};
use crate::error::Result;

pub const ITERATIONS_FILE: &str = "iterations.tsv";
pub const EPOCHS_FILE: &str = "epochs.tsv";
pub const ROC_FILE: &str = "roc.tsv";

const ITERATIONS_HEADER: &str = "strategy\tseed\tepoch\tt\tthres\tk\tk_prime\tbranch\tlhs\trhs\tbatch_loss\tmean_loss\tlr";
const EPOCHS_HEADER: &str = "strategy\tseed\tepoch\ttrain_loss\tval_loss\tval_accuracy";
const ROC_HEADER: &str = "strategy\tseed\tset\tfpr\ttpr";

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

/// Renders the three tab-separated tables: per-iteration curriculum log,
/// per-epoch curves and ROC points. Failed cells contribute no rows; floats
/// use the shortest round-trip representation.
pub fn render_plot_tables(report: &RunReport) -> [(&'static str, String); 3] {
    let mut iterations = format!("{ITERATIONS_HEADER}\n");
    let mut epochs = format!("{EPOCHS_HEADER}\n");
    let mut roc = format!("{ROC_HEADER}\n");
    for cell in &report.cells {
        let CellOutcome::Ok { epochs: points, log, roc: curves, .. } = &cell.outcome else {
            continue;
        };
        let key = format!("{}\t{}", cell.strategy.name(), cell.seed);
        for r in &log.records {
            let branch = serde_json::to_value(r.branch).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let _ = writeln!(
                iterations,
                "{key}\t{}\t{}\t{}\t{}\t{}\t{branch}\t{}\t{}\t{:?}\t{:?}\t{:?}",
                r.epoch,
                r.t,
                opt(r.thres),
                opt(r.k),
                opt(r.k_prime),
                opt(r.lhs),
                opt(r.rhs),
                r.batch_loss,
                r.mean_loss,
                r.lr
            );
        }
        for p in points {
            let _ = writeln!(epochs, "{key}\t{}\t{:?}\t{:?}\t{:?}", p.epoch, p.train_loss, p.val_loss, p.val_accuracy);
        }
        for (set, points) in [("in_domain", &curves.in_domain), ("ood", &curves.ood)] {
            for (fpr, tpr) in points {
                let _ = writeln!(roc, "{key}\t{set}\t{fpr:?}\t{tpr:?}");
            }
        }
    }
    [(ITERATIONS_FILE, iterations), (EPOCHS_FILE, epochs), (ROC_FILE, roc)]
}

/// Writes the plot tables into `dir` and returns their paths.
pub fn emit_plot_data(report: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, body) in render_plot_tables(report) {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}
