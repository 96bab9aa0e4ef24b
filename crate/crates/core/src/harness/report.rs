use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Strategy;
use crate::curriculum::StageReport;
use crate::error::{Error, Result};
use crate::metrics::AucEstimate;

pub const RUN_REPORT_SCHEMA: u32 = 1;

/// Validation metrics after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochPoint {
    pub epoch: usize,
    /// Mean of the epoch's pre-update batch losses.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Two-sided paired DeLong p-values against the same seed's baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub in_domain: f64,
    pub ood: f64,
    pub slide: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    /// Epoch whose parameters were evaluated; `None` for a zero-epoch phase.
    pub selected_epoch: Option<usize>,
    pub val_accuracy: f64,
    pub val_auc: AucEstimate,
    pub test_accuracy: f64,
    pub in_domain: AucEstimate,
    pub ood_accuracy: f64,
    pub ood: AucEstimate,
    pub slide: Option<AucEstimate>,
    pub vs_baseline: Option<BaselineComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurves {
    pub in_domain: Vec<(f64, f64)>,
    pub ood: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum CellOutcome {
    Ok {
        metrics: CellMetrics,
        epochs: Vec<EpochPoint>,
        log: StageReport,
        roc: RocCurves,
    },
    Failed {
        reason: String,
    },
}

/// One (strategy, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

impl CellReport {
    pub fn metrics(&self) -> Option<&CellMetrics> {
        match &self.outcome {
            CellOutcome::Ok { metrics, .. } => Some(metrics),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, CellOutcome::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub wall_clock_seconds: f64,
    /// Ordered by seed (config order), then strategy (config order).
    pub cells: Vec<CellReport>,
}

impl RunReport {
    pub fn empty(config_hash: String) -> Self {
        Self {
            schema_version: RUN_REPORT_SCHEMA,
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds: 0.0,
            cells: Vec::new(),
        }
    }

    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(CellReport::is_ok)
    }

    pub fn cell(&self, strategy: Strategy, seed: u64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.strategy == strategy && c.seed == seed)
    }

    /// Metrics of every successful cell of `strategy`, in seed order.
    pub fn metrics_for(&self, strategy: Strategy) -> Vec<(u64, &CellMetrics)> {
        self.cells
            .iter()
            .filter(|c| c.strategy == strategy)
            .filter_map(|c| c.metrics().map(|m| (c.seed, m)))
            .collect()
    }

    /// Copy with every wall-clock field zeroed: two runs of the same config
    /// agree on this byte for byte.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_clock_seconds = 0.0;
        for c in &mut r.cells {
            c.wall_clock_seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| Error::Format {
            offset: e.column() as u64,
            message: format!("run report line {}: {e}", e.line()),
        })?;
        if report.schema_version != RUN_REPORT_SCHEMA {
            return Err(Error::Format {
                offset: 0,
                message: format!("unsupported run report schema {}", report.schema_version),
            });
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes `summary.json`, `cells.jsonl` (one line per cell, without the
    /// iteration logs) and `logs/<strategy>_seed<seed>.jsonl`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("logs"))?;
        std::fs::write(dir.join("summary.json"), self.to_json()? + "\n")?;
        let mut cells = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.jsonl"))?);
        for c in &self.cells {
            let line = match &c.outcome {
                CellOutcome::Ok { metrics, .. } => serde_json::json!({
                    "strategy": c.strategy,
                    "seed": c.seed,
                    "status": "ok",
                    "metrics": metrics,
                    "wall_clock_seconds": c.wall_clock_seconds,
                }),
                CellOutcome::Failed { reason } => serde_json::json!({
                    "strategy": c.strategy,
                    "seed": c.seed,
                    "status": "failed",
                    "reason": reason,
                    "wall_clock_seconds": c.wall_clock_seconds,
                }),
            };
            writeln!(cells, "{line}")?;
            if let CellOutcome::Ok { log, .. } = &c.outcome {
                let path = dir.join("logs").join(format!("{}_seed{}.jsonl", c.strategy.name(), c.seed));
                log.write_jsonl(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            }
        }
        cells.flush()?;
        Ok(())
    }
}

/// One row of the α-sweep summary; medians over successful seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub curriculum_i_val_accuracy: Option<f64>,
    pub curriculum_i_val_auc: Option<f64>,
    pub curriculum_ii_val_accuracy: Option<f64>,
    pub curriculum_ii_val_auc: Option<f64>,
    pub curriculum_ii_ood_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub alpha: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub entries: Vec<AblationEntry>,
    pub summary: Vec<AblationRow>,
}

impl AblationReport {
    pub fn all_ok(&self) -> bool {
        self.entries.iter().all(|e| e.report.all_ok())
    }
}

/// Median (mean of the middle pair for even lengths); `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
