use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curriculum::{CurriculumConfig, Selection, Stage, StageConfig};
use crate::data::{BlobTaskSpec, DomainShiftSpec, SlideSpec};
use crate::error::{Error, Result};
use crate::numcore::{AdamConfig, LrSchedule};
use crate::slidelevel::SlideClassifierConfig;

/// Optimizer, schedule and batching of one training phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: AdamConfig,
    pub lr: LrSchedule,
}

impl TrainingConfig {
    pub fn stage(&self, selection: Selection) -> StageConfig {
        StageConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            lr: self.lr.clone(),
            selection,
        }
    }
}

/// Hard fraction and threshold bounds shared by both curriculum stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSettings {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl CurriculumSettings {
    pub fn for_stage(&self, stage: Stage) -> CurriculumConfig {
        CurriculumConfig {
            alpha: self.alpha,
            a: self.a,
            b: self.b,
            stage,
        }
    }
}

impl Default for CurriculumSettings {
    fn default() -> Self {
        Self {
            alpha: 0.10,
            a: 0.7,
            b: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    CurriculumI,
    #[serde(rename = "curriculum_ii")]
    CurriculumII,
    /// The optional control arm (random or easiest subset).
    Control,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::CurriculumI => "curriculum_i",
            Strategy::CurriculumII => "curriculum_ii",
            Strategy::Control => "control",
        }
    }
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::Baseline, Strategy::CurriculumI, Strategy::CurriculumII]
}

/// Which epoch's parameters a fine-tuning phase hands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelection {
    /// Highest validation accuracy; ties go to the lower validation loss,
    /// then to the earlier epoch.
    #[default]
    BestValAccuracy,
    Last,
}

/// Data generators. Every seed of the experiment re-seeds each generator
/// from a named sub-stream, so the seeds in these specs are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Pretraining distribution.
    pub source: BlobTaskSpec,
    /// Fine-tuning training distribution.
    pub target: BlobTaskSpec,
    /// Validation and test draws use `target` with these sizes and no label
    /// noise.
    pub val_per_class: usize,
    pub test_per_class: usize,
    /// Applied to a separate test draw to make the out-of-domain test set.
    pub shift: DomainShiftSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlideConfig {
    /// Training cohort; the test cohort uses the same spec with `test_count`
    /// slides.
    pub cohort: SlideSpec,
    pub test_count: usize,
    #[serde(default)]
    pub classifier: SlideClassifierConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    /// Re-draw the last two layers after pretraining.
    #[serde(default = "yes")]
    pub reinit_head: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub model_selection: ModelSelection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Absent means fine-tuning starts from a random initialization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<TrainingConfig>,
    pub baseline: TrainingConfig,
    pub curriculum1: TrainingConfig,
    pub curriculum2: TrainingConfig,
    #[serde(default)]
    pub curriculum: CurriculumSettings,
    /// Selection rule of the control arm; trained with the baseline settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slides: Option<SlideConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML rendering; this is what [`Self::hash`] digests.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seed list has duplicates".into());
        }
        if self.strategies.is_empty() {
            return bad("no strategies selected".into());
        }
        let mut strategies = self.strategies.clone();
        strategies.sort_unstable();
        strategies.dedup();
        if strategies.len() != self.strategies.len() {
            return bad("strategy list has duplicates".into());
        }
        if self.strategies.contains(&Strategy::Control) && self.control.is_none() {
            return bad("control strategy requested without a [control] section".into());
        }

        let d = &self.data;
        d.source.validate()?;
        d.target.validate()?;
        d.shift.validate()?;
        if d.target.classes != 2 {
            return bad("target task must be binary (AUC evaluation)".into());
        }
        if d.source.dim != d.target.dim || d.source.classes != d.target.classes {
            return bad("source and target tasks must share dim and classes".into());
        }
        if d.val_per_class == 0 || d.test_per_class == 0 {
            return bad("validation and test sets need samples".into());
        }
        if self.model.hidden == 0 {
            return bad("hidden width must be >= 1".into());
        }

        for (name, t) in [
            ("pretrain", self.pretrain.as_ref()),
            ("baseline", Some(&self.baseline)),
            ("curriculum1", Some(&self.curriculum1)),
            ("curriculum2", Some(&self.curriculum2)),
        ] {
            if let Some(t) = t {
                t.stage(Selection::Full)
                    .validate()
                    .map_err(|e| Error::Config(format!("[{name}]: {e}")))?;
            }
        }
        for stage in [Stage::CurriculumI, Stage::CurriculumII] {
            self.curriculum.for_stage(stage).validate()?;
        }
        if let Some(c) = &self.control {
            if matches!(c, Selection::Curriculum(_)) {
                return bad("control must be full, random_subset or easiest_subset".into());
            }
            c.validate()?;
        }
        if let Some(s) = &self.slides {
            s.cohort.validate()?;
            if s.cohort.patch.dim != d.target.dim {
                return bad("slide patches must match the target feature width".into());
            }
            if s.test_count == 0 {
                return bad("slide test cohort is empty".into());
            }
        }
        Ok(())
    }

    /// Copy restricted to `seeds`.
    pub fn with_seeds(&self, seeds: Vec<u64>) -> Self {
        Self {
            seeds,
            ..self.clone()
        }
    }
}
