use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::select::{
    decide_update_stage1, decide_update_stage2, hard_count, rank_by_loss, BatchHardness, Branch,
    UpdateDecision,
};
use super::threshold::{validate_bounds, ThresholdSchedule};
use crate::data::{derive_seed, Dataset};
use crate::error::{DivergenceReport, Error, Result};
use crate::numcore::{per_sample_cross_entropy, AdamConfig, LrSchedule, Matrix, MlpModel, OptimizerState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Easy-to-hard: top-K versus the whole batch.
    CurriculumI,
    /// Hard-to-very-hard: top-K′ versus top-K.
    #[serde(rename = "curriculum_ii")]
    CurriculumII,
}

/// Hard fraction `alpha`, threshold bounds `(a, b)` and which stage to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub stage: Stage,
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        validate_bounds(self.a, self.b)
    }

    pub fn schedule(&self, iterations: usize) -> Result<ThresholdSchedule> {
        ThresholdSchedule::new(self.a, self.b, iterations)
    }
}

/// Which samples of a mini-batch drive the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    /// Plain fine-tuning on every sample.
    Full,
    Curriculum(CurriculumConfig),
    /// Control: a uniformly random subset of size `max(1, ⌊α·B⌋)`.
    RandomSubset { alpha: f64 },
    /// Control: the `max(1, ⌊α·B⌋)` lowest-loss samples.
    EasiestSubset { alpha: f64 },
}

impl Selection {
    pub fn validate(&self) -> Result<()> {
        match self {
            Selection::Full => Ok(()),
            Selection::Curriculum(c) => c.validate(),
            Selection::RandomSubset { alpha } | Selection::EasiestSubset { alpha } => {
                if *alpha > 0.0 && *alpha <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation(format!("alpha must lie in (0, 1], got {alpha}")))
                }
            }
        }
    }
}

/// Everything one training stage needs besides the model and the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub lr: LrSchedule,
    pub selection: Selection,
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch size must be >= 1"));
        }
        self.optimizer.validate()?;
        self.lr.validate()?;
        self.selection.validate()
    }

    pub fn tag(&self) -> &'static str {
        match self.selection {
            Selection::Full => "plain",
            Selection::Curriculum(CurriculumConfig {
                stage: Stage::CurriculumI,
                ..
            }) => "theta1",
            Selection::Curriculum(CurriculumConfig {
                stage: Stage::CurriculumII,
                ..
            }) => "theta2",
            Selection::RandomSubset { .. } => "random_subset",
            Selection::EasiestSubset { .. } => "easiest_subset",
        }
    }
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One logged training iteration. `t` runs `1..=T` within each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epoch: usize,
    pub t: usize,
    pub thres: Option<f64>,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub branch: Branch,
    /// The two sides of the update condition, when one was evaluated.
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    /// Mean loss over the whole batch, before the update.
    pub batch_loss: f64,
    /// Mean loss over the samples the update used.
    pub mean_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub schema_version: u32,
    /// `theta1`, `theta2`, `plain` or a control tag.
    pub tag: String,
    pub iterations_per_epoch: usize,
    pub records: Vec<IterationRecord>,
}

impl StageReport {
    /// One JSON object per line: a header record, then one per iteration.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "schema_version": self.schema_version,
            "tag": self.tag,
            "iterations_per_epoch": self.iterations_per_epoch,
        });
        writeln!(out, "{header}")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Numeric(e.to_string()))?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u32,
            tag: String,
            iterations_per_epoch: usize,
        }
        let mut lines = input.lines();
        let bad = |line: usize, e: serde_json::Error| Error::Format {
            offset: line as u64,
            message: format!("line {line}: {e}"),
        };
        let first = lines
            .next()
            .ok_or_else(|| Error::Format {
                offset: 0,
                message: "empty stage report".into(),
            })??;
        let header: Header = serde_json::from_str(&first).map_err(|e| bad(1, e))?;
        if header.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Format {
                offset: 0,
                message: format!("unsupported stage report schema {}", header.schema_version),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| bad(i + 2, e))?);
        }
        Ok(Self {
            schema_version: header.schema_version,
            tag: header.tag,
            iterations_per_epoch: header.iterations_per_epoch,
            records,
        })
    }
}

/// What the driver saw and did on one iteration; handed to observers.
#[derive(Debug)]
pub struct IterationTrace<'a, T> {
    pub epoch: usize,
    pub t: usize,
    /// Dataset row indices of the batch, in batch order.
    pub batch_rows: &'a [usize],
    pub hardness: Option<&'a BatchHardness<T>>,
    pub decision: Option<&'a UpdateDecision>,
    /// Batch positions the update used; `None` means the whole batch.
    pub update_set: Option<&'a [usize]>,
}

/// Seeded permutation of `0..n` for `epoch`; identical for every stage
/// that shares `seed`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn run_stage<T: Scalar>(
    init: &MlpModel<T>,
    data: &Dataset,
    config: &StageConfig,
    seed: u64,
) -> Result<(MlpModel<T>, StageReport)> {
    run_stage_observed(init, data, config, seed, |_| {})
}

/// Plain fine-tuning with the same driver (no sample selection).
pub fn fine_tune<T: Scalar>(
    init: &MlpModel<T>,
    data: &Dataset,
    config: &StageConfig,
    seed: u64,
) -> Result<(MlpModel<T>, StageReport)> {
    let config = StageConfig {
        selection: Selection::Full,
        ..config.clone()
    };
    run_stage(init, data, &config, seed)
}

/// Hooks into a running stage.
pub trait StageObserver<T> {
    /// Called after each iteration's decision, before the parameter update.
    fn iteration(&mut self, _trace: &IterationTrace<'_, T>) {}

    /// Called with the live model after every epoch's last update.
    fn epoch_end(&mut self, _epoch: usize, _model: &MlpModel<T>) -> Result<()> {
        Ok(())
    }
}

struct IterationFn<F>(F);

impl<T, F: FnMut(&IterationTrace<'_, T>)> StageObserver<T> for IterationFn<F> {
    fn iteration(&mut self, trace: &IterationTrace<'_, T>) {
        (self.0)(trace)
    }
}

/// Runs one stage, calling `observer` after each iteration's decision and
/// before the parameter update.
pub fn run_stage_observed<T, F>(
    init: &MlpModel<T>,
    data: &Dataset,
    config: &StageConfig,
    seed: u64,
    observer: F,
) -> Result<(MlpModel<T>, StageReport)>
where
    T: Scalar,
    F: FnMut(&IterationTrace<'_, T>),
{
    run_stage_with(init, data, config, seed, &mut IterationFn(observer))
}

/// The stage driver.
///
/// Per iteration: take the next fixed-size batch of the epoch's seeded
/// shuffle (the short tail is dropped), score every sample with the live
/// model, rank, select, decide, then take one Adam step on the mean loss of
/// the chosen set.
pub fn run_stage_with<T, O>(
    init: &MlpModel<T>,
    data: &Dataset,
    config: &StageConfig,
    seed: u64,
    observer: &mut O,
) -> Result<(MlpModel<T>, StageReport)>
where
    T: Scalar,
    O: StageObserver<T>,
{
    config.validate()?;
    if data.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if data.dim() != init.input_dim() {
        return Err(Error::dimension("dataset width", init.input_dim(), data.dim()));
    }
    if data.classes > init.classes() {
        return Err(Error::dimension("model classes", data.classes, init.classes()));
    }
    let batch = config.batch_size;
    let iterations = data.len() / batch;
    if iterations == 0 {
        return Err(Error::validation(format!(
            "batch size {batch} exceeds training set of {}",
            data.len()
        )));
    }
    let schedule = match config.selection {
        Selection::Curriculum(c) => Some(c.schedule(iterations)?),
        _ => None,
    };
    let tag = config.tag();

    let features: Matrix<T> = data.features.cast();
    let mut model = init.clone();
    let mut optimizer = OptimizerState::new(&model, config.optimizer);
    let mut control_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "control-subset"));
    let mut records = Vec::with_capacity(config.epochs * iterations);
    let mut last_loss = None;

    for epoch in 0..config.epochs {
        let lr = config.lr.lr_at(epoch);
        let order = epoch_order(data.len(), seed, epoch);
        for (step, rows) in order.chunks_exact(batch).enumerate() {
            let t = step + 1;
            let diverged = |detail: String, last: Option<f64>| {
                Error::Divergence(Box::new(DivergenceReport {
                    stage: tag.to_string(),
                    epoch,
                    iteration: t,
                    last_finite_loss: last,
                    detail,
                }))
            };

            let x = features.select_rows(rows)?;
            let y: Vec<usize> = rows.iter().map(|&i| data.labels[i]).collect();
            let logits = model.forward(&x)?;
            let losses = per_sample_cross_entropy(&logits, &y)?;
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(diverged("non-finite per-sample loss".into(), last_loss));
            }
            let batch_loss = losses.iter().copied().sum::<T>().as_f64() / batch as f64;

            let mut record = IterationRecord {
                epoch,
                t,
                thres: None,
                k: None,
                k_prime: None,
                branch: Branch::Total,
                lhs: None,
                rhs: None,
                batch_loss,
                mean_loss: batch_loss,
                lr,
            };

            let (hardness, decision, update_set): (Option<BatchHardness<T>>, Option<UpdateDecision>, Option<Vec<usize>>) =
                match config.selection {
                    Selection::Full => (None, None, None),
                    Selection::Curriculum(c) => {
                        let thres = schedule.as_ref().expect("curriculum has a schedule").threshold(t)?;
                        let (h, d) = match c.stage {
                            Stage::CurriculumI => {
                                let h = BatchHardness::compute(losses, c.alpha, None)?;
                                let d = decide_update_stage1(&h, thres);
                                (h, d)
                            }
                            Stage::CurriculumII => {
                                let h = BatchHardness::compute(losses, c.alpha, Some(thres))?;
                                let d = decide_update_stage2(&h, thres)?;
                                (h, d)
                            }
                        };
                        let set = match d.branch {
                            Branch::Total => None,
                            Branch::TopK => Some(h.top_k.clone()),
                            Branch::TopKPrime => h.top_k_prime.clone(),
                            Branch::Control => unreachable!("curriculum never picks the control branch"),
                        };
                        record.thres = Some(thres);
                        record.k = Some(h.top_k.len());
                        record.k_prime = h.top_k_prime.as_ref().map(Vec::len);
                        record.branch = d.branch;
                        record.lhs = Some(d.lhs);
                        record.rhs = Some(d.rhs);
                        (Some(h), Some(d), set)
                    }
                    Selection::RandomSubset { alpha } => {
                        let k = hard_count(alpha, batch);
                        let mut pos: Vec<usize> = (0..batch).collect();
                        pos.shuffle(&mut control_rng);
                        pos.truncate(k);
                        record.k = Some(k);
                        record.branch = Branch::Control;
                        (None, None, Some(pos))
                    }
                    Selection::EasiestSubset { alpha } => {
                        let k = hard_count(alpha, batch);
                        let ranked = rank_by_loss(&losses)?;
                        record.k = Some(k);
                        record.branch = Branch::Control;
                        (None, None, Some(ranked[batch - k..].to_vec()))
                    }
                };

            // A set covering the whole batch is the plain update; the unmasked
            // path keeps it bit-identical to fine-tuning.
            let update_set = update_set.filter(|s| s.len() < batch);

            observer.iteration(&IterationTrace {
                epoch,
                t,
                batch_rows: rows,
                hardness: hardness.as_ref(),
                decision: decision.as_ref(),
                update_set: update_set.as_deref(),
            });

            let (grads, mean_loss) = model.backward(&x, &y, update_set.as_deref())?;
            let mean_loss = mean_loss.as_f64();
            if !mean_loss.is_finite() {
                return Err(diverged("non-finite update loss".into(), last_loss));
            }
            optimizer
                .step(&mut model, &grads, lr)
                .map_err(|e| diverged(e.to_string(), Some(mean_loss)))?;
            record.mean_loss = mean_loss;
            last_loss = Some(mean_loss);
            records.push(record);
        }
        observer.epoch_end(epoch, &model)?;
    }

    let report = StageReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tag: tag.to_string(),
        iterations_per_epoch: iterations,
        records,
    };
    Ok((model, report))
}

/// Result of the two-stage procedure.
#[derive(Debug, Clone)]
pub struct HadclOutcome<T> {
    pub theta1: MlpModel<T>,
    pub theta2: MlpModel<T>,
    pub stage1: StageReport,
    pub stage2: StageReport,
}

/// Curriculum-I from `pretrained`, then Curriculum-II initialized from its
/// result. Stage 1 shuffles with `seed` (so it pairs with a plain run on the
/// same seed); stage 2 uses a derived stream.
pub fn run_hadcl<T: Scalar>(
    pretrained: &MlpModel<T>,
    data: &Dataset,
    stage1: &StageConfig,
    stage2: &StageConfig,
    seed: u64,
) -> Result<HadclOutcome<T>> {
    let expect_stage = |cfg: &StageConfig, want: Stage| match cfg.selection {
        Selection::Curriculum(c) if c.stage == want => Ok(()),
        _ => Err(Error::validation(format!("config must select the {want:?} curriculum"))),
    };
    expect_stage(stage1, Stage::CurriculumI)?;
    expect_stage(stage2, Stage::CurriculumII)?;
    stage2.validate()?;

    let (theta1, report1) = run_stage(pretrained, data, stage1, seed)?;
    let (theta2, report2) = run_stage(&theta1, data, stage2, stage2_seed(seed))?;
    Ok(HadclOutcome {
        theta1,
        theta2,
        stage1: report1,
        stage2: report2,
    })
}

/// Shuffle seed of the second stage for a run seeded with `seed`.
pub fn stage2_seed(seed: u64) -> u64 {
    derive_seed(seed, "curriculum-ii")
}
