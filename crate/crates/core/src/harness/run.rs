use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelSelection, Strategy};
use super::report::{
    median, AblationEntry, AblationReport, AblationRow, BaselineComparison, CellMetrics, CellOutcome,
    CellReport, EpochPoint, RocCurves, RunReport,
};
use crate::curriculum::{
    run_stage_with, stage2_seed, Selection, Stage, StageConfig, StageObserver, StageReport,
};
use crate::data::{apply_domain_shift, derive_seed, generate_blobs, generate_slides, Dataset, Slide};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, delong_ci, delong_paired_test, roc_points, ScoredOutcomes};
use crate::numcore::{per_sample_cross_entropy, MlpModel};
use crate::slidelevel::{
    extract_features, heatmap_from_patches, predict_slide, train_slide_classifier, PatchPrediction,
    RegionFeatures,
};

/// Everything one seed trains and evaluates on.
pub struct SeedData {
    pub source: Dataset,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub ood: Dataset,
    pub slides_train: Vec<Slide>,
    pub slides_test: Vec<Slide>,
}

/// Draws every dataset of `seed` from named sub-streams.
pub fn seed_data(config: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let d = &config.data;
    let eval_spec = |per_class: usize, salt: &str| {
        let mut spec = d.target.with_seed(derive_seed(seed, salt));
        spec.samples_per_class = per_class;
        spec.label_noise = 0.0;
        spec
    };
    let source = generate_blobs(&d.source.with_seed(derive_seed(seed, "source")))?;
    let train = generate_blobs(&d.target.with_seed(derive_seed(seed, "target-train")))?;
    let val = generate_blobs(&eval_spec(d.val_per_class, "target-val"))?;
    let test = generate_blobs(&eval_spec(d.test_per_class, "target-test"))?;
    let ood_raw = generate_blobs(&eval_spec(d.test_per_class, "ood-test"))?;
    let mut shift = d.shift.clone();
    shift.seed = derive_seed(seed, "ood-shift");
    let ood = apply_domain_shift(&ood_raw, &shift)?;
    let (slides_train, slides_test) = match &config.slides {
        None => (Vec::new(), Vec::new()),
        Some(s) => {
            let train = generate_slides(&s.cohort.with_seed(derive_seed(seed, "slides-train")))?;
            let mut test_spec = s.cohort.with_seed(derive_seed(seed, "slides-test"));
            test_spec.count = s.test_count;
            (train, generate_slides(&test_spec)?)
        }
    };
    Ok(SeedData {
        source,
        train,
        val,
        test,
        ood,
        slides_train,
        slides_test,
    })
}

/// Initial fine-tuning parameters of `seed`: pretrained on the source task
/// (head re-drawn if configured) or, without a pretrain phase, random.
pub fn initial_model(config: &ExperimentConfig, data: &SeedData, seed: u64) -> Result<MlpModel<f64>> {
    let d = &config.data;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "init"));
    let mut model = MlpModel::standard(d.target.dim, config.model.hidden, d.target.classes, &mut rng)?;
    if let Some(pre) = &config.pretrain {
        let stage = pre.stage(Selection::Full);
        let (trained, _) = run_stage_with(&model, &data.source, &stage, derive_seed(seed, "pretrain"), &mut NoHooks)?;
        model = trained;
        if config.model.reinit_head {
            let mut head_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "head"));
            model.reinit_head(2, &mut head_rng);
        }
    }
    Ok(model)
}

struct NoHooks;

impl StageObserver<f64> for NoHooks {}

/// Mean cross-entropy and accuracy of `model` on `data`.
pub fn loss_and_accuracy(model: &MlpModel<f64>, data: &Dataset) -> Result<(f64, f64)> {
    let logits = model.forward(&data.features)?;
    let losses = per_sample_cross_entropy(&logits, &data.labels)?;
    let loss = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok((loss, accuracy(&argmax_rows(logits.as_slice(), logits.cols()), &data.labels)?))
}

fn argmax_rows(values: &[f64], cols: usize) -> Vec<usize> {
    values
        .chunks_exact(cols)
        .map(|row| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Probability of class 1 for every row.
pub fn positive_scores(model: &MlpModel<f64>, features: &crate::numcore::Matrix<f64>) -> Result<Vec<f64>> {
    let p = model.predict_proba(features)?;
    Ok((0..p.rows()).map(|i| p.get(i, 1)).collect())
}

/// Tracks validation metrics per epoch and keeps the selected parameters.
struct EpochTracker<'a> {
    val: &'a Dataset,
    mode: ModelSelection,
    points: Vec<EpochPoint>,
    best: Option<(f64, f64, usize, MlpModel<f64>)>,
}

impl StageObserver<f64> for EpochTracker<'_> {
    fn epoch_end(&mut self, epoch: usize, model: &MlpModel<f64>) -> Result<()> {
        let (val_loss, val_accuracy) = loss_and_accuracy(model, self.val)?;
        self.points.push(EpochPoint {
            epoch,
            train_loss: 0.0,
            val_loss,
            val_accuracy,
        });
        let better = match (&self.best, self.mode) {
            (None, _) | (_, ModelSelection::Last) => true,
            (Some((acc, loss, _, _)), ModelSelection::BestValAccuracy) => {
                val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss)
            }
        };
        if better {
            self.best = Some((val_accuracy, val_loss, epoch, model.clone()));
        }
        Ok(())
    }
}

/// A trained phase: the selected parameters and its curves.
pub struct Trained {
    pub model: MlpModel<f64>,
    pub selected_epoch: Option<usize>,
    pub epochs: Vec<EpochPoint>,
    pub log: StageReport,
}

pub fn train_phase(
    init: &MlpModel<f64>,
    data: &SeedData,
    stage: &StageConfig,
    seed: u64,
    mode: ModelSelection,
) -> Result<Trained> {
    let mut tracker = EpochTracker {
        val: &data.val,
        mode,
        points: Vec::new(),
        best: None,
    };
    let (last, log) = run_stage_with(init, &data.train, stage, seed, &mut tracker)?;
    let mut epochs = tracker.points;
    for p in &mut epochs {
        let losses: Vec<f64> = log.records.iter().filter(|r| r.epoch == p.epoch).map(|r| r.batch_loss).collect();
        p.train_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    }
    let (model, selected_epoch) = match tracker.best {
        Some((_, _, epoch, model)) => (model, Some(epoch)),
        None => (last, None),
    };
    Ok(Trained {
        model,
        selected_epoch,
        epochs,
        log,
    })
}

/// Scored test outcomes kept for the paired comparison with the baseline.
pub struct Evaluation {
    pub metrics: CellMetrics,
    pub roc: RocCurves,
    pub in_domain: ScoredOutcomes,
    pub ood: ScoredOutcomes,
    pub slide: Option<ScoredOutcomes>,
}

fn slide_features(model: &MlpModel<f64>, slides: &[Slide]) -> Result<Vec<RegionFeatures>> {
    slides
        .iter()
        .map(|s| {
            let probs = positive_scores(model, &s.patches.features)?;
            let patches: Vec<PatchPrediction> = s
                .coords
                .iter()
                .zip(probs)
                .map(|(&(row, col), probability)| PatchPrediction { row, col, probability })
                .collect();
            let grid = heatmap_from_patches(s.height, s.width, &patches, s.id, s.label)?;
            Ok(extract_features(&grid))
        })
        .collect()
}

pub fn evaluate(config: &ExperimentConfig, model: &MlpModel<f64>, data: &SeedData) -> Result<Evaluation> {
    let scored = |ds: &Dataset| ScoredOutcomes::from_usize_labels(positive_scores(model, &ds.features)?, &ds.labels);
    let val = scored(&data.val)?;
    let in_domain = scored(&data.test)?;
    let ood = scored(&data.ood)?;
    let (_, val_accuracy) = loss_and_accuracy(model, &data.val)?;
    let (_, test_accuracy) = loss_and_accuracy(model, &data.test)?;
    let (_, ood_accuracy) = loss_and_accuracy(model, &data.ood)?;

    let slide = match &config.slides {
        None => None,
        Some(s) => {
            let train_f = slide_features(model, &data.slides_train)?;
            let train_y: Vec<usize> = data.slides_train.iter().map(|s| s.label).collect();
            let clf = train_slide_classifier(&train_f, &train_y, &s.classifier)?;
            let test_f = slide_features(model, &data.slides_test)?;
            let scores = test_f.iter().map(|f| predict_slide(&clf, f)).collect();
            let labels: Vec<usize> = data.slides_test.iter().map(|s| s.label).collect();
            Some(ScoredOutcomes::from_usize_labels(scores, &labels)?)
        }
    };

    Ok(Evaluation {
        metrics: CellMetrics {
            selected_epoch: None,
            val_accuracy,
            val_auc: delong_ci(&val)?,
            test_accuracy,
            in_domain: delong_ci(&in_domain)?,
            ood_accuracy,
            ood: delong_ci(&ood)?,
            slide: slide.as_ref().map(delong_ci).transpose()?,
            vs_baseline: None,
        },
        roc: RocCurves {
            in_domain: roc_points(&in_domain)?,
            ood: roc_points(&ood)?,
        },
        in_domain,
        ood,
        slide,
    })
}

fn compare(base: &Evaluation, other: &Evaluation) -> Result<BaselineComparison> {
    let slide = match (&base.slide, &other.slide) {
        (Some(a), Some(b)) => Some(delong_paired_test(a, b)?.p_value),
        _ => None,
    };
    Ok(BaselineComparison {
        in_domain: delong_paired_test(&base.in_domain, &other.in_domain)?.p_value,
        ood: delong_paired_test(&base.ood, &other.ood)?.p_value,
        slide,
    })
}

/// Shuffle seed shared by the baseline, Curriculum-I and the control arm.
pub fn finetune_seed(seed: u64) -> u64 {
    derive_seed(seed, "finetune")
}

type CellResult = std::result::Result<(Trained, Evaluation), String>;

fn run_seed(config: &ExperimentConfig, seed: u64) -> Vec<CellReport> {
    let started = Instant::now();
    let prepared = seed_data(config, seed).and_then(|data| {
        let init = initial_model(config, &data, seed)?;
        Ok((data, init))
    });
    let (data, init) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let reason = format!("setup failed: {e}");
            let each = started.elapsed().as_secs_f64() / config.strategies.len() as f64;
            return config
                .strategies
                .iter()
                .map(|&strategy| CellReport {
                    strategy,
                    seed,
                    wall_clock_seconds: each,
                    outcome: CellOutcome::Failed { reason: reason.clone() },
                })
                .collect();
        }
    };
    let setup_seconds = started.elapsed().as_secs_f64();

    let mode = config.model_selection;
    let cur = config.curriculum;
    let timed = |f: &dyn Fn() -> Result<Trained>| -> (CellResult, f64) {
        let t0 = Instant::now();
        let r = f()
            .and_then(|trained| {
                let eval = evaluate(config, &trained.model, &data)?;
                Ok((trained, eval))
            })
            .map_err(|e| e.to_string());
        (r, t0.elapsed().as_secs_f64())
    };

    let mut results: BTreeMap<Strategy, (CellResult, f64)> = BTreeMap::new();
    let wants = |s: Strategy| config.strategies.contains(&s);
    if wants(Strategy::Baseline) {
        let stage = config.baseline.stage(Selection::Full);
        results.insert(Strategy::Baseline, timed(&|| train_phase(&init, &data, &stage, finetune_seed(seed), mode)));
    }
    if wants(Strategy::CurriculumI) || wants(Strategy::CurriculumII) {
        let stage = config.curriculum1.stage(Selection::Curriculum(cur.for_stage(Stage::CurriculumI)));
        results.insert(
            Strategy::CurriculumI,
            timed(&|| train_phase(&init, &data, &stage, finetune_seed(seed), mode)),
        );
    }
    if wants(Strategy::CurriculumII) {
        let stage = config.curriculum2.stage(Selection::Curriculum(cur.for_stage(Stage::CurriculumII)));
        let entry = match &results[&Strategy::CurriculumI].0 {
            Ok((theta1, _)) => {
                let theta1 = theta1.model.clone();
                timed(&|| train_phase(&theta1, &data, &stage, stage2_seed(finetune_seed(seed)), mode))
            }
            Err(e) => (Err(format!("Curriculum-I failed: {e}")), 0.0),
        };
        results.insert(Strategy::CurriculumII, entry);
    }
    if let (true, Some(selection)) = (wants(Strategy::Control), config.control) {
        let stage = config.baseline.stage(selection);
        results.insert(Strategy::Control, timed(&|| train_phase(&init, &data, &stage, finetune_seed(seed), mode)));
    }

    let baseline_eval = match results.get(&Strategy::Baseline) {
        Some((Ok((_, e)), _)) => Some(e),
        _ => None,
    };
    let share = setup_seconds / config.strategies.len() as f64;
    config
        .strategies
        .iter()
        .map(|&strategy| {
            let (result, seconds) = &results[&strategy];
            let outcome = match result {
                Err(reason) => CellOutcome::Failed { reason: reason.clone() },
                Ok((trained, eval)) => {
                    let mut metrics = eval.metrics.clone();
                    metrics.selected_epoch = trained.selected_epoch;
                    let comparison = match baseline_eval {
                        Some(base) if strategy != Strategy::Baseline => Some(compare(base, eval)),
                        _ => None,
                    };
                    match comparison.transpose() {
                        Ok(vs) => {
                            metrics.vs_baseline = vs;
                            CellOutcome::Ok {
                                metrics,
                                epochs: trained.epochs.clone(),
                                log: trained.log.clone(),
                                roc: eval.roc.clone(),
                            }
                        }
                        Err(e) => CellOutcome::Failed {
                            reason: format!("baseline comparison failed: {e}"),
                        },
                    }
                }
            };
            CellReport {
                strategy,
                seed,
                wall_clock_seconds: share + seconds,
                outcome,
            }
        })
        .collect()
}

/// Runs every strategy on every seed. Seeds run in parallel on the current
/// rayon pool; each seed's cells run sequentially. Cell failures are
/// recorded, not raised.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let mut report = RunReport::empty(config.hash()?);
    let per_seed: Vec<Vec<CellReport>> = config.seeds.par_iter().map(|&s| run_seed(config, s)).collect();
    report.cells = per_seed.into_iter().flatten().collect();
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// [`run_experiment`] on a dedicated pool of `jobs` workers (0 = one per
/// core).
pub fn run_experiment_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    with_pool(jobs, || run_experiment(config))
}

fn with_pool<R: Send>(jobs: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// Curriculum-I and Curriculum-II for every `alpha` in `grid`, all other
/// settings as in `config`.
pub fn run_ablation_alpha(config: &ExperimentConfig, grid: &[f64], jobs: usize) -> Result<AblationReport> {
    if grid.is_empty() {
        return Err(Error::Config("alpha grid is empty".into()));
    }
    if let Some(a) = grid.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::Config(format!("alpha grid value {a} outside (0, 1]")));
    }
    with_pool(jobs, || {
        let mut entries = Vec::with_capacity(grid.len());
        for &alpha in grid {
            let mut c = config.clone();
            c.curriculum.alpha = alpha;
            c.strategies = vec![Strategy::CurriculumI, Strategy::CurriculumII];
            entries.push(AblationEntry {
                alpha,
                report: run_experiment(&c)?,
            });
        }
        let summary = entries.iter().map(|e| ablation_row(e.alpha, &e.report)).collect();
        Ok(AblationReport { entries, summary })
    })
}

fn ablation_row(alpha: f64, report: &RunReport) -> AblationRow {
    let med = |s: Strategy, f: &dyn Fn(&CellMetrics) -> f64| {
        median(&report.metrics_for(s).into_iter().map(|(_, m)| f(m)).collect::<Vec<_>>())
    };
    AblationRow {
        alpha,
        curriculum_i_val_accuracy: med(Strategy::CurriculumI, &|m| m.val_accuracy),
        curriculum_i_val_auc: med(Strategy::CurriculumI, &|m| m.val_auc.auc),
        curriculum_ii_val_accuracy: med(Strategy::CurriculumII, &|m| m.val_accuracy),
        curriculum_ii_val_auc: med(Strategy::CurriculumII, &|m| m.val_auc.auc),
        curriculum_ii_ood_auc: med(Strategy::CurriculumII, &|m| m.ood.auc),
    }
}
