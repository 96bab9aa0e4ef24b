use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use hadcl::harness::{
    emit_plot_data, median, run_ablation_alpha, run_experiment_with_jobs, ExperimentConfig, RunReport, Strategy,
};

#[derive(Parser)]
#[command(name = "hadcl", version, about = "Hardness-aware dynamic curriculum fine-tuning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Replace the config's seed list; repeatable.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, short, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain, fine-tune with every strategy on every seed, and evaluate.
    Run(RunArgs),
    /// Sweep the hard fraction alpha over a grid.
    AblateAlpha {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated alpha values in (0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.10,0.15,0.20")]
        grid: Vec<f64>,
    },
    /// Write tab-separated curve and ROC tables from a run's summary.json.
    EmitPlots {
        /// A summary.json written by `run`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Parse and validate a config, then print its canonical hash.
    ValidateConfig {
        #[arg(long, short)]
        config: PathBuf,
    },
}

fn load(args: &RunArgs) -> anyhow::Result<(ExperimentConfig, Option<PathBuf>)> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if !args.seeds.is_empty() {
        config = config.with_seeds(args.seeds.clone());
    }
    let out = args.out.clone().or_else(|| config.output_dir.clone());
    config.output_dir = None;
    config.validate()?;
    Ok((config, out))
}

fn print_summary(report: &RunReport) {
    println!("{:<14} {:>5} {:>9} {:>9} {:>9} {:>9}", "strategy", "ok", "acc", "auc", "ood_auc", "slide_auc");
    for s in [Strategy::Baseline, Strategy::CurriculumI, Strategy::CurriculumII, Strategy::Control] {
        let total = report.cells.iter().filter(|c| c.strategy == s).count();
        if total == 0 {
            continue;
        }
        let m = report.metrics_for(s);
        let med = |f: &dyn Fn(&hadcl::harness::CellMetrics) -> Option<f64>| {
            median(&m.iter().filter_map(|(_, x)| f(x)).collect::<Vec<_>>())
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        };
        println!(
            "{:<14} {:>5} {:>9} {:>9} {:>9} {:>9}",
            s.name(),
            format!("{}/{}", m.len(), total),
            med(&|x| Some(x.test_accuracy)),
            med(&|x| Some(x.in_domain.auc)),
            med(&|x| Some(x.ood.auc)),
            med(&|x| x.slide.map(|e| e.auc)),
        );
    }
    for c in report.cells.iter().filter(|c| !c.is_ok()) {
        if let hadcl::harness::CellOutcome::Failed { reason } = &c.outcome {
            eprintln!("failed: {} seed {}: {reason}", c.strategy.name(), c.seed);
        }
    }
}

fn write_config(config: &ExperimentConfig, dir: &std::path::Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), config.to_toml_string()?)?;
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Run(args) => {
            let (config, out) = load(&args)?;
            let report = run_experiment_with_jobs(&config, args.jobs)?;
            print_summary(&report);
            if let Some(dir) = out {
                write_config(&config, &dir)?;
                report.write_dir(&dir).with_context(|| format!("writing {}", dir.display()))?;
                emit_plot_data(&report, dir.join("plots"))?;
                println!("report written to {}", dir.display());
            }
            Ok(report.all_ok())
        }
        Command::AblateAlpha { run, grid } => {
            let (config, out) = load(&run)?;
            let sweep = run_ablation_alpha(&config, &grid, run.jobs)?;
            println!(
                "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
                "alpha", "c1_val_acc", "c1_val_auc", "c2_val_acc", "c2_val_auc", "c2_ood_auc"
            );
            let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            for r in &sweep.summary {
                println!(
                    "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
                    r.alpha,
                    f(r.curriculum_i_val_accuracy),
                    f(r.curriculum_i_val_auc),
                    f(r.curriculum_ii_val_accuracy),
                    f(r.curriculum_ii_val_auc),
                    f(r.curriculum_ii_ood_auc)
                );
            }
            if let Some(dir) = out {
                write_config(&config, &dir)?;
                std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&sweep)? + "\n")?;
                for e in &sweep.entries {
                    e.report.write_dir(dir.join(format!("alpha_{}", e.alpha)))?;
                }
                println!("sweep written to {}", dir.display());
            }
            Ok(sweep.all_ok())
        }
        Command::EmitPlots { report, out } => {
            let report = RunReport::load(&report).with_context(|| format!("reading {}", report.display()))?;
            for p in emit_plot_data(&report, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::ValidateConfig { config } => {
            let c = ExperimentConfig::load(&config)?;
            println!("ok {}", c.hash()?);
            Ok(true)
        }
    }
}
