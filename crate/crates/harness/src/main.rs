use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ropo_core::planner::{robust_value_iteration, robust_value_iteration_decoupled};
use ropo_core::UncertaintyKind;
use ropo_harness::config::ExperimentConfig;
use ropo_harness::format::sig12;
use ropo_harness::output::{read_aggregate, read_rows, write_rows};
use ropo_harness::plot::PlotMetric;
use ropo_harness::report::{plot_metric, seed_csv, write_results};
use ropo_harness::runner::{run_experiment, PreparedRun};
use ropo_harness::{checkpoint, inner, HarnessError, Result};

#[derive(Parser)]
#[command(name = "ropo", version, about = "Robust optimistic policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// `key.path=value`, applied before validation; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to `experiment.out_dir` or `results/<name>`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(&self.config, &self.overrides)
    }

    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| config.experiment.out_dir.clone())
            .unwrap_or_else(|| Path::new("results").join(&config.experiment.name))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    EvalReturn,
    CumulativeRegret,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one inner problem from a text file and print the dual solution.
    SolveInner {
        /// Problem file (see the README for the format).
        #[arg(long)]
        file: PathBuf,
    },
    /// Robust value iteration for one run's spec; prints V* per step and state.
    Plan {
        #[command(flatten)]
        common: ConfigArgs,
        /// Run label; the first run when absent.
        #[arg(long)]
        run: Option<String>,
    },
    /// Train one run on one seed.
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        run: Option<String>,
        /// Seed; the first configured seed when absent.
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this episode instead of K.
        #[arg(long)]
        stop_after: Option<usize>,
        /// Write the learner state to this file when done.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from a checkpoint. Rows already in the seed's CSV up to
        /// the checkpoint episode are kept.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Every run on every seed, with CSVs, plots and metadata.
    Experiment {
        #[command(flatten)]
        common: ConfigArgs,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plot aggregate CSVs written by `experiment`.
    Plot {
        /// Aggregate CSV files; each becomes one series named after its file.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "eval-return")]
        metric: MetricArg,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn first_run_label(config: &ExperimentConfig, run: &Option<String>) -> String {
    run.clone().unwrap_or_else(|| config.runs[0].label.clone())
}

fn solve_inner(file: &Path) -> Result<()> {
    let text = std::fs::read_to_string(file).map_err(|e| HarnessError::io(file, e))?;
    let spec = inner::parse(file, &text)?;
    print!("{}", inner::render(&inner::solve(&spec)?));
    Ok(())
}

fn plan(common: &ConfigArgs, run: &Option<String>) -> Result<()> {
    let config = common.load()?;
    let label = first_run_label(&config, run);
    let prepared = PreparedRun::new(&config, config.run(&label)?)?;
    let spec = &prepared.spec;
    let (table, policy) = if spec.uncertainty().kind == UncertaintyKind::L1S {
        robust_value_iteration_decoupled(spec)
    } else {
        robust_value_iteration(spec)?
    };
    let d = spec.dims();
    let mut out = format!("v_star {}\nh,state,v,action\n", sig12(table.v(0, spec.initial_state())));
    for h in 0..d.horizon {
        for s in 0..d.states {
            let a = policy.row(h, s).iter().position(|&p| p == 1.0).expect("deterministic policy");
            out.push_str(&format!("{},{s},{},{a}\n", h + 1, sig12(table.v(h, s))));
        }
    }
    // A closed pipe (`ropo plan | head`) is not an error.
    let _ = std::io::stdout().write_all(out.as_bytes());
    Ok(())
}

fn train(
    common: &ConfigArgs,
    run: &Option<String>,
    seed: Option<u64>,
    stop_after: Option<usize>,
    checkpoint_out: &Option<PathBuf>,
    resume: &Option<PathBuf>,
) -> Result<()> {
    let config = common.load()?;
    let label = first_run_label(&config, run);
    let seed = seed.unwrap_or(config.experiment.seeds[0]);
    let prepared = PreparedRun::new(&config, config.run(&label)?)?;
    let dir = common.out_dir(&config);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let csv = seed_csv(&dir, &label, seed);

    let mut rows = Vec::new();
    let resume = match resume {
        Some(path) => {
            let c = checkpoint::read(path)?;
            if csv.exists() {
                rows = read_rows(&csv)?;
                rows.retain(|r| r.episode <= c.episode);
            }
            Some(c)
        }
        None => None,
    };
    let out = prepared.run_seed_from(seed, resume, stop_after)?;
    rows.extend_from_slice(&out.rows);
    write_rows(&csv, &rows)?;
    if let Some(path) = checkpoint_out {
        checkpoint::write(path, &out.checkpoint)?;
    }
    let last = rows.last().expect("at least one row");
    println!(
        "{label} seed {seed}: episode {} eval_return {}{}",
        last.episode,
        sig12(last.eval_return_mean),
        out.checkpoint
            .cumulative_regret
            .map(|r| format!(" cumulative_regret {}", sig12(r)))
            .unwrap_or_default()
    );
    Ok(())
}

fn experiment(common: &ConfigArgs, seed: Option<u64>) -> Result<()> {
    let mut config = common.load()?;
    if let Some(s) = seed {
        config.experiment.seeds = vec![s];
    }
    let dir = common.out_dir(&config);
    let results = run_experiment(&config)?;
    let outcome = write_results(&config, &results, &dir);
    for r in &results {
        for (seed, e) in r.failures() {
            eprintln!("run {} seed {seed} failed: {e}", r.prepared.run.label);
        }
    }
    outcome?;
    println!("results written to {}", dir.display());
    Ok(())
}

fn plot(inputs: &[PathBuf], metric: MetricArg, title: &str, out: &Path) -> Result<()> {
    let metric = match metric {
        MetricArg::EvalReturn => PlotMetric::EvalReturn,
        MetricArg::CumulativeRegret => PlotMetric::CumulativeRegret,
    };
    let mut aggregates = Vec::new();
    for path in inputs {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("series");
        let label = name.strip_suffix(".aggregate.csv").unwrap_or(name).to_string();
        aggregates.push((label, read_aggregate(path)?));
    }
    let svg = plot_metric(metric, title, &aggregates)
        .ok_or_else(|| HarnessError::parse(&inputs[0], "no rows carry the requested metric"))?;
    std::fs::write(out, svg).map_err(|e| HarnessError::io(out, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveInner { file } => solve_inner(file),
        Command::Plan { common, run } => plan(common, run),
        Command::Train {
            common,
            run,
            seed,
            stop_after,
            checkpoint,
            resume,
        } => train(common, run, *seed, *stop_after, checkpoint, resume),
        Command::Experiment { common, seed } => experiment(common, *seed),
        Command::Plot {
            inputs,
            metric,
            title,
            out,
        } => plot(inputs, *metric, title, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
