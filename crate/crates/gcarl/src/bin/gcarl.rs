use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcarl::formats::{metrics_csv, write_json};
use gcarl::pipeline::{self, RunOptions, RunPaths};
use gcarl::{ExperimentConfig, Result};

/// Grouped causal representation learning experiments.
///
/// Per-seed artifacts go to <output_dir>/seed-<seed>/:
///   graph.json    true graph
///   latents.bin   true observable latents (dataset binary)
///   dataset.bin   observed data
///   mixing.json   mixing networks
///   model.json    trained model
///   loss.csv      iteration,loss
///   metrics.csv   seed,mcc,f1,precision,recall
///   roc.csv       threshold,fpr,tpr (threshold in percent)
///   report.json   full evaluation
///
/// Exit status: 0 success, 2 configuration error, 3 numeric failure, 4 I/O.
#[derive(Parser)]
#[command(name = "gcarl", version, verbatim_doc_comment)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads across seeds.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Progress on stderr.
    #[arg(long)]
    verbose: bool,
    /// Recompute stages even when their stamps are current.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw graph, latents, mixing and observed data.
    Generate(Common),
    /// Fit the model; writes model.json and loss.csv.
    Train(Common),
    /// Score a trained model; writes report.json, metrics.csv and roc.csv.
    Eval(Common),
    /// Check the assumptions on the generated graph; writes check.json.
    Check {
        #[command(flatten)]
        common: Common,
        /// Check this graph file instead of the generated ones.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Threshold sweep only; rewrites roc.csv.
    Roc(Common),
    /// generate, train and eval for every seed, then a summary table.
    Experiment(Common),
}

fn setup(c: &Common) -> Result<(ExperimentConfig, RunOptions)> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok((cfg, RunOptions { force: c.force, verbose: c.verbose, threads: c.threads }))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let (cfg, opts) = setup(&c)?;
            for &seed in &cfg.seeds {
                pipeline::cmd_generate(&cfg, seed, &opts)?;
            }
        }
        Command::Train(c) => {
            let (cfg, opts) = setup(&c)?;
            for &seed in &cfg.seeds {
                pipeline::cmd_train(&cfg, seed, &opts)?;
            }
        }
        Command::Eval(c) => {
            let (cfg, opts) = setup(&c)?;
            let mut rows = Vec::new();
            for &seed in &cfg.seeds {
                rows.push(pipeline::cmd_eval(&cfg, seed, &opts)?.metrics());
            }
            print!("{}", metrics_csv(&rows));
        }
        Command::Check { common, graph } => {
            let (cfg, _) = setup(&common)?;
            let targets: Vec<(PathBuf, PathBuf)> = match graph {
                Some(g) => vec![(g.clone(), g.with_extension("check.json"))],
                None => cfg.seeds.iter().map(|&s| RunPaths::new(&cfg, s)).map(|p| (p.graph(), p.check())).collect(),
            };
            for (graph, out) in targets {
                let report = pipeline::cmd_check(&graph)?;
                println!("{}", graph.display());
                print!("{}", report.summary());
                write_json(&out, &report)?;
            }
        }
        Command::Roc(c) => {
            let (cfg, _) = setup(&c)?;
            for &seed in &cfg.seeds {
                println!("{}", pipeline::cmd_roc(&cfg, seed)?.display());
            }
        }
        Command::Experiment(c) => {
            let (cfg, opts) = setup(&c)?;
            let summary = pipeline::cmd_experiment(&cfg, &opts)?;
            print!("{}", summary.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
