use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use labelbal::cli::{self, Arm};
use labelbal::error::{Error, Result};
use labelbal::model::HeadKind;

#[derive(Parser)]
#[command(
    name = "labelbal",
    about = "Label-balanced multi-label learning: synthetic benchmarks, \
             feasibility audits, decoupled training arms, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV plus label statistics JSON
    Gen {
        /// Generation config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output dataset CSV path
        #[arg(long)]
        data: PathBuf,
        /// Output label-stats JSON path
        #[arg(long)]
        stats: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decide whether label-balanced image re-sampling is feasible for a
    /// dataset's label matrix
    Feasibility {
        #[arg(long)]
        data: PathBuf,
        /// Smallest admissible sampling weight (default 1e-6 / N)
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one arm and evaluate on the held-out split
    Train {
        /// Run config (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Override the config's arm
        #[arg(long)]
        arm: Option<String>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset CSV
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Which classifier to score: cls (stage-1) or ft (fine-tuned)
        #[arg(long, default_value = "ft")]
        head: String,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare training reports: per-attribute mA deltas vs the first
    Compare {
        /// Report JSON paths (first is the baseline)
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train extractors across label-balancing ratios and score classifier
    /// retrains on their frozen features
    SweepGamma {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated gamma values in [0, 1]
        #[arg(long)]
        gammas: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            config,
            data,
            stats,
            seed,
        } => {
            let mut gen = cli::load_gen_config(&config)?;
            if let Some(s) = seed {
                gen.seed = s;
            }
            cli::cmd_gen(&gen, &data, &stats)
        }
        Command::Feasibility { data, eps, out } => cli::cmd_feasibility(&data, eps, &out),
        Command::Train {
            config,
            arm,
            seed,
            out,
        } => {
            let mut cfg = cli::load_run_config(&config)?;
            if let Some(arm) = arm {
                cfg.arm = arm.parse::<Arm>()?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            cli::cmd_train(&cfg)
        }
        Command::Eval {
            checkpoint,
            data,
            head,
            threshold,
            out,
        } => {
            let head = match head.as_str() {
                "cls" => HeadKind::Cls,
                "ft" => HeadKind::Ft,
                other => {
                    return Err(Error::config(
                        "config.head",
                        format!("unknown head '{other}' (expected cls or ft)"),
                    ))
                }
            };
            cli::cmd_eval(&checkpoint, &data, head, threshold, &out)
        }
        Command::Compare { reports, out } => {
            let pretty = cli::cmd_compare(&reports, &out)?;
            print!("{pretty}");
            Ok(())
        }
        Command::SweepGamma {
            config,
            gammas,
            out,
            seed,
        } => {
            let mut cfg = cli::load_run_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let gammas = gammas
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config("config.gammas", format!("bad gamma '{s}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            cli::cmd_sweep_gamma(&cfg, &gammas, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => ExitCode::from(cli::report_error(&err) as u8),
    }
}
