use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;

use introspect::experiment::{
    evaluate_robustness, run_experiment, timeseries_csv, unsat_timeseries, CheckpointStore, ExperimentConfig,
    RobustnessReport,
};
use introspect::mdp::theory::run_theorem_suite;
use introspect::oracle::{Budget, QueryFamily};

#[derive(Parser)]
#[command(name = "introspect", version, about = "Oracle-guided DDQN training and robustness evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config.
    Train {
        config: PathBuf,
        /// Train only these seeds instead of the config's list.
        #[arg(long)]
        seed: Vec<u64>,
        /// Disable oracle queries (baseline DDQN).
        #[arg(long)]
        no_oracle: bool,
        /// Output directory, overriding the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Query every checkpoint under a directory with a query family.
    Evaluate {
        checkpoints: PathBuf,
        family: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        budget_secs: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_boxes: u64,
        /// Where to write the JSON report; printed as a table otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved robustness report.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
    },
    /// Check the M-dagger equivalence properties on random small MDPs.
    CheckTheory {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
    Timeseries,
}

fn config_base(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train {
            config,
            seed,
            no_oracle,
            output,
        } => {
            let mut cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            if !seed.is_empty() {
                cfg.seeds = seed;
            }
            if no_oracle {
                cfg.name.push_str("-baseline");
            }
            let base = config_base(&config);
            if let Some(out) = output {
                cfg.output_dir = std::env::current_dir()?.join(out);
            }
            cfg.validate()?;
            let summary = run_experiment(&cfg, !no_oracle, &base)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Evaluate {
            checkpoints,
            family,
            budget_secs,
            max_boxes,
            out,
        } => {
            if !(budget_secs > 0.0) || max_boxes == 0 {
                bail!("budget must be positive");
            }
            let family = QueryFamily::load(&family).with_context(|| format!("loading {}", family.display()))?;
            let store = CheckpointStore::new(&checkpoints);
            let nets = store.load_all().with_context(|| format!("reading {}", checkpoints.display()))?;
            if nets.is_empty() {
                bail!("no checkpoints under {}", checkpoints.display());
            }
            let budget = Budget {
                max_boxes,
                time_secs: Some(budget_secs),
            };
            let report = evaluate_robustness(&nets, &family, budget);
            match out {
                Some(path) => std::fs::write(&path, serde_json::to_string_pretty(&report)?)?,
                None => print!("{}", report.to_markdown()),
            }
        }
        Command::Report { report, format } => {
            let text = std::fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let report: RobustnessReport = serde_json::from_str(&text)?;
            match format {
                Format::Markdown => print!("{}", report.to_markdown()),
                Format::Csv => print!("{}", report.to_csv()?),
                Format::Timeseries => print!("{}", timeseries_csv(&unsat_timeseries(&report))?),
            }
        }
        Command::CheckTheory { count, seed } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let summary = run_theorem_suite(&mut rng, count)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if !summary.all_hold() {
                bail!("theory checks failed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
