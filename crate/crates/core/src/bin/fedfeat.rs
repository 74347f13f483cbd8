use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedfeat::cost::CostModel;
use fedfeat::harness::{cost_table, run_experiment, write_metrics, write_metrics_to, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedfeat", version, about = "Federated weight vs feature communication simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and emit per-round metrics as CSV.
    ///
    /// Any config key can be overridden with `--<key> <value>`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Further `--key value` overrides.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
        overrides: Vec<String>,
    },
    /// Print the per-round byte cost of every strategy.
    Cost(CostArgs),
}

#[derive(Args)]
struct CostArgs {
    /// `ucm` or `aid`.
    #[arg(long, conflicts_with_all = ["w_bytes", "d", "clients", "classes", "samples"])]
    preset: Option<String>,
    #[arg(long)]
    w_bytes: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    clients: Option<u64>,
    #[arg(long)]
    classes: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
}

/// Applies `--key value` / `--key=value` pairs. `--out` may appear among
/// them because clap hands over everything after the first unknown flag.
fn apply_overrides(cfg: &mut ExperimentConfig, args: &[String], out: &mut Option<PathBuf>) -> Result<(), String> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let flag = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument `{arg}`"))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => (flag, it.next().ok_or_else(|| format!("--{flag} needs a value"))?.clone()),
        };
        if key == "out" {
            *out = Some(PathBuf::from(value));
        } else {
            cfg.set(key, &value).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn run(
    config: Option<PathBuf>,
    strategy: Option<String>,
    seed: Option<u64>,
    mut out: Option<PathBuf>,
    overrides: Vec<String>,
) -> Result<(), String> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::from_file(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = strategy {
        cfg.set("strategy", &s).map_err(|e| e.to_string())?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    apply_overrides(&mut cfg, &overrides, &mut out)?;
    let metrics = run_experiment(&cfg).map_err(|e| e.to_string())?;
    match out {
        Some(path) => write_metrics(&metrics, path).map_err(|e| e.to_string()),
        None => write_metrics_to(&metrics, std::io::stdout().lock()).map_err(|e| e.to_string()),
    }
}

fn cost(args: CostArgs) -> Result<(), String> {
    let model = match args.preset {
        Some(name) => CostModel::preset(&name),
        None => {
            let need = |v: Option<u64>, flag: &str| v.ok_or_else(|| format!("--{flag} is required without --preset"));
            CostModel::new(
                need(args.w_bytes, "w-bytes")?,
                need(args.d, "d")?,
                need(args.clients, "clients")?,
                need(args.classes, "classes")?,
                need(args.samples, "samples")?,
            )
        }
    }
    .map_err(|e| e.to_string())?;
    print!("{}", cost_table(&model));
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run {
            config,
            strategy,
            seed,
            out,
            overrides,
        } => run(config, strategy, seed, out, overrides),
        Command::Cost(args) => cost(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
