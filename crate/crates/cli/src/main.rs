//! `rumorcut`: simulate rumor spread, train the deletion policy, and compare
//! it with the baseline methods.
//!
//! Every command writes into `--out-dir` the fully resolved configuration
//! (`resolved_config.toml`), a version stamp (`version.txt`), its CSV outputs
//! and a `summary.json`. Failures print one JSON object on stderr and exit
//! with a nonzero code.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rumorcut", version, about = "Edge deletion against rumor spread on social graphs")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML file with flat keys; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Whitespace-separated edge list (`src dst` per line, `#` comments).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Treat every dataset line as a pair of opposite directed edges.
    #[arg(long, global = true)]
    undirected: bool,
    #[arg(long, global = true)]
    n_sims: Option<usize>,
    #[arg(long, global = true)]
    budget_fraction: Option<f64>,
    #[arg(long, global = true)]
    retention: Option<f64>,
    /// Raw node ids of the sources, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    sources: Vec<u64>,
    /// Number of sources to sample when none are listed.
    #[arg(long, global = true)]
    sample_k: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Averaged propagation curves and impact of the selected sources.
    Simulate,
    /// Raw and normalized feature matrices for the first selected source.
    Features,
    /// Train the policy on randomly generated graphs.
    Train {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Continue from this checkpoint; its network shape must match.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy rollouts of a trained policy from every selected source.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run one baseline method, or `all`, from every selected source.
    Baseline {
        #[arg(long, default_value = "all")]
        method: String,
        /// Score search baselines with exact enumeration (tiny graphs only).
        #[arg(long)]
        exact: bool,
    },
    /// Re-evaluate a trained policy with each ablation switch in turn.
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Features => "features",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Baseline { .. } => "baseline",
            Command::Ablate { .. } => "ablate",
        }
    }
}

fn resolve(common: &CommonArgs, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &common.dataset {
        cfg.dataset = Some(v.clone());
    }
    if common.undirected {
        cfg.undirected = true;
    }
    if let Some(v) = common.n_sims {
        cfg.n_sims = v;
    }
    if let Some(v) = common.budget_fraction {
        cfg.budget_fraction = v;
    }
    if let Some(v) = common.retention {
        cfg.retention = v;
    }
    if !common.sources.is_empty() {
        cfg.sources = common.sources.clone();
    }
    if let Some(v) = common.sample_k {
        cfg.sample_k = v;
    }
    if let Command::Train { episodes, learning_rate, .. } = command {
        if let Some(v) = episodes {
            cfg.episodes = *v;
        }
        if let Some(v) = learning_rate {
            cfg.learning_rate = *v;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.common, &cli.command)?;
    let out = commands::Output::create(&cfg, cli.command.name())?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Features => commands::features(&cfg, &out),
        Command::Train { resume, .. } => commands::train(&cfg, resume.as_deref(), &out),
        Command::Evaluate { checkpoint } => commands::evaluate(&cfg, &checkpoint, &out),
        Command::Baseline { method, exact } => commands::baseline(&cfg, &method, exact, &out),
        Command::Ablate { checkpoint } => commands::ablate(&cfg, &checkpoint, &out),
    }
}

fn error_line(command: &str, err: &anyhow::Error) -> String {
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    serde_json::json!({ "status": "error", "command": command, "error": chain.join(": ") }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.kind().to_string();
            let detail = e.to_string();
            let detail = detail.lines().next().unwrap_or(&message).trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "status": "error", "command": null, "error": detail }));
            return ExitCode::from(2);
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(name, &err));
            ExitCode::FAILURE
        }
    }
}
