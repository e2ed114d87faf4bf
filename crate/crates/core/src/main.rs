use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;
use serde_json::json;

use procflow::error::{Error, Result};
use procflow::qa::Tier;
use procflow::workspace::{logger, mock, run_stage, StageArgs, Workspace};

#[derive(Parser)]
#[command(name = "procflow", version, about = "Procedural cooking-video analysis pipeline")]
struct Cli {
    /// Workspace root.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Config file; defaults to <workspace>/procflow.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run even if upstream outputs came from a different config.
    #[arg(long, global = true)]
    force: bool,
    /// Report failures as one JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[arg(long, global = true, default_value = "info", value_parser = parse_level)]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the corpus.
    Ingest,
    /// Corpus statistics.
    Stats,
    /// Cluster action phrases into canonical classes.
    Canonicalize,
    /// Merge consecutive chunks that share a canonical action.
    Merge,
    /// Ask the vision model whether each merged span shows its action.
    VerifyAuto {
        #[arg(long)]
        max_frames: Option<usize>,
    },
    /// Align transcripts to recipe steps and assign chunks.
    Align,
    /// Pairwise clip comparison.
    Compare {
        #[arg(long)]
        seed: u64,
        /// Pairs per action class; 0 runs every pair.
        #[arg(long)]
        max_pairs: Option<usize>,
        #[arg(long, alias = "k")]
        k_frames: Option<usize>,
    },
    /// Serve the review API and UI.
    ReviewServe {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Generate the QA benchmark.
    QaGen {
        #[arg(long)]
        seed: u64,
        /// Restrict to these tiers (repeatable).
        #[arg(long = "tier")]
        tiers: Vec<Tier>,
    },
    /// Score model answers against the QA manifest.
    QaEval {
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Rank clips for a free-text skill query.
    Retrieve {
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Write the synthetic demo workspace into DIR.
    InitMock {
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_level(s: &str) -> std::result::Result<LevelFilter, String> {
    s.parse().map_err(|_| format!("unknown log level {s:?}"))
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let args = match cli.command {
        Command::InitMock { dir, seed } => {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
            return mock::init_mock(&dir, seed);
        }
        Command::Ingest => StageArgs::Ingest,
        Command::Stats => StageArgs::Stats,
        Command::Canonicalize => StageArgs::Canonicalize,
        Command::Merge => StageArgs::Merge,
        Command::VerifyAuto { max_frames } => StageArgs::VerifyAuto { max_frames },
        Command::Align => StageArgs::Align,
        Command::Compare {
            seed,
            max_pairs,
            k_frames,
        } => StageArgs::Compare {
            seed,
            max_pairs,
            k_frames,
        },
        Command::ReviewServe { addr, ui_dir } => StageArgs::ReviewServe { addr, ui_dir },
        Command::QaGen { seed, tiers } => StageArgs::QaGen { seed, tiers },
        Command::QaEval { answers, manifest } => StageArgs::QaEval { answers, manifest },
        Command::Retrieve { query, k } => StageArgs::Retrieve { query, k },
    };
    let ws = Workspace::open(&cli.workspace, cli.config.as_deref())?;
    let report = run_stage(&ws, &args, cli.force)?;
    Ok(serde_json::to_value(report)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    logger::init(cli.log_level);
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(v) => {
            let mut out = std::io::stdout().lock();
            let _ = serde_json::to_writer_pretty(&mut out, &v);
            let _ = writeln!(out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json_errors {
                eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
