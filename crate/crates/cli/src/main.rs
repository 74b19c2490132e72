//! CLI entry point: orchestrates the full pipeline from a config file and
//! exposes the scenario generator and artifact inspector.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error (no usable
//! records or rejection tolerance exceeded), 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hexmob::config::{load_scenario, PipelineConfig};
use hexmob::error::Error;
use hexmob::markov::summarize_model_csv;
use hexmob::pipeline;
use hexmob::synthgen;

/// Output-directory override, applied between the config file and --out.
const OUT_DIR_ENV: &str = "HEXMOB_OUT_DIR";

#[derive(Parser)]
#[command(name = "hexmob", version, about = "AIS vessel mobility models on a hexagonal grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ingest, fit models, compute metrics, export.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        /// Worker threads (overrides the config; 0 = all cores).
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        /// Output directory (overrides config and HEXMOB_OUT_DIR).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Validate a pipeline config without writing anything.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Generate a synthetic AIS fleet from a scenario file.
    Synth {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Print summary statistics for a model CSV or summary JSON artifact.
    Inspect {
        artifact: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                Some(e) if e.is_data_error() => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            } else if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
                cfg.out_dir = PathBuf::from(dir);
            }
            let report = pipeline::run(&cfg)?;
            println!(
                "ok: {} streams, {} records used, artifacts in {}",
                report.manifest.streams.len(),
                report.manifest.records_used,
                report.out_dir.display()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = PipelineConfig::load(&config)?;
            println!(
                "ok: {} inputs, {} windows, {} categories, grid edge {} m",
                cfg.input_paths.len(),
                cfg.windows.len(),
                cfg.emit.len(),
                cfg.grid.edge_len_m
            );
            Ok(())
        }
        Command::Synth { scenario, out } => {
            let s = load_scenario(&scenario)?;
            let records = synthgen::generate(&s)?;
            let mut buf = Vec::new();
            synthgen::write_scenario_csv(&mut buf, &records)?;
            if let Some(dir) = out.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(&out, &buf)?;
            println!("ok: {} records -> {}", records.len(), out.display());
            Ok(())
        }
        Command::Inspect { artifact } => inspect(&artifact),
    }
}

fn inspect(path: &Path) -> anyhow::Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase();
    match ext.as_str() {
        "json" => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        _ => {
            let file = std::fs::File::open(path)?;
            let summary = summarize_model_csv(file)?;
            println!("states: {}", summary.n_states);
            println!("transitions: {}", summary.total_transitions);
            println!("top mobility-magnitude cells:");
            for (cell, mm) in &summary.top_mm {
                println!("  {cell}\t{mm}");
            }
        }
    }
    Ok(())
}
