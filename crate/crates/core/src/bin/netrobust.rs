//! Batch command-line front end: read a configuration, run the analysis,
//! print the tabular summary, optionally emit report files.
//!
//! Exit codes: 0 when every frequency passes the performance bound, 2 when
//! any certified bound exceeds it, 1 on execution or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use netrobust::config::AnalysisConfig;
use netrobust::global::EmbeddingKind;
use netrobust::pipeline::{run_and_emit, PipelineExit};

#[derive(Parser, Debug)]
#[command(name = "netrobust", version, about = "Worst-case frequency-domain \
performance certification for networks of locally controlled uncertain LTI \
subsystems with ellipsoidal parameter uncertainty")]
struct Cli {
    /// Path to the JSON analysis configuration.
    #[arg(long)]
    config: PathBuf,

    /// Force parallel local/global steps.
    #[arg(long, conflicts_with = "serial")]
    parallel: bool,

    /// Force serial execution.
    #[arg(long)]
    serial: bool,

    /// Override the Monte-Carlo/identification master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Directory for report.json, report.txt and timings.txt.
    #[arg(long)]
    emit: Option<PathBuf>,

    /// Embedding kinds: "disc" or "disc+band".
    #[arg(long)]
    embeddings: Option<String>,

    /// Orientation count of the band search.
    #[arg(long)]
    band_angles: Option<usize>,

    /// Monte-Carlo samples per frequency for the lower bound.
    #[arg(long)]
    mc_samples: Option<usize>,

    /// Embed wall-clock timings in report.json (breaks byte-stability of the
    /// structured output across runs).
    #[arg(long)]
    emit_timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    // NETROBUST_THREADS caps the worker count of the global pool.
    if let Ok(threads) = std::env::var("NETROBUST_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("netrobust: NETROBUST_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("netrobust: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let mut config = match AnalysisConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("netrobust: {e}");
            return ExitCode::from(1);
        }
    };

    if cli.parallel {
        config.parallel = true;
    }
    if cli.serial {
        config.parallel = false;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(kind) = &cli.embeddings {
        config.embeddings = match kind.as_str() {
            "disc" => EmbeddingKind::Disc,
            "disc+band" | "disc_band" => EmbeddingKind::DiscAndBand,
            other => {
                eprintln!("netrobust: unknown embedding kind `{other}` (use disc or disc+band)");
                return ExitCode::from(1);
            }
        };
    }
    if let Some(n) = cli.band_angles {
        config.band_angles = n;
    }
    if let Some(n) = cli.mc_samples {
        config.mc_samples = n;
    }
    if let Err(e) = config.validate() {
        eprintln!("netrobust: {e}");
        return ExitCode::from(1);
    }

    match run_and_emit(&config, cli.emit.as_deref(), cli.emit_timings) {
        Ok(outcome) => {
            print!("{}", outcome.report.to_tabular());
            if let Some(dir) = &cli.emit {
                eprintln!("netrobust: report written to {}", dir.display());
            }
            for rec in &outcome.report.records {
                if let Some(err) = &rec.error {
                    eprintln!("netrobust: {:.6} Hz failed: {err}", rec.freq_hz);
                }
            }
            match outcome.exit {
                PipelineExit::AllPassed => ExitCode::from(0),
                PipelineExit::BoundViolated => ExitCode::from(2),
                PipelineExit::ExecutionError => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("netrobust: {e}");
            ExitCode::from(1)
        }
    }
}
