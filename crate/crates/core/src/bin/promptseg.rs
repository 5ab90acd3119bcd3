use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use promptseg::runner::{self, RunConfig, RunOptions};
use promptseg::{Error, PromptSet};

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "promptseg",
    version,
    about = "Open-vocabulary segmentation of aerial imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every image in a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Save annotated filter patches under `<out>/patches`.
        #[arg(long)]
        debug_patches: bool,
    },
    /// Score predicted label maps against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Prompt file defining the classes.
        #[arg(long)]
        classes: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score the four incremental pipeline configurations.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic corpus with mock backend configuration.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Duplicate detections, large objects and a planted whole-image box.
        #[arg(long)]
        noisy: bool,
    },
}

fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Parse { .. }) => EXIT_CONFIG,
        _ => EXIT_PARTIAL,
    }
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path).map_err(|e| match e {
        Error::Parse { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Run {
            config,
            images,
            out,
            seed,
            debug_patches,
        } => {
            let cfg = load_config(&config, seed)?;
            let summary = runner::run(&cfg, &images, &out, &RunOptions { debug_patches })?;
            let failed = summary.failures();
            for r in summary.records.iter().filter(|r| !r.is_ok()) {
                eprintln!("{}: {}", r.image, r.error.as_deref().unwrap_or_default());
            }
            println!(
                "processed {} images, {} failed; output in {}",
                summary.records.len(),
                failed,
                out.display()
            );
            Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
        }
        Command::Eval {
            pred,
            gt,
            classes,
            json,
        } => {
            let ps = PromptSet::load(&classes).map_err(|e| Error::Config(e.to_string()))?;
            let report = runner::evaluate(&pred, &gt, ps.class_number())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                let names: Vec<String> = ps.classes().iter().map(|c| c.name.clone()).collect();
                print!("{}", report.to_table(&names));
            }
            Ok(0)
        }
        Command::Ablate {
            config,
            images,
            gt,
            seed,
            json,
        } => {
            let cfg = load_config(&config, seed)?;
            let rows = runner::ablate(&cfg, &images, &gt)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows)?);
            } else {
                print!("{}", runner::ablation_table(&rows));
            }
            Ok(0)
        }
        Command::Synth {
            out,
            count,
            seed,
            noisy,
        } => {
            let layout = runner::write_mock_corpus(&out, count, seed, noisy)
                .with_context(|| format!("writing corpus to {}", out.display()))?;
            println!(
                "wrote {count} scenes; run with --config {} --images {}",
                layout.config.display(),
                layout.images.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_for(&e))
        }
    }
}
