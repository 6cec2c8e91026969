use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use neurometry::commands::{self, parse_resize, EvaluateOptions, MeasureOptions};
use neurometry::report::Aggregation;
use neurometry_core::masks::Connectivity;
use neurometry_core::matching::DEFAULT_THRESHOLD;

#[derive(Parser)]
#[command(
    name = "neurometry",
    version,
    about = "Neuron instance morphometry and segmentation evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pixel adjacency for splitting single-raster RLE masks (4 or 8).
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(4..=8))]
    connectivity: u8,
    /// Working resolution as WxH, or `none` to keep native size.
    #[arg(long, default_value = "640x640")]
    resize: String,
    /// Worker threads; images are processed independently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn connectivity(&self) -> Result<Connectivity> {
        Ok(Connectivity::try_from(self.connectivity)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure every annotated cell and write measurements.csv.
    Measure {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Match predictions to ground truth; write metrics, accuracy, report and overlays.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        images: PathBuf,
        /// IoU a pair must exceed to count as a match.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Average per-image metrics instead of pooling counts.
        #[arg(long)]
        per_image: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic images/ gt/ pred/ corpus from a JSON config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Measure {
            images,
            annotations,
            common,
        } => {
            let path = commands::measure(&MeasureOptions {
                images,
                annotations,
                resize: parse_resize(&common.resize)?,
                connectivity: common.connectivity()?,
                jobs: common.jobs,
                out: common.out,
            })?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate {
            gt,
            pred,
            images,
            threshold,
            per_image,
            common,
        } => {
            let bundle = commands::evaluate(&EvaluateOptions {
                gt,
                pred,
                images,
                threshold,
                connectivity: common.connectivity()?,
                resize: parse_resize(&common.resize)?,
                aggregation: if per_image {
                    Aggregation::PerImage
                } else {
                    Aggregation::Micro
                },
                jobs: common.jobs,
                out: common.out.clone(),
            })?;
            println!(
                "evaluated {} image(s), wrote reports to {}",
                bundle.per_image.len(),
                common.out.display()
            );
            if !bundle.failures.is_empty() {
                for f in &bundle.failures {
                    eprintln!("error: {}: {}", f.image_id, f.error);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Synth { config, out } => {
            let cfg = commands::read_synth_config(&config)?;
            let stems = commands::synth(&cfg, &out)?;
            println!("wrote {} scene(s) to {}", stems.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
