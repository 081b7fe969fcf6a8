use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use posit_quant::sweep::{run_sweep, summarize, CodecList, SweepConfig};

/// Quantize a model's weights with each codec and measure top-1 accuracy.
#[derive(Debug, Parser)]
#[command(name = "posit-sweep", version)]
struct Args {
    /// Model manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,

    /// IDX image file, optionally gzip-compressed.
    #[arg(long)]
    images: PathBuf,

    /// IDX label file, optionally gzip-compressed.
    #[arg(long)]
    labels: PathBuf,

    /// Evaluate only the first N images.
    #[arg(long)]
    limit: Option<usize>,

    /// Comma-separated codec list, e.g. "posit:es=0:normalized:bits=2..8,fixed:f=0..15".
    #[arg(long, default_value = "posit:es=0:normalized:bits=2..8,fixed:f=0..15")]
    codecs: String,

    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,

    /// Keep bias tensors at full precision.
    #[arg(long)]
    skip_bias: bool,

    /// Print the minimal-bits and memory-reduction summary.
    #[arg(long)]
    summary: bool,
}

fn run(args: Args) -> posit_quant::Result<()> {
    let codecs: CodecList = args.codecs.parse()?;
    let config = SweepConfig {
        manifest: args.manifest,
        images: args.images,
        labels: args.labels,
        limit: args.limit,
        codecs: codecs.0,
        out: args.out,
        jobs: args.jobs,
        skip_bias: args.skip_bias,
    };
    let outcome = run_sweep(&config)?;
    if config.out.is_none() {
        print!("{}", String::from_utf8_lossy(&outcome.csv));
    }
    if args.summary {
        println!("images evaluated: {}", outcome.images);
        println!("baseline top-1: {:.4}", outcome.baseline_top1());
        if let Some(recorded) = outcome.recorded_baseline {
            println!("recorded baseline top-1: {recorded:.4}");
        }
        print!("{}", summarize(&outcome.records));
    }
    for failed in outcome.records.iter().filter(|r| r.outcome.is_err()) {
        if let Err(msg) = &failed.outcome {
            eprintln!("warning: {} failed: {msg}", failed.codec);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
