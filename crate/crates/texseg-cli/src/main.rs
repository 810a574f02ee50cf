//! Command-line driver for the texture segmentation toolkit.
//!
//! Subcommands: `synth` (mosaic generation), `train`, `segment` and
//! `compare`. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use texseg::features::Extractor;
use texseg::image::{Padding, WindowSpec};
use texseg::io::{write_label_map_pgm, write_label_map_png, write_pgm};
use texseg::mosaic::{preset, synthesize_mosaic, MosaicSpec};
use texseg::pipeline::{
    compare_command, segment_command, train_command, ImageSource, ModelFile, RunConfig,
    TrainingSource,
};
use texseg::Error;

#[derive(Parser)]
#[command(name = "texseg", about = "Texture feature extraction and supervised segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a texture mosaic and its ground-truth label map.
    Synth(SynthArgs),
    /// Train per-class models from reference texture images.
    Train(RunArgs),
    /// Segment an image with a trained model.
    Segment(SegmentArgs),
    /// Run the four-extractor comparison on one target.
    Compare(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Mosaic spec JSON (see the README for the schema).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in layout: two-band, five or ten.
    #[arg(long)]
    preset: Option<String>,
    /// Side length for preset mosaics.
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CommonOpts {
    /// Feature extractor: glcm, glcm_averaged, rlm, gmrf, gabor or all.
    #[arg(long, default_value = "all")]
    extractor: String,
    /// Sliding-window side length.
    #[arg(long, default_value_t = 32)]
    window_size: usize,
    /// Segmentation stride (1 = a label per pixel).
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Grey-level count for the co-occurrence and run-length paths.
    #[arg(long, default_value_t = 32)]
    levels: usize,
    /// Stride for sampling training windows from references.
    #[arg(long, default_value_t = 8)]
    train_step: usize,
    /// Use diagonal class covariances (the independence-assuming variant).
    #[arg(long)]
    diagonal_covariance: bool,
    /// Enable the GMRF ridge fallback for degenerate windows.
    #[arg(long)]
    ridge: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON mirroring the full RunConfig schema; flags override
    /// its scalar options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training source as `<class>:<image path>`; repeatable.
    #[arg(long = "train", value_name = "CLASS:PATH")]
    train: Vec<String>,
    /// Built-in mosaic preset used as the synthetic target (two-band, five
    /// or ten).
    #[arg(long)]
    preset: Option<String>,
    /// Side length for preset mosaics.
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// Target image to segment.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Ground-truth label map (PGM) for the target.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SegmentArgs {
    /// Trained model file (model_<extractor>.json).
    #[arg(long)]
    model: PathBuf,
    /// Target image to segment.
    #[arg(long)]
    input: PathBuf,
    /// Ground-truth label map (PGM) for quality reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Segmentation stride (1 = a label per pixel).
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn parse_extractors(name: &str) -> Result<Vec<Extractor>, Error> {
    if name == "all" {
        Ok(Extractor::COMPARED.to_vec())
    } else {
        Ok(vec![name.parse()?])
    }
}

fn build_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    let c = &args.common;
    cfg.extractors = parse_extractors(&c.extractor)?;
    cfg.window = WindowSpec::new(c.window_size, c.step, Padding::Mirror)?;
    cfg.levels = c.levels;
    cfg.train_step = c.train_step;
    cfg.diagonal_covariance = c.diagonal_covariance;
    cfg.ridge = c.ridge;
    cfg.seed = c.seed;
    cfg.out_dir = c.out_dir.clone();

    if let Some(name) = &args.preset {
        let mut spec = preset(name, args.size, c.seed)?;
        spec.seed = c.seed;
        let extractors = cfg.extractors.clone();
        let out_dir = cfg.out_dir.clone();
        let synthetic = RunConfig::for_mosaic(spec, extractors, out_dir);
        cfg.training = synthetic.training;
        cfg.target = synthetic.target;
    }
    for entry in &args.train {
        let (class, path) = entry.split_once(':').ok_or_else(|| {
            Error::Invalid(format!("bad --train entry '{entry}', expected CLASS:PATH"))
        })?;
        let class_id = class
            .parse::<usize>()
            .map_err(|_| Error::Invalid(format!("bad class id in --train entry '{entry}'")))?;
        cfg.training.push(TrainingSource {
            class_id,
            source: ImageSource::File { path: PathBuf::from(path) },
        });
    }
    if let Some(target) = &args.target {
        cfg.target = Some(ImageSource::File { path: target.clone() });
    }
    if args.truth.is_some() {
        cfg.truth = args.truth.clone();
    }
    Ok(cfg)
}

fn run_synth(args: &SynthArgs) -> Result<(), Error> {
    let spec: MosaicSpec = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("bad mosaic spec: {e}")))?
        }
        (None, Some(name)) => preset(name, args.size, args.seed)?,
        (None, None) => {
            return Err(Error::Invalid("synth needs --config or --preset".into()));
        }
    };
    std::fs::create_dir_all(&args.out_dir)?;
    let (image, labels) = synthesize_mosaic(&spec)?;
    write_pgm(&image, args.out_dir.join("mosaic.pgm"), false)?;
    write_label_map_pgm(&labels, args.out_dir.join("truth.pgm"))?;
    write_label_map_png(&labels, args.out_dir.join("truth.png"))?;
    let echo = serde_json::to_string_pretty(&spec)
        .map_err(|e| Error::Format(format!("spec echo failed: {e}")))?;
    std::fs::write(args.out_dir.join("mosaic_spec.json"), echo)?;
    println!(
        "wrote {} ({}x{}, {} classes)",
        args.out_dir.join("mosaic.pgm").display(),
        image.width(),
        image.height(),
        labels.num_classes()
    );
    Ok(())
}

fn run_train(args: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(args)?;
    let written = train_command(&cfg)?;
    for (extractor, path) in written {
        println!("trained {} -> {}", extractor.name(), path.display());
    }
    Ok(())
}

fn run_segment(args: &SegmentArgs) -> Result<(), Error> {
    let model = ModelFile::load(&args.model)?;
    let cfg = RunConfig {
        extractors: vec![model.extractor],
        window: WindowSpec::new(model.window_size, args.step, Padding::Mirror)?,
        levels: model.levels,
        ridge: model.ridge,
        out_dir: args.out_dir.clone(),
        target: Some(ImageSource::File { path: args.input.clone() }),
        truth: args.truth.clone(),
        ..RunConfig::default()
    };
    let outcome = segment_command(&cfg, &model)?;
    println!("labels -> {}", outcome.label_path.display());
    if let Some(report) = &outcome.report {
        print!("{report}");
    }
    Ok(())
}

fn run_compare(args: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(args)?;
    let table = compare_command(&cfg)?;
    println!("comparison -> {}", cfg.out_dir.join("comparison.csv").display());
    for row in &table.rows {
        match (&row.error, row.total_distance, row.pixel_accuracy) {
            (None, Some(total), Some(acc)) => {
                println!("{:>14}: total B = {total:.4e}, accuracy = {acc:.4}", row.extractor.name());
            }
            (Some(e), _, _) => println!("{:>14}: failed: {e}", row.extractor.name()),
            _ => {}
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Segment(args) => run_segment(args),
        Command::Compare(args) => run_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
