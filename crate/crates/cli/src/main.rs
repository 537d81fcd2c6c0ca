//! Command-line front end: `track`, `phantom`, `eval`, and `plot`
//! subcommands wiring config files, pipeline stages, and batch outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arteria::config::PipelineConfig;
use arteria::error::{Error, Result};
use arteria::eval::{compare_counts, read_counts_csv};
use arteria::metrics::read_metrics_csv;
use arteria::phantom;
use arteria::pipeline::{run_track, write_profile_svgs};
use arteria::volume::{load_pgm_stack, load_raw_volume, write_raw_volume, Volume};

#[derive(Parser)]
#[command(name = "arteria", version, about = "Track arteries through a slice stack and score calcification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full tracking pipeline on a volume and write all artifacts.
    Track(TrackArgs),
    /// Generate a synthetic phantom volume with ground truth.
    Phantom(PhantomArgs),
    /// Compare two `slice,count` CSVs and print an agreement report.
    Eval(EvalArgs),
    /// Re-emit the profile SVGs from an existing metrics.csv.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrackArgs {
    /// Volume to analyze: a directory of .pgm slices, or a volume.json
    /// header with its .raw data file alongside.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for metrics, overlays, charts, and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Config file (flat key = value, TOML syntax). Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel stages (0 = auto).
    #[arg(long)]
    threads: Option<usize>,
    /// Restrict seeding to the component containing this pixel.
    #[arg(long, value_name = "X,Y")]
    seed_point: Option<String>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Built-in preset name: paper-iliac, stenosis-20, or occlusion.
    #[arg(long, conflicts_with = "input")]
    preset: Option<String>,
    /// Phantom spec JSON file (alternative to --preset).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for volume.raw, volume.json, gt_labels.raw,
    /// gt_counts.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Automated counts CSV.
    auto: PathBuf,
    /// Reference counts CSV (ground truth or human annotation).
    reference: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Existing metrics.csv.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for stenosis.svg and calc_intensity.svg.
    #[arg(long)]
    out: PathBuf,
}

fn parse_seed_point(text: &str) -> Result<[u32; 2]> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() == 2 {
        if let (Ok(x), Ok(y)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
            return Ok([x, y]);
        }
    }
    Err(Error::InvalidConfig(format!(
        "seed point must be X,Y with integer pixel coordinates, got '{text}'"
    )))
}

/// A directory loads as a PGM stack; a .json file as a raw-volume header
/// with the data file next to it (same name, .raw extension).
fn load_input(path: &Path) -> Result<Volume> {
    if path.is_dir() {
        return load_pgm_stack(path);
    }
    if path.extension().map(|e| e == "json").unwrap_or(false) {
        return load_raw_volume(path, &path.with_extension("raw"));
    }
    Err(Error::InvalidConfig(format!(
        "input must be a directory of .pgm slices or a volume .json header, got {}",
        path.display()
    )))
}

fn cmd_track(args: TrackArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(text) = &args.seed_point {
        config.seed_point = Some(parse_seed_point(text)?);
    }
    let volume = load_input(&args.input)?;
    run_track(&volume, &config, &args.out)?;
    Ok(())
}

fn cmd_phantom(args: PhantomArgs) -> Result<()> {
    let spec = match (&args.preset, &args.input) {
        (Some(name), None) => phantom::preset(name).ok_or_else(|| {
            Error::InvalidSpec(format!(
                "unknown preset '{name}' (available: {})",
                phantom::PRESET_NAMES.join(", ")
            ))
        })?,
        (None, Some(path)) => phantom::PhantomSpec::from_json(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(Error::InvalidSpec(
                "pass exactly one of --preset NAME or --input SPEC.json".into(),
            ))
        }
    };
    let (volume, gt) = phantom::generate(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    write_raw_volume(
        &volume,
        &args.out.join("volume.json"),
        &args.out.join("volume.raw"),
    )?;
    phantom::write_ground_truth(&gt, &args.out)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let auto = read_counts_csv(&args.auto)?;
    let reference = read_counts_csv(&args.reference)?;
    let report = compare_counts(&auto, &reference)?;
    println!("{}", report.to_json_line());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let profile = read_metrics_csv(&args.input)?;
    std::fs::create_dir_all(&args.out)?;
    write_profile_svgs(&profile, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(args) => cmd_track(args),
        Command::Phantom(args) => cmd_phantom(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
