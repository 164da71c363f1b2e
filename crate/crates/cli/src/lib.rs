//! Command-line front end: argument parsing, config merging and dispatch.
//!
//! Exit codes: 0 ok, 2 usage, 3 I/O, 4 validation, 5 internal check failure.
//! Precedence for tunables is command-line flag, then `--config` file, then
//! built-in default.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::{dispatch, run_bench_command};
pub use config::{BenchParams, BlurMode, BlurParams, Command, FileConfig, RunConfig, DEFAULT_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Ok = 0,
    Usage = 2,
    Io = 3,
    Validation = 4,
    Internal = 5,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version output requested; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Info(_) => ExitCode::Ok,
            CliError::Usage(_) => ExitCode::Usage,
            CliError::Io(_) => ExitCode::Io,
            CliError::Validation(_) => ExitCode::Validation,
            CliError::Internal(_) => ExitCode::Internal,
        }
    }
}

impl From<blurkit::Error> for CliError {
    fn from(e: blurkit::Error) -> Self {
        use blurkit::Error as E;
        let msg = e.to_string();
        match e {
            E::Io { .. } | E::Codec(_) | E::Format(_) => CliError::Io(msg),
            E::ChecksumMismatch { .. } => CliError::Internal(msg),
            _ => CliError::Validation(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blurkit", version, about = "Data-parallel blur, rotation and fusion kernels")]
pub struct Cli {
    /// Worker threads (overrides BLURKIT_WORKERS); place before the subcommand.
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML config file with default parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Gaussian, boundary-safe box, or motion blur of an image.
    Blur(BlurArgs),
    /// Rotate an image on a same-size canvas.
    Rotate(RotateArgs),
    /// Transparency map, fuzzy feature and fused output for a tensor dump.
    FuseDemo(FuseDemoArgs),
    /// Clear / blurred / enhanced pyramid heat images for one image.
    PyramidDemo(PyramidDemoArgs),
    /// Expand a YOLO-labelled image set with blurred variants.
    Augment(AugmentArgs),
    /// Time parallel kernels against their serial references.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Gauss,
    Box,
    Motion,
}

#[derive(Debug, Args)]
pub struct BlurArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub angle: Option<f64>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RotateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub angle: f64,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub fill: Option<f32>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Abort on any out-of-bounds source read.
    #[arg(long)]
    pub trace_oob: bool,
}

#[derive(Debug, Args)]
pub struct FuseDemoArgs {
    #[arg(long)]
    pub feature: PathBuf,
    /// Comma-separated rotation angles in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Vec<f64>,
    #[arg(long)]
    pub gate: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PyramidDemoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub gate: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Vec<f64>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Motion-blur length used for the blurred variant.
    #[arg(long)]
    pub blur_length: Option<usize>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Both,
    Uniform,
    Bbox,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long)]
    pub max_angle: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dilation: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',')]
    pub kernel: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Worker counts to time.
    #[arg(long, value_delimiter = ',')]
    pub workers: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Parses and validates `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
                CliError::Usage(e.render().to_string())
            }
            _ => CliError::Usage(e.render().to_string()),
        }
    })?;
    config::resolve(cli)
}

/// Parses, dispatches and maps the outcome to a process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|cfg| {
        init_logging(cfg.verbosity);
        dispatch(&cfg)
    });
    match result {
        Ok(()) => ExitCode::Ok as i32,
        Err(CliError::Info(text)) => {
            print!("{text}");
            ExitCode::Ok as i32
        }
        Err(e) => {
            let code = e.exit_code();
            match &e {
                CliError::Usage(text) => eprint!("{text}"),
                other => eprintln!("error: {other}"),
            }
            code as i32
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}
