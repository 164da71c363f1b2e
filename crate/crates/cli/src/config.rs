use std::path::{Path, PathBuf};

use serde::Deserialize;

use blurkit::augment::{AugmentConfig, RegimeChoice};
use blurkit::blur::{BoxBlurSpec, GaussianSpec, MotionBlurSpec};
use blurkit::rotate::{InterpMode, RotationSpec};
use blurkit::Parallelism;

use crate::{CliError, Cli, ModeArg, RegimeArg, Sub};

/// Seed used when neither `--seed` nor the config file sets one.
pub const DEFAULT_SEED: u64 = 42;

/// Optional defaults read from `--config` (TOML).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub blur: BlurSection,
    pub rotate: RotateSection,
    pub augment: AugmentSection,
    pub bench: BenchSection,
    pub demo: DemoSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlurSection {
    pub sigma: Option<f64>,
    pub radius: Option<usize>,
    pub length: Option<usize>,
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotateSection {
    pub mode: Option<String>,
    pub fill: Option<f32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub fold: Option<usize>,
    pub lengths: Option<Vec<usize>>,
    pub max_angle: Option<f64>,
    pub rotations: Option<usize>,
    pub alpha: Option<f64>,
    pub dilation: Option<usize>,
    pub regime: Option<RegimeChoice>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub sizes: Option<Vec<usize>>,
    pub workers: Option<Vec<usize>>,
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoSection {
    pub angles: Option<Vec<f64>>,
    pub mode: Option<String>,
    pub channels: Option<usize>,
    pub blur_length: Option<usize>,
    pub quantile: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurMode {
    Gauss(GaussianSpec),
    Box(BoxBlurSpec),
    Motion(MotionBlurSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlurParams {
    pub mode: BlurMode,
    pub input: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub kernels: Vec<String>,
    pub sizes: Vec<usize>,
    pub workers: Vec<usize>,
    pub repeats: usize,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Blur(BlurParams),
    Rotate {
        spec: RotationSpec,
        input: PathBuf,
        out: PathBuf,
        trace_oob: bool,
    },
    FuseDemo {
        feature: PathBuf,
        angles: Vec<f64>,
        gate: Option<PathBuf>,
        mode: InterpMode,
        out: PathBuf,
    },
    PyramidDemo {
        input: PathBuf,
        gate: Option<PathBuf>,
        angles: Vec<f64>,
        channels: usize,
        blur_length: usize,
        quantile: f64,
        mode: InterpMode,
        out_dir: PathBuf,
    },
    Augment {
        images: PathBuf,
        labels: PathBuf,
        out: PathBuf,
        config: AugmentConfig,
    },
    Bench(BenchParams),
}

/// Fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub workers: Parallelism,
    pub seed: u64,
    pub verbosity: u8,
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn parse_mode(flag: Option<String>, file: Option<String>) -> Result<InterpMode, CliError> {
    flag.or(file)
        .map(|m| m.parse::<InterpMode>().map_err(validation))
        .transpose()
        .map(|m| m.unwrap_or_default())
}

fn default_angles() -> Vec<f64> {
    vec![-10.0, 10.0]
}

pub(crate) fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_workers = std::env::var(blurkit::parallel::WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    let workers = match cli.workers.or(env_workers).or(file.workers) {
        Some(0) => return Err(CliError::Validation("worker count must be >= 1".into())),
        Some(n) => Parallelism::new(n),
        None => Parallelism::available(),
    };
    let seed = match &cli.command {
        Sub::Augment(a) => a.seed,
        _ => None,
    }
    .or(file.seed)
    .unwrap_or(DEFAULT_SEED);

    let command = match cli.command {
        Sub::Blur(a) => {
            let f = &file.blur;
            let mode = match a.mode {
                ModeArg::Gauss => {
                    if a.length.is_some() || a.angle.is_some() {
                        return Err(CliError::Usage("--length/--angle conflict with --mode gauss\n".into()));
                    }
                    let sigma = a.sigma.or(f.sigma).unwrap_or(1.0);
                    let spec = match a.radius.or(f.radius) {
                        Some(r) => GaussianSpec::new(sigma, r),
                        None => GaussianSpec::with_sigma(sigma),
                    };
                    BlurMode::Gauss(spec.map_err(validation)?)
                }
                ModeArg::Box => {
                    if a.sigma.is_some() || a.length.is_some() || a.angle.is_some() {
                        return Err(CliError::Usage("--sigma/--length/--angle conflict with --mode box\n".into()));
                    }
                    BlurMode::Box(BoxBlurSpec::new(a.radius.or(f.radius).unwrap_or(1)).map_err(validation)?)
                }
                ModeArg::Motion => {
                    if a.sigma.is_some() || a.radius.is_some() {
                        return Err(CliError::Usage("--sigma/--radius conflict with --mode motion\n".into()));
                    }
                    let spec = MotionBlurSpec::new(a.length.or(f.length).unwrap_or(5), a.angle.or(f.angle).unwrap_or(0.0));
                    BlurMode::Motion(spec.map_err(validation)?)
                }
            };
            Command::Blur(BlurParams {
                mode,
                input: a.input,
                out: a.out,
            })
        }
        Sub::Rotate(a) => {
            let mode = parse_mode(a.mode, file.rotate.mode.clone())?;
            let fill = a.fill.or(file.rotate.fill).unwrap_or(0.0);
            if !a.angle.is_finite() {
                return Err(CliError::Validation("--angle must be finite".into()));
            }
            Command::Rotate {
                spec: RotationSpec::new(a.angle, mode).with_fill(fill),
                input: a.input,
                out: a.out,
                trace_oob: a.trace_oob,
            }
        }
        Sub::FuseDemo(a) => {
            let angles = if a.angles.is_empty() {
                file.demo.angles.clone().unwrap_or_else(default_angles)
            } else {
                a.angles
            };
            Command::FuseDemo {
                feature: a.feature,
                angles,
                gate: a.gate,
                mode: parse_mode(a.mode, file.demo.mode.clone())?,
                out: a.out,
            }
        }
        Sub::PyramidDemo(a) => {
            let angles = if a.angles.is_empty() {
                file.demo.angles.clone().unwrap_or_else(default_angles)
            } else {
                a.angles
            };
            let quantile = a.quantile.or(file.demo.quantile).unwrap_or(0.75);
            if !(quantile > 0.0 && quantile < 1.0) {
                return Err(CliError::Validation("--quantile must be in (0, 1)".into()));
            }
            let channels = a.channels.or(file.demo.channels).unwrap_or(3);
            let blur_length = a.blur_length.or(file.demo.blur_length).unwrap_or(15);
            if channels == 0 || blur_length == 0 {
                return Err(CliError::Validation("--channels and --blur-length must be >= 1".into()));
            }
            Command::PyramidDemo {
                input: a.input,
                gate: a.gate,
                angles,
                channels,
                blur_length,
                quantile,
                mode: parse_mode(None, file.demo.mode.clone())?,
                out_dir: a.out_dir,
            }
        }
        Sub::Augment(a) => {
            let f = &file.augment;
            let d = AugmentConfig::default();
            let regime = match a.regime {
                Some(RegimeArg::Both) => RegimeChoice::Both,
                Some(RegimeArg::Uniform) => RegimeChoice::Uniform,
                Some(RegimeArg::Bbox) => RegimeChoice::Bbox,
                None => f.regime.unwrap_or(d.regime),
            };
            let config = AugmentConfig {
                fold: a.fold.or(f.fold).unwrap_or(d.fold),
                lengths: a.lengths.or(f.lengths.clone()).unwrap_or(d.lengths),
                angles: a.max_angle.or(f.max_angle).unwrap_or(d.angles),
                rotations: f.rotations.unwrap_or(d.rotations),
                bbox_alpha: a.alpha.or(f.alpha).unwrap_or(d.bbox_alpha),
                dilation: a.dilation.or(f.dilation).unwrap_or(d.dilation),
                seed,
                regime,
                ..d
            };
            config.validate().map_err(validation)?;
            Command::Augment {
                images: a.images,
                labels: a.labels,
                out: a.out,
                config,
            }
        }
        Sub::Bench(a) => {
            if a.kernel.is_empty() {
                return Err(CliError::Usage("bench requires --kernel\n".into()));
            }
            let f = &file.bench;
            let params = BenchParams {
                kernels: a.kernel,
                sizes: a.sizes.or(f.sizes.clone()).unwrap_or_else(|| vec![512]),
                workers: a
                    .workers
                    .or(f.workers.clone())
                    .unwrap_or_else(|| vec![1, blurkit::parallel::available_cores()]),
                repeats: a.repeats.or(f.repeats).unwrap_or(7),
                json: a.json,
            };
            if params.repeats < blurkit::bench::MIN_REPEATS {
                return Err(CliError::Validation(format!(
                    "--repeats must be >= {}",
                    blurkit::bench::MIN_REPEATS
                )));
            }
            if params.sizes.contains(&0) || params.workers.contains(&0) {
                return Err(CliError::Validation("bench sizes and workers must be >= 1".into()));
            }
            for k in &params.kernels {
                blurkit::bench::builtin_kernel(k).map_err(validation)?;
            }
            Command::Bench(params)
        }
    };
    Ok(RunConfig {
        command,
        workers,
        seed,
        verbosity: cli.verbose,
    })
}
