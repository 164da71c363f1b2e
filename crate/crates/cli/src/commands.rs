use std::path::Path;

use blurkit::augment::expand_dataset;
use blurkit::bench::{run_bench_with, BenchCase, BenchKernel, BenchReport};
use blurkit::blur::{box_blur_boundary_safe, gaussian_filter, motion_blur_u8};
use blurkit::drs::{alpha_clamp_batched, blur_level_estimate, fuse, synthesize_fuzzy_feature, transparency_map, DrsGate};
use blurkit::io::{encode_image, encode_tensor, heat_image, load_tensor, read_image, write_atomic, ImageFormat};
use blurkit::pyramid::{branch_spread, build_pyramid, dfrc_enhance};
use blurkit::rotate::rotate_traced;
use blurkit::tensor::{ImageU8, Tensor4D};
use serde_json::json;

use crate::config::{BenchParams, BlurMode, Command, RunConfig};
use crate::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn save_image(path: &Path, img: &ImageU8) -> Result<(), CliError> {
    let bytes = encode_image(img, ImageFormat::from_path(path)?)?;
    Ok(write_atomic(path, &bytes)?)
}

fn load_gate(path: Option<&Path>, channels: usize) -> Result<DrsGate, CliError> {
    let gate = match path {
        Some(p) => DrsGate::load(p)?,
        None => DrsGate::default_for_channels(channels),
    };
    gate.validate()?;
    Ok(gate)
}

pub fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    let par = cfg.workers;
    log::info!("running with {} worker(s)", par.workers());
    match &cfg.command {
        Command::Blur(p) => {
            let img = read_image(&p.input)?;
            let out = match p.mode {
                BlurMode::Box(spec) => box_blur_boundary_safe(&img, spec, par),
                BlurMode::Motion(spec) => motion_blur_u8(&img, spec, par),
                BlurMode::Gauss(spec) => ImageU8::from_tensor(&gaussian_filter(&img.to_tensor(), spec, par))?,
            };
            save_image(&p.out, &out)
        }
        Command::Rotate {
            spec,
            input,
            out,
            trace_oob,
        } => {
            let img = read_image(input)?;
            let (rotated, oob) = rotate_traced(&img.to_tensor(), spec, par, *trace_oob);
            if oob > 0 {
                return Err(CliError::Internal(format!("{oob} out-of-bounds source reads")));
            }
            save_image(out, &ImageU8::from_tensor(&rotated)?)
        }
        Command::FuseDemo {
            feature,
            angles,
            gate,
            mode,
            out,
        } => {
            let f = load_tensor(feature)?;
            let gate = load_gate(gate.as_deref(), f.dims().c)?;
            let p = transparency_map(&f, &gate, par)?;
            let scores = blur_level_estimate(&f, gate.blur_window, par)?;
            log::info!("blur scores per batch: {scores:?}");
            let p = if gate.clamp_alpha { alpha_clamp_batched(&p, &scores, &gate) } else { p };
            let fuzzy = synthesize_fuzzy_feature(&f, angles, *mode, par)?;
            let fused = fuse(&p, &fuzzy, &f, par)?;
            std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
            save_image(&out.join("transparency.png"), &heat_image(p.grid()))?;
            save_image(&out.join("fuzzy.png"), &heat_image(&fuzzy))?;
            save_image(&out.join("fused.png"), &heat_image(&fused))?;
            write_atomic(out.join("fused.tensor"), &encode_tensor(&fused))?;
            Ok(())
        }
        Command::PyramidDemo {
            input,
            gate,
            angles,
            channels,
            blur_length,
            quantile,
            mode,
            out_dir,
        } => {
            let gray = read_image(input)?.to_gray();
            let spec = blurkit::blur::MotionBlurSpec::new(*blur_length, 0.0)?;
            let blurred = motion_blur_u8(&gray, spec, par);
            let to_unit = |img: &ImageU8| {
                let t = img.to_tensor();
                Tensor4D::new(t.dims(), t.data().iter().map(|v| v / 255.0).collect())
            };
            let clear = build_pyramid(&to_unit(&gray)?, *channels, par)?;
            let base = build_pyramid(&to_unit(&blurred)?, *channels, par)?;
            let gate = load_gate(gate.as_deref(), *channels)?;
            let enhanced = dfrc_enhance(&base, &gate, angles, *mode, par)?;
            std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
            for ((c, b), e) in clear.levels.iter().zip(&base.levels).zip(&enhanced.levels) {
                let panel = side_by_side(&[&c.features, &b.features, &e.features], c.stride)?;
                save_image(&out_dir.join(format!("level_s{}.png", c.stride)), &panel)?;
            }
            let report = json!({
                "quantile": quantile,
                "spread_clear": branch_spread(&clear, &clear, *quantile)?,
                "spread_blurred": branch_spread(&base, &clear, *quantile)?,
                "spread_enhanced": branch_spread(&enhanced, &clear, *quantile)?,
            });
            write_atomic(
                out_dir.join("spread.json"),
                serde_json::to_string_pretty(&report).expect("json").as_bytes(),
            )?;
            Ok(())
        }
        Command::Augment {
            images,
            labels,
            out,
            config,
        } => {
            std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
            let manifest = expand_dataset(images, labels, out, config, par)?;
            for w in manifest.warnings() {
                log::warn!("{}: {}", w.src, w.warning.as_deref().unwrap_or_default());
            }
            log::info!("wrote {} images", manifest.emitted().count());
            Ok(())
        }
        Command::Bench(params) => {
            let kernels: Vec<Box<dyn BenchKernel>> = params
                .kernels
                .iter()
                .map(|k| blurkit::bench::builtin_kernel(k))
                .collect::<Result<_, _>>()?;
            let refs: Vec<&dyn BenchKernel> = kernels.iter().map(|k| k.as_ref()).collect();
            let report = run_bench_command(&refs, params)?;
            print!("{}", report.to_table());
            Ok(())
        }
    }
}

/// Runs the bench cross product and writes the JSON report if requested.
pub fn run_bench_command(kernels: &[&dyn BenchKernel], params: &BenchParams) -> Result<BenchReport, CliError> {
    let cases: Vec<BenchCase> = params
        .kernels
        .iter()
        .flat_map(|k| {
            params
                .sizes
                .iter()
                .flat_map(move |&s| params.workers.iter().map(move |&w| BenchCase::new(k.clone(), s, w)))
        })
        .collect();
    let report = run_bench_with(kernels, &cases, params.repeats)?;
    if let Some(path) = &params.json {
        write_atomic(path, report.to_json().as_bytes())?;
    }
    Ok(report)
}

/// Heat images of `levels`, upsampled by `scale` and laid out left to right
/// with a 2-pixel gap.
fn side_by_side(levels: &[&Tensor4D], scale: usize) -> Result<ImageU8, CliError> {
    let heats: Vec<ImageU8> = levels.iter().map(|t| heat_image(t)).collect();
    let (h, w) = (heats[0].height() * scale, heats[0].width() * scale);
    let gap = 2;
    let total_w = heats.len() * w + (heats.len() - 1) * gap;
    let mut out = ImageU8::filled(h, total_w, 1, 0)?;
    for (i, heat) in heats.iter().enumerate() {
        let x0 = i * (w + gap);
        for y in 0..h {
            for x in 0..w {
                out.set(y, x0 + x, 0, heat.at(y / scale, x / scale, 0));
            }
        }
    }
    Ok(out)
}
