//! Desk-scale fuzzy-feature pyramid branch.
//!
//! A fixed Gaussian pyramid stands in for the detector backbone. The upper
//! (stride 32) and middle (stride 16) levels are fused with their
//! rotation-averaged fuzzy versions through the transparency gate; the lower
//! (stride 8) level is passed through unchanged.

use serde::Serialize;

use crate::blur::{gaussian_filter, GaussianSpec};
use crate::drs::{alpha_clamp_batched, blur_level_estimate, fuse, synthesize_fuzzy_feature, transparency_map, DrsGate};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::rotate::InterpMode;
use crate::tensor::{par_from_fn, Dims, Tensor4D};

/// Smoothing applied before each 2× decimation.
pub const PYRAMID_SIGMA: f64 = 1.0;
/// Smallest accepted input side.
pub const MIN_INPUT_SIDE: usize = 32;
pub const STRIDES: [usize; 3] = [8, 16, 32];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelTag {
    Lower,
    Middle,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    pub stride: usize,
    pub tag: LevelTag,
    pub features: Tensor4D,
}

/// Levels ordered from the finest (stride 8) to the coarsest (stride 32).
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevels {
    pub levels: Vec<PyramidLevel>,
}

impl PyramidLevels {
    pub fn get(&self, tag: LevelTag) -> Option<&PyramidLevel> {
        self.levels.iter().find(|l| l.tag == tag)
    }
}

/// Per-channel gain used when replicating the single-channel pyramid.
pub fn channel_gain(c: usize) -> f32 {
    1.0 / (1 + c) as f32
}

/// Gaussian smoothing followed by keeping every other row and column.
pub fn downsample2(input: &Tensor4D, par: Parallelism) -> Tensor4D {
    let smooth = gaussian_filter(input, GaussianSpec::with_sigma(PYRAMID_SIGMA).expect("sigma > 0"), par);
    let d = input.dims();
    let out = Dims {
        h: d.h.div_ceil(2),
        w: d.w.div_ceil(2),
        ..d
    };
    par_from_fn(out, par, |b, c, h, w| smooth.at(b, c, 2 * h, 2 * w))
}

/// Builds the stride-8/16/32 levels of a single-channel image and replicates
/// them across `channels` with fixed gains.
pub fn build_pyramid(image: &Tensor4D, channels: usize, par: Parallelism) -> Result<PyramidLevels> {
    let d = image.dims();
    if d.c != 1 {
        return Err(Error::DimMismatch(format!("pyramid input must have one channel, got {}", d.c)));
    }
    if d.h < MIN_INPUT_SIDE || d.w < MIN_INPUT_SIDE {
        return Err(Error::InvalidDims(format!(
            "pyramid input must be at least {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE}, got {}x{}",
            d.h, d.w
        )));
    }
    if channels == 0 {
        return Err(Error::InvalidParam("pyramid needs at least one channel".into()));
    }
    let mut current = image.clone();
    let mut stride = 1;
    let mut levels = Vec::with_capacity(STRIDES.len());
    for (&target, tag) in STRIDES.iter().zip([LevelTag::Lower, LevelTag::Middle, LevelTag::Upper]) {
        while stride < target {
            current = downsample2(&current, par);
            stride *= 2;
        }
        let cd = current.dims();
        let src = &current;
        let features = par_from_fn(Dims { c: channels, ..cd }, par, |b, c, h, w| src.at(b, 0, h, w) * channel_gain(c));
        levels.push(PyramidLevel { stride, tag, features });
    }
    Ok(PyramidLevels { levels })
}

/// Fuses upper and middle levels with their fuzzy versions; the lower level
/// is copied unchanged.
pub fn dfrc_enhance(
    levels: &PyramidLevels,
    gate: &DrsGate,
    angles: &[f64],
    mode: InterpMode,
    par: Parallelism,
) -> Result<PyramidLevels> {
    if levels.levels.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "need at least 3 pyramid levels, got {}",
            levels.levels.len()
        )));
    }
    let enhanced = levels
        .levels
        .iter()
        .map(|level| {
            if level.tag == LevelTag::Lower {
                return Ok(level.clone());
            }
            let features = enhance_level(&level.features, gate, angles, mode, par)?;
            Ok(PyramidLevel { features, ..level.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PyramidLevels { levels: enhanced })
}

fn enhance_level(
    feature: &Tensor4D,
    gate: &DrsGate,
    angles: &[f64],
    mode: InterpMode,
    par: Parallelism,
) -> Result<Tensor4D> {
    let mut p = transparency_map(feature, gate, par)?;
    if gate.clamp_alpha {
        let scores = blur_level_estimate(feature, gate.blur_window, par)?;
        p = alpha_clamp_batched(&p, &scores, gate);
    }
    let fuzzy = synthesize_fuzzy_feature(feature, angles, mode, par)?;
    fuse(&p, &fuzzy, feature, par)
}

/// Per-pixel channel-mean magnitude, flattened over batch and space.
fn magnitude_map(feature: &Tensor4D) -> Vec<f64> {
    feature.channel_mean().data().iter().map(|&v| (v as f64).abs()).collect()
}

/// Lower-nearest-rank quantile of `values` (ties resolve to the smaller value).
fn lower_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let idx = (q * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Fraction of pixels whose channel-mean magnitude strictly exceeds the
/// `quantile` of `reference`'s magnitudes.
pub fn attention_spread_against(feature: &Tensor4D, reference: &Tensor4D, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidParam(format!("quantile must be in (0, 1), got {quantile}")));
    }
    let (fd, rd) = (feature.dims(), reference.dims());
    if (fd.b, fd.h, fd.w) != (rd.b, rd.h, rd.w) {
        return Err(Error::DimMismatch(format!("feature {fd:?} vs reference {rd:?}")));
    }
    let threshold = lower_quantile(&magnitude_map(reference), quantile);
    let m = magnitude_map(feature);
    Ok(m.iter().filter(|&&v| v > threshold).count() as f64 / m.len() as f64)
}

/// [`attention_spread_against`] with the feature as its own reference.
pub fn attention_spread(feature: &Tensor4D, quantile: f64) -> Result<f64> {
    attention_spread_against(feature, feature, quantile)
}

/// Spread of the upper and middle levels of `subject` against the matching
/// levels of `clear`, averaged over the two levels.
pub fn branch_spread(subject: &PyramidLevels, clear: &PyramidLevels, quantile: f64) -> Result<f64> {
    let mut total = 0.0;
    for tag in [LevelTag::Middle, LevelTag::Upper] {
        let s = subject
            .get(tag)
            .ok_or_else(|| Error::InvalidParam(format!("subject pyramid lacks {tag:?} level")))?;
        let r = clear
            .get(tag)
            .ok_or_else(|| Error::InvalidParam(format!("reference pyramid lacks {tag:?} level")))?;
        total += attention_spread_against(&s.features, &r.features, quantile)?;
    }
    Ok(total / 2.0)
}
