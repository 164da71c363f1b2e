//! Transparency-gated fusion of fuzzy and original features.
//!
//! A 1×1 projection (with its bias shifted by a pooled channel descriptor)
//! and a squash produce a per-pixel weight `P`. `P` is clamped into a high
//! or low interval depending on how blurred the feature looks, and the
//! output is `P·T + (1 − P)·I` with `T` the rotation-averaged fuzzy feature.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blur::{box_mean_f32, BoxBlurSpec};
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::rotate::{rotate, InterpMode, RotationSpec};
use crate::tensor::{global_avg_pool, par_from_fn, Dims, Tensor4D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Squash {
    #[default]
    Sigmoid,
    Clamp,
}

impl Squash {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Squash::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Squash::Clamp => z.clamp(0.0, 1.0),
        }
    }
}

fn default_window() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Parameters of the transparency gate, usually loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrsGate {
    pub proj_weights: Vec<f32>,
    pub bias: f32,
    /// Empty means all zeros.
    #[serde(default)]
    pub pool_weights: Vec<f32>,
    pub blur_threshold: f64,
    pub alpha_high: [f32; 2],
    pub alpha_low: [f32; 2],
    #[serde(default)]
    pub squash: Squash,
    /// Local-mean radius for the blur estimate.
    #[serde(default = "default_window")]
    pub blur_window: usize,
    /// When false, `P` is used as produced, without interval clamping.
    #[serde(default = "default_true")]
    pub clamp_alpha: bool,
}

impl DrsGate {
    pub const ALPHA_HIGH: [f32; 2] = [0.6, 0.8];
    pub const ALPHA_LOW: [f32; 2] = [0.2, 0.4];

    /// Mean projection, zero bias, no pooled modulation, threshold 0.5.
    pub fn default_for_channels(channels: usize) -> Self {
        let c = channels.max(1);
        Self {
            proj_weights: vec![1.0 / c as f32; c],
            bias: 0.0,
            pool_weights: Vec::new(),
            blur_threshold: 0.5,
            alpha_high: Self::ALPHA_HIGH,
            alpha_low: Self::ALPHA_LOW,
            squash: Squash::Sigmoid,
            blur_window: 1,
            clamp_alpha: true,
        }
    }

    /// A gate whose map is the constant `p` everywhere (clamp squash, zero
    /// weights). Interval clamping is left as configured.
    pub fn constant(channels: usize, p: f32) -> Self {
        Self {
            proj_weights: vec![0.0; channels.max(1)],
            bias: p,
            squash: Squash::Clamp,
            ..Self::default_for_channels(channels)
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn channels(&self) -> usize {
        self.proj_weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.proj_weights.is_empty() {
            return Err(Error::InvalidParam("gate proj_weights must be non-empty".into()));
        }
        if !self.pool_weights.is_empty() && self.pool_weights.len() != self.proj_weights.len() {
            return Err(Error::InvalidParam(format!(
                "gate pool_weights has {} entries, proj_weights has {}",
                self.pool_weights.len(),
                self.proj_weights.len()
            )));
        }
        for (name, [lo, hi]) in [("alpha_high", self.alpha_high), ("alpha_low", self.alpha_low)] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidParam(format!("{name} must be an ordered interval in [0, 1]")));
            }
        }
        if self.blur_window == 0 {
            return Err(Error::InvalidParam("blur_window must be >= 1".into()));
        }
        Ok(())
    }

    fn check_channels(&self, dims: Dims) -> Result<()> {
        self.validate()?;
        if dims.c != self.channels() {
            return Err(Error::DimMismatch(format!(
                "feature has {} channels, gate expects {}",
                dims.c,
                self.channels()
            )));
        }
        Ok(())
    }
}

/// Per-pixel fusion weight, B×1×H×W with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransparencyMap(Tensor4D);

impl TransparencyMap {
    pub fn new(grid: Tensor4D) -> Result<Self> {
        if grid.dims().c != 1 {
            return Err(Error::DimMismatch(format!(
                "transparency map must have one channel, got {}",
                grid.dims().c
            )));
        }
        if grid.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParam("transparency values must lie in [0, 1]".into()));
        }
        Ok(Self(grid))
    }

    pub fn uniform(b: usize, h: usize, w: usize, p: f32) -> Result<Self> {
        Self::new(Tensor4D::filled(Dims::new(b, 1, h, w)?, p))
    }

    pub fn grid(&self) -> &Tensor4D {
        &self.0
    }

    pub fn into_grid(self) -> Tensor4D {
        self.0
    }
}

pub fn transparency_map(feature: &Tensor4D, gate: &DrsGate, par: Parallelism) -> Result<TransparencyMap> {
    let d = feature.dims();
    gate.check_channels(d)?;
    let pooled = global_avg_pool(feature);
    let bias_eff: Vec<f64> = (0..d.b)
        .map(|b| {
            let modulation: f64 = gate
                .pool_weights
                .iter()
                .zip(&pooled[b * d.c..(b + 1) * d.c])
                .map(|(&w, &p)| w as f64 * p as f64)
                .sum();
            gate.bias as f64 + modulation
        })
        .collect();
    let out = Dims { c: 1, ..d };
    let grid = par_from_fn(out, par, |b, _, h, w| {
        let z: f64 = gate
            .proj_weights
            .iter()
            .enumerate()
            .map(|(c, &wt)| wt as f64 * feature.at(b, c, h, w) as f64)
            .sum::<f64>()
            + bias_eff[b];
        gate.squash.apply(z) as f32
    });
    Ok(TransparencyMap(grid))
}

/// `P ⊙ fuzzy + (1 − P) ⊙ original`, with `P` broadcast over channels.
pub fn fuse(p: &TransparencyMap, fuzzy: &Tensor4D, original: &Tensor4D, par: Parallelism) -> Result<Tensor4D> {
    let (td, id, pd) = (fuzzy.dims(), original.dims(), p.grid().dims());
    if td != id {
        return Err(Error::DimMismatch(format!("fuzzy {td:?} vs original {id:?}")));
    }
    if pd.b != td.b || pd.h != td.h || pd.w != td.w {
        return Err(Error::DimMismatch(format!("transparency {pd:?} vs features {td:?}")));
    }
    let pg = p.grid();
    Ok(par_from_fn(td, par, |b, c, h, w| {
        let pv = pg.at(b, 0, h, w) as f64;
        (pv * fuzzy.at(b, c, h, w) as f64 + (1.0 - pv) * original.at(b, c, h, w) as f64) as f32
    }))
}

/// Per-batch blur score in `[0, 1]`: one minus the share of variance left in
/// the residual after subtracting the local `(2·window+1)²` mean. Smooth
/// features score near 1, white noise near 0, constants exactly 1.
pub fn blur_level_estimate(feature: &Tensor4D, window: usize, par: Parallelism) -> Result<Vec<f64>> {
    let spec = BoxBlurSpec::new(window)?;
    let means = box_mean_f32(feature, spec, par);
    let d = feature.dims();
    let n = (d.c * d.plane_len()) as f64;
    Ok((0..d.b)
        .map(|b| {
            let span = b * d.c * d.plane_len()..(b + 1) * d.c * d.plane_len();
            let x = &feature.data()[span.clone()];
            let m = &means.data()[span];
            let mean_x = x.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var_x = x.iter().map(|&v| (v as f64 - mean_x).powi(2)).sum::<f64>() / n;
            if var_x == 0.0 {
                return 1.0;
            }
            let resid: Vec<f64> = x.iter().zip(m).map(|(&a, &b)| a as f64 - b as f64).collect();
            let mean_r = resid.iter().sum::<f64>() / n;
            let var_r = resid.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / n;
            (1.0 - var_r / var_x).clamp(0.0, 1.0)
        })
        .collect())
}

/// The interval `P` is clamped into for a given blur score.
pub fn alpha_interval(blur_score: f64, gate: &DrsGate) -> [f32; 2] {
    if blur_score >= gate.blur_threshold {
        gate.alpha_high
    } else {
        gate.alpha_low
    }
}

/// Clamps every value of `p` into the interval selected by `blur_score`.
pub fn alpha_clamp(p: &TransparencyMap, blur_score: f64, gate: &DrsGate) -> TransparencyMap {
    let scores = vec![blur_score; p.grid().dims().b];
    alpha_clamp_batched(p, &scores, gate)
}

/// [`alpha_clamp`] with one score per batch entry.
pub fn alpha_clamp_batched(p: &TransparencyMap, blur_scores: &[f64], gate: &DrsGate) -> TransparencyMap {
    let d = p.grid().dims();
    assert_eq!(blur_scores.len(), d.b, "one blur score per batch entry");
    let mut grid = p.grid().clone();
    for (b, chunk) in grid.data_mut().chunks_mut(d.plane_len()).enumerate() {
        let [lo, hi] = alpha_interval(blur_scores[b], gate);
        for v in chunk {
            *v = v.clamp(lo, hi);
        }
    }
    TransparencyMap(grid)
}

/// Mean of `feature` rotated by each of `angles` (fill 0 outside support).
pub fn synthesize_fuzzy_feature(
    feature: &Tensor4D,
    angles: &[f64],
    mode: InterpMode,
    par: Parallelism,
) -> Result<Tensor4D> {
    if angles.is_empty() {
        return Err(Error::InvalidParam("at least one rotation angle is required".into()));
    }
    let rotated: Vec<Tensor4D> = angles
        .iter()
        .map(|&a| rotate(feature, &RotationSpec::new(a, mode), par))
        .collect();
    let n = angles.len() as f64;
    Ok(par_from_fn(feature.dims(), par, |b, c, h, w| {
        let s: f64 = rotated.iter().map(|t| t.at(b, c, h, w) as f64).sum();
        (s / n) as f32
    }))
}
