//! Two-regime blur augmentation over YOLO-labelled images.
//!
//! * Uniform regime: whole-image motion blur simulating camera shake.
//! * Box regime: inside each (dilated) annotation box, the region is blended
//!   with an average of small-angle rotations of itself; everything outside
//!   the boxes is left untouched.
//!
//! Neither regime moves boxes, so label files are copied verbatim.

use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::blur::{motion_blur_u8, MotionBlurSpec};
use crate::error::{Error, Result};
use crate::io::{decode_image, encode_image, write_atomic, ImageFormat};
use crate::parallel::{map_ordered, Parallelism};
use crate::rotate::{rotate, InterpMode, RotationSpec};
use crate::tensor::{quantize, Dims, ImageU8, Tensor4D};

/// One normalized YOLO box: class and center/size in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoloAnnotation {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.y0 && row < self.y1 && col >= self.x0 && col < self.x1
    }

    /// Grows by `margin` on every side, clipped to an `h × w` image.
    pub fn dilate(&self, margin: usize, h: usize, w: usize) -> PixelBox {
        PixelBox {
            x0: self.x0.saturating_sub(margin),
            y0: self.y0.saturating_sub(margin),
            x1: (self.x1 + margin).min(w),
            y1: (self.y1 + margin).min(h),
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

impl YoloAnnotation {
    /// Pixel extent on an `h × w` image; always at least one pixel.
    pub fn pixel_box(&self, h: usize, w: usize) -> PixelBox {
        let span = |center: f64, size: f64, n: usize| {
            let lo = (((center - size / 2.0) * n as f64).round().max(0.0) as usize).min(n - 1);
            let hi = (((center + size / 2.0) * n as f64).round() as usize).clamp(lo + 1, n);
            (lo, hi)
        };
        let (x0, x1) = span(self.cx, self.w, w);
        let (y0, y1) = span(self.cy, self.h, h);
        PixelBox { x0, y0, x1, y1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledBox {
    pub line: usize,
    pub annotation: YoloAnnotation,
    pub pixels: PixelBox,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ParsedLabels {
    pub boxes: Vec<LabeledBox>,
    pub warnings: Vec<LabelWarning>,
}

impl ParsedLabels {
    pub fn pixel_boxes(&self) -> Vec<PixelBox> {
        self.boxes.iter().map(|b| b.pixels).collect()
    }
}

/// Parses `class cx cy w h` lines for an image of `dims = (height, width)`.
///
/// Blank lines are skipped. Boxes reaching outside `[0, 1]²` are clipped and
/// reported as warnings; malformed lines are errors.
pub fn parse_yolo_labels(text: &str, dims: (usize, usize)) -> Result<ParsedLabels> {
    let mut parsed = ParsedLabels::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |reason: String| Error::LabelParse { line, reason };
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let class_id: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("class id {:?} is not a non-negative integer", fields[0])))?;
        let mut vals = [0.0f64; 4];
        for (v, f) in vals.iter_mut().zip(&fields[1..]) {
            *v = f.parse().map_err(|_| err(format!("{f:?} is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("{f:?} is not finite")));
            }
        }
        let [cx, cy, w, h] = vals;
        if w <= 0.0 || h <= 0.0 {
            return Err(err("box width and height must be positive".into()));
        }
        let (left, right) = ((cx - w / 2.0).max(0.0), (cx + w / 2.0).min(1.0));
        let (top, bottom) = ((cy - h / 2.0).max(0.0), (cy + h / 2.0).min(1.0));
        if right <= left || bottom <= top {
            return Err(err("box lies entirely outside the image".into()));
        }
        let clipped = YoloAnnotation {
            class_id,
            cx: (left + right) / 2.0,
            cy: (top + bottom) / 2.0,
            w: right - left,
            h: bottom - top,
        };
        let original = YoloAnnotation { class_id, cx, cy, w, h };
        let annotation = if vals.iter().any(|v| !(0.0..=1.0).contains(v))
            || left != cx - w / 2.0
            || right != cx + w / 2.0
            || top != cy - h / 2.0
            || bottom != cy + h / 2.0
        {
            parsed.warnings.push(LabelWarning {
                line,
                message: format!("box {cx} {cy} {w} {h} clipped to the unit square"),
            });
            clipped
        } else {
            original
        };
        parsed.boxes.push(LabeledBox {
            line,
            annotation,
            pixels: annotation.pixel_box(dims.0, dims.1),
        });
    }
    Ok(parsed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RegimeChoice {
    #[default]
    Both,
    Uniform,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Original,
    Uniform,
    Bbox,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Original => "original",
            Regime::Uniform => "uniform",
            Regime::Bbox => "bbox",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Output images per input, original included.
    pub fold: usize,
    /// Motion-blur lengths (pixels) sampled by the uniform regime.
    pub lengths: Vec<usize>,
    /// Uniform-regime angle; sampled in `[0, 360)` when `None`.
    pub fixed_angle: Option<f64>,
    /// Largest absolute rotation (degrees) for the box regime.
    pub angles: f64,
    /// Rotations averaged per box.
    pub rotations: usize,
    pub bbox_alpha: f64,
    /// Box margin in pixels.
    pub dilation: usize,
    pub seed: u64,
    pub regime: RegimeChoice,
    pub mode: InterpMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            fold: 3,
            lengths: vec![5, 10, 15, 25],
            fixed_angle: None,
            angles: 10.0,
            rotations: 4,
            bbox_alpha: 0.7,
            dilation: 2,
            seed: 0,
            regime: RegimeChoice::Both,
            mode: InterpMode::Bilinear,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fold == 0 {
            return Err(Error::InvalidParam("fold must be >= 1".into()));
        }
        if self.lengths.is_empty() || self.lengths.contains(&0) {
            return Err(Error::InvalidParam("lengths must be a non-empty list of positive values".into()));
        }
        if !(0.0..=1.0).contains(&self.bbox_alpha) {
            return Err(Error::InvalidParam(format!("bbox_alpha must be in [0, 1], got {}", self.bbox_alpha)));
        }
        if !(self.angles.is_finite() && self.angles >= 0.0) {
            return Err(Error::InvalidParam("angles must be a non-negative degree bound".into()));
        }
        if self.rotations == 0 {
            return Err(Error::InvalidParam("rotations must be >= 1".into()));
        }
        if self.fixed_angle.is_some_and(|a| !a.is_finite()) {
            return Err(Error::InvalidParam("fixed_angle must be finite".into()));
        }
        Ok(())
    }

    /// Regime of variant `k` (0 is the untouched original).
    pub fn regime_for(&self, k: usize) -> Regime {
        match (k, self.regime) {
            (0, _) => Regime::Original,
            (_, RegimeChoice::Uniform) => Regime::Uniform,
            (_, RegimeChoice::Bbox) => Regime::Bbox,
            (k, RegimeChoice::Both) if k % 2 == 1 => Regime::Uniform,
            _ => Regime::Bbox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformParams {
    pub length: usize,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BboxParams {
    /// Rotation angles used for each box, in annotation order.
    pub angles: Vec<Vec<f64>>,
    pub alpha: f64,
    pub dilation: usize,
}

/// Whole-image motion blur with a sampled length and angle.
pub fn augment_uniform(
    image: &ImageU8,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
    par: Parallelism,
) -> Result<(ImageU8, UniformParams)> {
    cfg.validate()?;
    let length = cfg.lengths[rng.gen_range(0..cfg.lengths.len())];
    let angle = match cfg.fixed_angle {
        Some(a) => a,
        None => rng.gen_range(0.0..360.0),
    };
    let spec = MotionBlurSpec::new(length, angle)?;
    Ok((motion_blur_u8(image, spec, par), UniformParams { length, angle: spec.angle() }))
}

/// Rotational blur confined to each dilated box, blended with `bbox_alpha`.
///
/// Boxes are processed in order; a later box reads pixels already modified by
/// an earlier overlapping one.
pub fn augment_bbox(
    image: &ImageU8,
    boxes: &[PixelBox],
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
    par: Parallelism,
) -> Result<(ImageU8, BboxParams)> {
    cfg.validate()?;
    let (h, w) = (image.height(), image.width());
    let mut out = image.clone();
    let mut used = Vec::with_capacity(boxes.len());
    for b in boxes {
        if b.x1 > w || b.y1 > h || b.x0 >= b.x1 || b.y0 >= b.y1 {
            return Err(Error::InvalidParam(format!("box {b:?} does not fit a {h}x{w} image")));
        }
        let region = b.dilate(cfg.dilation, h, w);
        let angles: Vec<f64> = (0..cfg.rotations)
            .map(|_| if cfg.angles > 0.0 { rng.gen_range(-cfg.angles..=cfg.angles) } else { 0.0 })
            .collect();
        if cfg.bbox_alpha > 0.0 {
            blend_rotational_blur(&mut out, &region, &angles, cfg, par);
        }
        used.push(angles);
    }
    Ok((
        out,
        BboxParams {
            angles: used,
            alpha: cfg.bbox_alpha,
            dilation: cfg.dilation,
        },
    ))
}

fn blend_rotational_blur(img: &mut ImageU8, region: &PixelBox, angles: &[f64], cfg: &AugmentConfig, par: Parallelism) {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    // Margin so rotated samples near the region border come from real pixels.
    let max_angle = angles.iter().fold(0.0f64, |m, a| m.max(a.abs())).min(90.0);
    let half_diag = ((region.width().pow(2) + region.height().pow(2)) as f64).sqrt() / 2.0;
    let pad = (half_diag * max_angle.to_radians().sin()).ceil() as usize + 2;
    let win = region.dilate(pad, h, w);
    let dims = Dims::new(1, ch, win.height(), win.width()).expect("non-empty window");
    let crop = Tensor4D::from_fn(dims, |_, c, y, x| img.at(win.y0 + y, win.x0 + x, c) as f32);
    let center = (
        (region.y0 + region.y1 - 1) as f64 / 2.0 - win.y0 as f64,
        (region.x0 + region.x1 - 1) as f64 / 2.0 - win.x0 as f64,
    );
    let mut acc = vec![0.0f64; dims.len()];
    for &a in angles {
        let spec = RotationSpec::new(a, cfg.mode).with_center(center.0, center.1);
        let r = rotate(&crop, &spec, par);
        for (s, &v) in acc.iter_mut().zip(r.data()) {
            *s += v as f64;
        }
    }
    let n = angles.len() as f64;
    let alpha = cfg.bbox_alpha;
    for y in region.y0..region.y1 {
        for x in region.x0..region.x1 {
            for c in 0..ch {
                let i = dims.offset(0, c, y - win.y0, x - win.x0);
                let blurred = acc[i] / n;
                let orig = img.at(y, x, c) as f64;
                img.set(y, x, c, quantize(alpha * blurred + (1.0 - alpha) * orig));
            }
        }
    }
}

/// One line of the JSONL manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub src: String,
    pub out: Option<String>,
    pub regime: String,
    pub params: serde_json::Value,
    /// Clear counterpart (relative to the output root) for augmented images.
    pub pair: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.jsonl";

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.records
            .iter()
            .filter_map(|r| Some((r.out.as_deref()?, r.pair.as_deref()?)))
    }

    pub fn emitted(&self) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(|r| r.out.is_some())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(|r| r.warning.is_some())
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
            s.push('\n');
        }
        s
    }
}

fn is_image(path: &Path) -> bool {
    path.is_file() && ImageFormat::from_path(path).is_ok()
}

/// Seed for variant `k` of the image named `stem`.
fn variant_seed(seed: u64, stem: &str, k: usize) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(stem.as_bytes());
    h.write_u64(k as u64);
    h.finish()
}

fn warning_record(src: &Path, message: String) -> ManifestRecord {
    ManifestRecord {
        src: src.display().to_string(),
        out: None,
        regime: "skipped".into(),
        params: serde_json::Value::Null,
        pair: None,
        warning: Some(message),
    }
}

fn config_params(cfg: &AugmentConfig) -> serde_json::Value {
    json!({ "seed": cfg.seed, "fold": cfg.fold, "max_angle": cfg.angles, "rotations": cfg.rotations })
}

/// Writes `fold` variants of every labelled image in `image_dir` under
/// `out_dir/images` and `out_dir/labels`, plus `out_dir/manifest.jsonl`.
pub fn expand_dataset(
    image_dir: &Path,
    label_dir: &Path,
    out_dir: &Path,
    cfg: &AugmentConfig,
    par: Parallelism,
) -> Result<Manifest> {
    cfg.validate()?;
    let mut images: Vec<PathBuf> = std::fs::read_dir(image_dir)
        .map_err(|e| Error::io(image_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    images.sort();
    let (img_out, lbl_out) = (out_dir.join("images"), out_dir.join("labels"));
    for dir in [&img_out, &lbl_out] {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    // Each image runs its variants serially; images fan out across workers.
    let per_image = map_ordered(&images, par, |path| {
        process_image(path, label_dir, &img_out, &lbl_out, cfg)
            .unwrap_or_else(|e| vec![warning_record(path, e.to_string())])
    });
    let manifest = Manifest {
        records: per_image.into_iter().flatten().collect(),
    };
    write_atomic(out_dir.join(Manifest::FILE_NAME), manifest.to_jsonl().as_bytes())?;
    Ok(manifest)
}

fn process_image(
    path: &Path,
    label_dir: &Path,
    img_out: &Path,
    lbl_out: &Path,
    cfg: &AugmentConfig,
) -> Result<Vec<ManifestRecord>> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Format(format!("{}: unusable file name", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("png");
    let label_path = label_dir.join(format!("{stem}.txt"));
    if !label_path.is_file() {
        return Ok(vec![warning_record(path, format!("no label file {}", label_path.display()))]);
    }
    let label_bytes = std::fs::read(&label_path).map_err(|e| Error::io(&label_path, e))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let image = decode_image(&bytes)?;
    let labels = parse_yolo_labels(&String::from_utf8_lossy(&label_bytes), (image.height(), image.width()))?;
    let format = ImageFormat::from_path(path)?;
    let inner = Parallelism::serial();

    let original = format!("{stem}.{ext}");
    let mut records = Vec::with_capacity(cfg.fold);
    for k in 0..cfg.fold {
        let regime = cfg.regime_for(k);
        let name = if k == 0 {
            original.clone()
        } else {
            format!("{stem}_aug{k}_{}.{ext}", regime.as_str())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(variant_seed(cfg.seed, stem, k));
        let (out_bytes, params) = match regime {
            Regime::Original => (bytes.clone(), config_params(cfg)),
            Regime::Uniform => {
                let (img, p) = augment_uniform(&image, cfg, &mut rng, inner)?;
                (encode_image(&img, format)?, serde_json::to_value(p)?)
            }
            Regime::Bbox => {
                let (img, p) = augment_bbox(&image, &labels.pixel_boxes(), cfg, &mut rng, inner)?;
                (encode_image(&img, format)?, serde_json::to_value(p)?)
            }
        };
        write_atomic(img_out.join(&name), &out_bytes)?;
        let label_name = format!("{}.txt", Path::new(&name).file_stem().and_then(|s| s.to_str()).unwrap_or(stem));
        write_atomic(lbl_out.join(label_name), &label_bytes)?;
        records.push(ManifestRecord {
            src: path.display().to_string(),
            out: Some(format!("images/{name}")),
            regime: regime.as_str().into(),
            params,
            pair: (k > 0).then(|| format!("images/{original}")),
            warning: None,
        });
    }
    for w in &labels.warnings {
        records.push(warning_record(path, format!("{}: line {}: {}", label_path.display(), w.line, w.message)));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize, ch: usize, seed: u64) -> ImageU8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageU8::new(h, w, ch, (0..h * w * ch).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn parse_centered_box() {
        let p = parse_yolo_labels("0 0.5 0.5 0.2 0.2\n", (100, 100)).unwrap();
        assert_eq!(p.boxes.len(), 1);
        assert_eq!(p.boxes[0].pixels, PixelBox { x0: 40, y0: 40, x1: 60, y1: 60 });
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn parse_empty_and_blank() {
        assert!(parse_yolo_labels("", (10, 10)).unwrap().boxes.is_empty());
        assert_eq!(parse_yolo_labels("\n  \n1 0.5 0.5 0.1 0.1\n", (10, 10)).unwrap().boxes[0].line, 3);
    }

    #[test]
    fn parse_errors_name_line() {
        let err = parse_yolo_labels("1 0.5 0.5 0.2", (10, 10)).unwrap_err();
        assert!(matches!(err, Error::LabelParse { line: 1, .. }));
        let err = parse_yolo_labels("0 0.5 0.5 0.2 0.2\nx 0.5 0.5 0.2 0.2", (10, 10)).unwrap_err();
        assert!(matches!(err, Error::LabelParse { line: 2, .. }));
        assert!(parse_yolo_labels("-1 0.5 0.5 0.2 0.2", (10, 10)).is_err());
        assert!(parse_yolo_labels("0 0.5 0.5 0 0.2", (10, 10)).is_err());
        assert!(parse_yolo_labels("0 0.5 0.5 nan 0.2", (10, 10)).is_err());
    }

    #[test]
    fn parse_clips_with_warning() {
        let p = parse_yolo_labels("2 0.95 0.5 0.2 0.2\n", (100, 100)).unwrap();
        assert_eq!(p.warnings.len(), 1);
        let a = p.boxes[0].annotation;
        assert!((a.cx + a.w / 2.0 - 1.0).abs() < 1e-12);
        assert_eq!(p.boxes[0].pixels.x1, 100);
    }

    #[test]
    fn config_validation() {
        let ok = AugmentConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            AugmentConfig { fold: 0, ..ok.clone() },
            AugmentConfig { lengths: vec![], ..ok.clone() },
            AugmentConfig { bbox_alpha: 1.5, ..ok.clone() },
            AugmentConfig { rotations: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn regime_alternation() {
        let cfg = AugmentConfig { fold: 5, ..Default::default() };
        let r: Vec<Regime> = (0..5).map(|k| cfg.regime_for(k)).collect();
        assert_eq!(r, vec![Regime::Original, Regime::Uniform, Regime::Bbox, Regime::Uniform, Regime::Bbox]);
    }

    #[test]
    fn uniform_identity_and_direct_equivalence() {
        let img = textured(20, 30, 3, 1);
        let id_cfg = AugmentConfig { lengths: vec![1], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _) = augment_uniform(&img, &id_cfg, &mut rng, Parallelism::serial()).unwrap();
        assert_eq!(out, img);

        let cfg = AugmentConfig { lengths: vec![5], fixed_angle: Some(0.0), ..Default::default() };
        let (out, p) = augment_uniform(&img, &cfg, &mut rng, Parallelism::new(2)).unwrap();
        assert_eq!(p, UniformParams { length: 5, angle: 0.0 });
        let direct = motion_blur_u8(&img, MotionBlurSpec::new(5, 0.0).unwrap(), Parallelism::serial());
        assert_eq!(out, direct);
    }

    #[test]
    fn uniform_deterministic_for_seed() {
        let img = textured(16, 16, 1, 2);
        let cfg = AugmentConfig::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            augment_uniform(&img, &cfg, &mut rng, Parallelism::new(3)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bbox_identities() {
        let img = textured(40, 40, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, _) = augment_bbox(&img, &[], &AugmentConfig::default(), &mut rng, Parallelism::serial()).unwrap();
        assert_eq!(out, img);
        let b = PixelBox { x0: 10, y0: 10, x1: 30, y1: 30 };
        let cfg = AugmentConfig { bbox_alpha: 0.0, ..Default::default() };
        let (out, _) = augment_bbox(&img, &[b], &cfg, &mut rng, Parallelism::serial()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn bbox_changes_only_dilated_box() {
        let img = textured(64, 64, 3, 4);
        let labels = parse_yolo_labels("0 0.5 0.5 0.4 0.3\n", (64, 64)).unwrap();
        let cfg = AugmentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (out, params) = augment_bbox(&img, &labels.pixel_boxes(), &cfg, &mut rng, Parallelism::new(2)).unwrap();
        assert_eq!(params.angles.len(), 1);
        assert!(params.angles[0].iter().all(|a| a.abs() <= 10.0));
        let region = labels.boxes[0].pixels.dilate(cfg.dilation, 64, 64);
        let (mut inside, mut changed) = (0, 0);
        for y in 0..64 {
            for x in 0..64 {
                let diff = (0..3).any(|c| out.at(y, x, c) != img.at(y, x, c));
                if region.contains(y, x) {
                    inside += 1;
                    changed += diff as usize;
                } else {
                    assert!(!diff, "background pixel ({y},{x}) changed");
                }
            }
        }
        // Pixels at the pivot see nearly no rotation, so not every one changes.
        assert!(changed * 10 >= inside * 9, "{changed}/{inside}");
    }

    #[test]
    fn bbox_rejects_box_outside_image() {
        let img = textured(10, 10, 1, 5);
        let b = PixelBox { x0: 5, y0: 5, x1: 12, y1: 8 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(augment_bbox(&img, &[b], &AugmentConfig::default(), &mut rng, Parallelism::serial()).is_err());
    }
}
