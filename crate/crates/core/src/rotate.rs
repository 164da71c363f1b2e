//! Inverse-mapped rotation with corner / edge / interior boundary handling.
//!
//! Each output pixel is back-rotated into the source. The interpolation
//! support around that point decides how it is sampled:
//!
//! * support fully inside the source: the requested mode (nearest, bilinear
//!   or Catmull-Rom bicubic);
//! * support clipped on one side (edge): bilinear over the in-bounds taps,
//!   renormalized by their weight;
//! * support clipped on two perpendicular sides (corner): nearest in-bounds
//!   pixel;
//! * no in-bounds tap carries weight: `fill`.
//!
//! All source reads go through a guarded accessor which counts (or aborts on)
//! out-of-bounds requests.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::blur::exact_sin_cos;
use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::tensor::{par_map_pixels, Tensor4D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InterpMode {
    Nearest,
    #[default]
    Bilinear,
    Bicubic,
}

impl InterpMode {
    /// Taps the mode reads on each side of the sample point: `(before, after)`
    /// relative to `floor(coord)`.
    fn support(self) -> (isize, isize) {
        match self {
            InterpMode::Nearest => (0, 0),
            InterpMode::Bilinear => (0, 1),
            InterpMode::Bicubic => (1, 2),
        }
    }
}

impl std::str::FromStr for InterpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest" => Ok(InterpMode::Nearest),
            "bilinear" => Ok(InterpMode::Bilinear),
            "bicubic" => Ok(InterpMode::Bicubic),
            other => Err(Error::InvalidParam(format!("unknown interpolation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    /// Degrees; positive turns the content counterclockwise on screen.
    pub angle: f64,
    pub mode: InterpMode,
    pub fill: f32,
    /// Pivot as `(row, col)`; the geometric image center when `None`.
    pub center: Option<(f64, f64)>,
}

impl RotationSpec {
    pub fn new(angle: f64, mode: InterpMode) -> Self {
        Self {
            angle,
            mode,
            fill: 0.0,
            center: None,
        }
    }

    pub fn with_fill(mut self, fill: f32) -> Self {
        self.fill = fill;
        self
    }

    pub fn with_center(mut self, row: f64, col: f64) -> Self {
        self.center = Some((row, col));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    Top,
    Bottom,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionClass {
    Corner,
    Edge(EdgeSide),
    Interior,
}

/// Classifies the rectangle `[r_lo, r_hi] × [c_lo, c_hi]` against an
/// `h × w` grid by which sides it crosses.
fn classify_span(r_lo: isize, r_hi: isize, c_lo: isize, c_hi: isize, h: usize, w: usize) -> RegionClass {
    let top = r_lo < 0;
    let bottom = r_hi >= h as isize;
    let left = c_lo < 0;
    let right = c_hi >= w as isize;
    match (top || bottom, left || right) {
        (true, true) => RegionClass::Corner,
        (true, false) => RegionClass::Edge(if top { EdgeSide::Top } else { EdgeSide::Bottom }),
        (false, true) => RegionClass::Edge(if left { EdgeSide::Left } else { EdgeSide::Right }),
        (false, false) => RegionClass::Interior,
    }
}

/// Region of pixel `(h, w)` in an `dims.0 × dims.1` grid whose
/// `band`-radius neighborhood is needed.
pub fn classify_region(h: usize, w: usize, dims: (usize, usize), band: usize) -> RegionClass {
    let (h, w, b) = (h as isize, w as isize, band as isize);
    classify_span(h - b, h + b, w - b, w + b, dims.0, dims.1)
}

/// Bounds-guarded view of one source plane.
struct GuardedPlane<'a> {
    data: &'a [f32],
    h: isize,
    w: isize,
    oob: &'a AtomicU64,
    abort_on_oob: bool,
}

impl GuardedPlane<'_> {
    #[inline]
    fn contains(&self, r: isize, c: isize) -> bool {
        r >= 0 && r < self.h && c >= 0 && c < self.w
    }

    #[inline]
    fn read(&self, r: isize, c: isize) -> f32 {
        if !self.contains(r, c) {
            self.oob.fetch_add(1, Ordering::Relaxed);
            if self.abort_on_oob {
                panic!("out-of-bounds source read at ({r}, {c}) in {}x{} plane", self.h, self.w);
            }
            return 0.0;
        }
        self.data[(r * self.w + c) as usize]
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (-t3 + 2.0 * t2 - t) * 0.5,
        (3.0 * t3 - 5.0 * t2 + 2.0) * 0.5,
        (-3.0 * t3 + 4.0 * t2 + t) * 0.5,
        (t3 - t2) * 0.5,
    ]
}

fn sample(src: &GuardedPlane<'_>, sy: f64, sx: f64, mode: InterpMode, fill: f32) -> f32 {
    let (r0, c0) = (sy.floor() as isize, sx.floor() as isize);
    let (fy, fx) = (sy - r0 as f64, sx - c0 as f64);

    let region = match mode {
        InterpMode::Nearest => {
            let (rn, cn) = (sy.round() as isize, sx.round() as isize);
            classify_span(rn, rn, cn, cn, src.h as usize, src.w as usize)
        }
        _ => {
            let (before, after) = mode.support();
            classify_span(r0 - before, r0 + after, c0 - before, c0 + after, src.h as usize, src.w as usize)
        }
    };

    if region == RegionClass::Interior {
        return match mode {
            InterpMode::Nearest => src.read(sy.round() as isize, sx.round() as isize),
            InterpMode::Bilinear => {
                let v = (1.0 - fy) * ((1.0 - fx) * src.read(r0, c0) as f64 + fx * src.read(r0, c0 + 1) as f64)
                    + fy * ((1.0 - fx) * src.read(r0 + 1, c0) as f64 + fx * src.read(r0 + 1, c0 + 1) as f64);
                v as f32
            }
            InterpMode::Bicubic => {
                let wy = catmull_rom(fy);
                let wx = catmull_rom(fx);
                let mut acc = 0.0f64;
                for (i, wyi) in wy.iter().enumerate() {
                    let r = r0 - 1 + i as isize;
                    let mut row = 0.0f64;
                    for (j, wxj) in wx.iter().enumerate() {
                        row += wxj * src.read(r, c0 - 1 + j as isize) as f64;
                    }
                    acc += wyi * row;
                }
                acc as f32
            }
        };
    }

    // Boundary: work with the bilinear window and its in-bounds taps only.
    let taps = [
        (r0, c0, (1.0 - fy) * (1.0 - fx)),
        (r0, c0 + 1, (1.0 - fy) * fx),
        (r0 + 1, c0, fy * (1.0 - fx)),
        (r0 + 1, c0 + 1, fy * fx),
    ];
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for &(r, c, wt) in &taps {
        if wt > 0.0 && src.contains(r, c) {
            num += wt * src.read(r, c) as f64;
            den += wt;
        }
    }
    if den == 0.0 {
        return fill;
    }
    match region {
        RegionClass::Corner => {
            let r = (sy.round() as isize).clamp(0, src.h - 1);
            let c = (sx.round() as isize).clamp(0, src.w - 1);
            src.read(r, c)
        }
        _ => (num / den) as f32,
    }
}

/// Geometry shared by the parallel kernel and the serial oracle.
#[derive(Clone, Copy)]
struct InverseMap {
    cy: f64,
    cx: f64,
    sin: f64,
    cos: f64,
}

impl InverseMap {
    fn new(spec: &RotationSpec, h: usize, w: usize) -> Self {
        let (cy, cx) = spec
            .center
            .unwrap_or(((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0));
        let (sin, cos) = exact_sin_cos(spec.angle);
        Self { cy, cx, sin, cos }
    }

    #[inline]
    fn source(&self, y: usize, x: usize) -> (f64, f64) {
        let dy = y as f64 - self.cy;
        let dx = x as f64 - self.cx;
        (
            self.cy - dx * self.sin + dy * self.cos,
            self.cx + dx * self.cos + dy * self.sin,
        )
    }
}

/// Rotates every plane of `input` on a same-size canvas.
pub fn rotate(input: &Tensor4D, spec: &RotationSpec, par: Parallelism) -> Tensor4D {
    rotate_traced(input, spec, par, false).0
}

/// [`rotate`] that also reports how many out-of-bounds source reads were
/// attempted. With `abort_on_oob` the first such read panics.
pub fn rotate_traced(input: &Tensor4D, spec: &RotationSpec, par: Parallelism, abort_on_oob: bool) -> (Tensor4D, u64) {
    let d = input.dims();
    let map = InverseMap::new(spec, d.h, d.w);
    let oob = AtomicU64::new(0);
    let out = par_map_pixels(input, par, |b, c, h, w, x| {
        let src = GuardedPlane {
            data: x.plane(b, c),
            h: d.h as isize,
            w: d.w as isize,
            oob: &oob,
            abort_on_oob,
        };
        let (sy, sx) = map.source(h, w);
        sample(&src, sy, sx, spec.mode, spec.fill)
    });
    (out, oob.load(Ordering::Relaxed))
}

/// Single-threaded nested-loop reference for [`rotate`].
pub fn rotate_oracle(input: &Tensor4D, spec: &RotationSpec) -> Tensor4D {
    let d = input.dims();
    let map = InverseMap::new(spec, d.h, d.w);
    let oob = AtomicU64::new(0);
    let mut out = Tensor4D::zeros(d);
    for b in 0..d.b {
        for c in 0..d.c {
            let src = GuardedPlane {
                data: input.plane(b, c),
                h: d.h as isize,
                w: d.w as isize,
                oob: &oob,
                abort_on_oob: true,
            };
            for h in 0..d.h {
                for w in 0..d.w {
                    let (sy, sx) = map.source(h, w);
                    let i = d.offset(b, c, h, w);
                    out.data_mut()[i] = sample(&src, sy, sx, spec.mode, spec.fill);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const MODES: [InterpMode; 3] = [InterpMode::Nearest, InterpMode::Bilinear, InterpMode::Bicubic];

    fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor4D {
        Tensor4D::from_plane(h, w, (0..h * w).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    #[test]
    fn region_examples() {
        assert_eq!(classify_region(0, 0, (8, 8), 1), RegionClass::Corner);
        assert_eq!(classify_region(0, 4, (8, 8), 1), RegionClass::Edge(EdgeSide::Top));
        assert_eq!(classify_region(7, 4, (8, 8), 1), RegionClass::Edge(EdgeSide::Bottom));
        assert_eq!(classify_region(3, 0, (8, 8), 1), RegionClass::Edge(EdgeSide::Left));
        assert_eq!(classify_region(3, 7, (8, 8), 1), RegionClass::Edge(EdgeSide::Right));
        assert_eq!(classify_region(3, 3, (8, 8), 1), RegionClass::Interior);
    }

    #[test]
    fn region_counts_on_8x8() {
        let mut counts = [0usize; 3];
        for h in 0..8 {
            for w in 0..8 {
                match classify_region(h, w, (8, 8), 1) {
                    RegionClass::Corner => counts[0] += 1,
                    RegionClass::Edge(_) => counts[1] += 1,
                    RegionClass::Interior => counts[2] += 1,
                }
            }
        }
        assert_eq!(counts, [4, 24, 36]);
    }

    #[test]
    fn angle_zero_identity_all_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (h, w) in [(1, 1), (5, 5), (6, 9)] {
            let p = random_plane(&mut rng, h, w);
            for mode in MODES {
                assert_eq!(rotate(&p, &RotationSpec::new(0.0, mode), Parallelism::new(2)), p);
            }
        }
    }

    #[test]
    fn quarter_turn_is_transpose_and_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 7;
        let p = random_plane(&mut rng, n, n);
        let out = rotate(&p, &RotationSpec::new(90.0, InterpMode::Nearest), Parallelism::new(3));
        for y in 0..n {
            for x in 0..n {
                assert_eq!(out.at(0, 0, y, x), p.at(0, 0, n - 1 - x, y));
            }
        }
        let mut q = p.clone();
        for _ in 0..4 {
            q = rotate(&q, &RotationSpec::new(90.0, InterpMode::Nearest), Parallelism::new(2));
        }
        assert_eq!(q, p);
    }

    #[test]
    fn constant_image_at_45_degrees() {
        let p = Tensor4D::filled(Dims::new(1, 1, 21, 21).unwrap(), 0.75);
        let spec = RotationSpec::new(45.0, InterpMode::Bilinear).with_fill(-1.0);
        let out = rotate(&p, &spec, Parallelism::new(2));
        let map = InverseMap::new(&spec, 21, 21);
        let mut filled = 0;
        for y in 0..21 {
            for x in 0..21 {
                let (sy, sx) = map.source(y, x);
                // Outside means no bilinear tap with positive weight lands inside.
                let outside = sy <= -1.0 || sy >= 21.0 || sx <= -1.0 || sx >= 21.0;
                let v = out.at(0, 0, y, x);
                if outside {
                    assert_eq!(v, -1.0, "({y},{x})");
                    filled += 1;
                } else {
                    assert_eq!(v, 0.75, "({y},{x})");
                }
            }
        }
        assert!(filled > 0);
    }

    #[test]
    fn parallel_matches_oracle_without_oob() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (h, w) in [(1, 1), (5, 5), (17, 12)] {
            let p = random_plane(&mut rng, h, w);
            for angle in [0.0, 7.3, -7.3, 45.0, 90.0, 180.0, 33.3] {
                for mode in MODES {
                    let spec = RotationSpec::new(angle, mode);
                    let (out, oob) = rotate_traced(&p, &spec, Parallelism::new(4), true);
                    assert_eq!(oob, 0);
                    assert_eq!(out, rotate_oracle(&p, &spec));
                }
            }
        }
    }

    #[test]
    fn bilinear_and_nearest_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let p = random_plane(&mut rng, 15, 11);
            let (lo, hi) = p.min_max();
            let angle = rng.gen_range(-180.0..180.0);
            for mode in [InterpMode::Nearest, InterpMode::Bilinear] {
                let out = rotate(&p, &RotationSpec::new(angle, mode).with_fill(9.0), Parallelism::serial());
                assert!(out.data().iter().all(|&v| v == 9.0 || (v >= lo && v <= hi)));
            }
        }
    }

    #[test]
    fn guarded_read_counts_oob() {
        let data = [1.0f32; 4];
        let oob = AtomicU64::new(0);
        let g = GuardedPlane { data: &data, h: 2, w: 2, oob: &oob, abort_on_oob: false };
        assert_eq!(g.read(1, 1), 1.0);
        assert_eq!(g.read(-1, 0), 0.0);
        assert_eq!(g.read(0, 2), 0.0);
        assert_eq!(oob.load(Ordering::Relaxed), 2);
    }

    #[test]
    #[should_panic(expected = "out-of-bounds")]
    fn guarded_read_aborts_when_asked() {
        let data = [1.0f32; 4];
        let oob = AtomicU64::new(0);
        let g = GuardedPlane { data: &data, h: 2, w: 2, oob: &oob, abort_on_oob: true };
        g.read(2, 0);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("Bicubic".parse::<InterpMode>().unwrap(), InterpMode::Bicubic);
        assert!("lanczos".parse::<InterpMode>().is_err());
    }
}
