//! Blur synthesis: Gaussian scale-space filtering, the boundary-safe box
//! mean, and directional motion blur.
//!
//! Float kernels accumulate in `f64` and divide by the weight of the taps that
//! land inside the image, so border pixels average fewer samples rather than
//! reading padding. The 8-bit box and motion paths use integer sums and floor
//! division.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{for_each_row, Parallelism};
use crate::tensor::{par_map_pixels, ImageU8, Tensor4D};

/// Gaussian scale parameter and truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    sigma: f64,
    radius: usize,
}

impl GaussianSpec {
    pub fn new(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParam(format!("sigma must be > 0, got {sigma}")));
        }
        if radius == 0 {
            return Err(Error::InvalidParam("gaussian radius must be >= 1".into()));
        }
        Ok(Self { sigma, radius })
    }

    /// Radius `ceil(3 sigma)`, at least 1.
    pub fn with_sigma(sigma: f64) -> Result<Self> {
        let radius = if sigma.is_finite() && sigma > 0.0 {
            ((3.0 * sigma).ceil() as usize).max(1)
        } else {
            1
        };
        Self::new(sigma, radius)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }
}

/// Half-width of the boundary-safe mean window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxBlurSpec {
    radius: usize,
}

impl BoxBlurSpec {
    pub fn new(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidParam("box radius must be >= 1".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }
}

/// Linear motion blur: `length` taps along `angle` degrees.
///
/// Angle 0 runs along +column, angle 90 along +row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBlurSpec {
    length: usize,
    angle: f64,
}

impl MotionBlurSpec {
    pub fn new(length: usize, angle: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidParam("motion blur length must be >= 1".into()));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidParam(format!("motion blur angle must be finite, got {angle}")));
        }
        Ok(Self {
            length,
            angle: angle.rem_euclid(360.0),
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Distinct `(dy, dx)` offsets with their multiplicities, in first-seen order.
    pub fn taps(&self) -> Vec<(isize, isize, u32)> {
        let (sin, cos) = exact_sin_cos(self.angle);
        let half = ((self.length - 1) / 2) as isize;
        let mut taps: Vec<(isize, isize, u32)> = Vec::with_capacity(self.length);
        for i in 0..self.length as isize {
            let t = (i - half) as f64;
            let dy = (t * sin).round() as isize;
            let dx = (t * cos).round() as isize;
            match taps.iter_mut().find(|(y, x, _)| *y == dy && *x == dx) {
                Some(tap) => tap.2 += 1,
                None => taps.push((dy, dx, 1)),
            }
        }
        taps
    }
}

/// `sin`/`cos` of an angle in degrees, exact at multiples of 90.
pub(crate) fn exact_sin_cos(degrees: f64) -> (f64, f64) {
    let a = degrees.rem_euclid(360.0);
    if a == 0.0 {
        (0.0, 1.0)
    } else if a == 90.0 {
        (1.0, 0.0)
    } else if a == 180.0 {
        (0.0, -1.0)
    } else if a == 270.0 {
        (-1.0, 0.0)
    } else {
        a.to_radians().sin_cos()
    }
}

/// Unnormalized isotropic Gaussian density at integer offset `(x, y)`.
pub fn gaussian_density(x: f64, y: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (-(x * x + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Normalized `(2r+1)²` Gaussian weight grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dy, dx)` from the center.
    pub fn at(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        let side = self.side() as isize;
        self.weights[((dy + r) * side + dx + r) as usize]
    }

    fn taps(&self) -> Vec<(isize, isize, f64)> {
        let r = self.radius as isize;
        (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx)))
            .map(|(dy, dx)| (dy, dx, self.at(dy, dx)))
            .collect()
    }
}

pub fn gaussian_kernel(spec: GaussianSpec) -> GaussianKernel {
    let r = spec.radius as isize;
    let raw: Vec<f64> = (-r..=r)
        .flat_map(|y| (-r..=r).map(move |x| (y, x)))
        .map(|(y, x)| gaussian_density(x as f64, y as f64, spec.sigma))
        .collect();
    let total: f64 = raw.iter().sum();
    GaussianKernel {
        radius: spec.radius,
        weights: raw.into_iter().map(|v| v / total).collect(),
    }
}

/// Weighted neighborhood average over in-bounds taps, per plane.
fn convolve_renormalized(input: &Tensor4D, taps: &[(isize, isize, f64)], par: Parallelism) -> Tensor4D {
    let d = input.dims();
    let (hh, ww) = (d.h as isize, d.w as isize);
    par_map_pixels(input, par, |b, c, h, w, x| {
        let plane = x.plane(b, c);
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for &(dy, dx, wt) in taps {
            let r = h as isize + dy;
            let col = w as isize + dx;
            if r >= 0 && r < hh && col >= 0 && col < ww {
                num += wt * plane[(r * ww + col) as usize] as f64;
                den += wt;
            }
        }
        (num / den) as f32
    })
}

/// Gaussian blur of every plane of `input`.
pub fn gaussian_filter(input: &Tensor4D, spec: GaussianSpec, par: Parallelism) -> Tensor4D {
    convolve_renormalized(input, &gaussian_kernel(spec).taps(), par)
}

/// Mean over the in-bounds part of the `(2r+1)²` window, floor-divided.
///
/// Channels are filtered independently.
pub fn box_blur_boundary_safe(input: &ImageU8, spec: BoxBlurSpec, par: Parallelism) -> ImageU8 {
    let (h, w, ch) = (input.height(), input.width(), input.channels());
    let r = spec.radius as isize;
    let src = input.data();
    let mut out = vec![0u8; src.len()];
    for_each_row(&mut out, w * ch, par, |row, line| {
        let row = row as isize;
        let r0 = (row - r).max(0) as usize;
        let r1 = ((row + r) as usize).min(h - 1);
        for col in 0..w {
            let c0 = (col as isize - r).max(0) as usize;
            let c1 = (col + spec.radius).min(w - 1);
            let count = ((r1 - r0 + 1) * (c1 - c0 + 1)) as u32;
            for k in 0..ch {
                let mut sum = 0u32;
                for rr in r0..=r1 {
                    let base = rr * w;
                    for cc in c0..=c1 {
                        sum += src[(base + cc) * ch + k] as u32;
                    }
                }
                line[col * ch + k] = (sum / count) as u8;
            }
        }
    });
    ImageU8::new(h, w, ch, out).expect("shape preserved")
}

/// Float counterpart of [`box_blur_boundary_safe`] (no flooring).
pub fn box_mean_f32(input: &Tensor4D, spec: BoxBlurSpec, par: Parallelism) -> Tensor4D {
    let r = spec.radius as isize;
    let taps: Vec<(isize, isize, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dy, dx, 1.0)))
        .collect();
    convolve_renormalized(input, &taps, par)
}

/// Motion blur of every plane of a float tensor.
pub fn motion_blur(input: &Tensor4D, spec: MotionBlurSpec, par: Parallelism) -> Tensor4D {
    let taps: Vec<(isize, isize, f64)> = spec
        .taps()
        .into_iter()
        .map(|(dy, dx, m)| (dy, dx, m as f64))
        .collect();
    convolve_renormalized(input, &taps, par)
}

/// Motion blur on 8-bit samples with integer floor averaging.
pub fn motion_blur_u8(input: &ImageU8, spec: MotionBlurSpec, par: Parallelism) -> ImageU8 {
    let (h, w, ch) = (input.height(), input.width(), input.channels());
    let taps = spec.taps();
    let src = input.data();
    let mut out = vec![0u8; src.len()];
    let (hh, ww) = (h as isize, w as isize);
    for_each_row(&mut out, w * ch, par, |row, line| {
        for col in 0..w {
            for k in 0..ch {
                let (mut sum, mut count) = (0u32, 0u32);
                for &(dy, dx, m) in &taps {
                    let rr = row as isize + dy;
                    let cc = col as isize + dx;
                    if rr >= 0 && rr < hh && cc >= 0 && cc < ww {
                        sum += m * src[((rr * ww + cc) as usize) * ch + k] as u32;
                        count += m;
                    }
                }
                line[col * ch + k] = (sum / count) as u8;
            }
        }
    });
    ImageU8::new(h, w, ch, out).expect("shape preserved")
}
