//! Dense B×C×H×W tensors, 8-bit images and the parallel map primitive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{for_each_row, Parallelism};

/// Extents of a [`Tensor4D`]; all four are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn new(b: usize, c: usize, h: usize, w: usize) -> Result<Self> {
        if b == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidDims(format!(
                "all extents must be >= 1, got {b}x{c}x{h}x{w}"
            )));
        }
        Ok(Self { b, c, h, w })
    }

    pub fn len(&self) -> usize {
        self.b * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// Row-major offset of `(b, c, h, w)`, W fastest.
    pub fn linear_index(&self, b: usize, c: usize, h: usize, w: usize) -> Result<usize> {
        for (axis, index, len) in [
            ("B", b, self.b),
            ("C", c, self.c),
            ("H", h, self.h),
            ("W", w, self.w),
        ] {
            if index >= len {
                return Err(Error::OutOfBounds { axis, index, len });
            }
        }
        Ok(self.offset(b, c, h, w))
    }

    #[inline]
    pub(crate) fn offset(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        ((b * self.c + c) * self.h + h) * self.w + w
    }

    /// Inverse of [`Dims::linear_index`].
    pub fn unravel(&self, offset: usize) -> (usize, usize, usize, usize) {
        let w = offset % self.w;
        let rest = offset / self.w;
        let h = rest % self.h;
        let rest = rest / self.h;
        (rest / self.c, rest % self.c, h, w)
    }
}

/// Free-function form of [`Dims::linear_index`].
pub fn linear_index(b: usize, c: usize, h: usize, w: usize, dims: Dims) -> Result<usize> {
    dims.linear_index(b, c, h, w)
}

/// Dense 32-bit float tensor in B×C×H×W order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4D {
    dims: Dims,
    data: Vec<f32>,
}

impl Tensor4D {
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidDims(format!(
                "data length {} does not match {}x{}x{}x{}",
                data.len(),
                dims.b,
                dims.c,
                dims.h,
                dims.w
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn filled(dims: Dims, value: f32) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::filled(dims, 0.0)
    }

    /// Builds a tensor by evaluating `f` at every index, serially.
    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Self {
        let data = (0..dims.len())
            .map(|i| {
                let (b, c, h, w) = dims.unravel(i);
                f(b, c, h, w)
            })
            .collect();
        Self { dims, data }
    }

    /// Single plane wrapped as a 1×1×H×W tensor.
    pub fn from_plane(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(Dims::new(1, 1, h, w)?, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.dims.offset(b, c, h, w)]
    }

    pub fn get(&self, b: usize, c: usize, h: usize, w: usize) -> Result<f32> {
        Ok(self.data[self.dims.linear_index(b, c, h, w)?])
    }

    pub fn plane(&self, b: usize, c: usize) -> &[f32] {
        let n = self.dims.plane_len();
        let start = (b * self.dims.c + c) * n;
        &self.data[start..start + n]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Swaps the H and W axes.
    pub fn transpose_hw(&self) -> Self {
        let d = self.dims;
        let td = Dims { h: d.w, w: d.h, ..d };
        Tensor4D::from_fn(td, |b, c, h, w| self.at(b, c, w, h))
    }

    /// Mean over channels, as a B×1×H×W tensor.
    pub fn channel_mean(&self) -> Self {
        let d = self.dims;
        let out = Dims { c: 1, ..d };
        Tensor4D::from_fn(out, |b, _, h, w| {
            let s: f64 = (0..d.c).map(|c| self.at(b, c, h, w) as f64).sum();
            (s / d.c as f64) as f32
        })
    }
}

/// Evaluates `f(b, c, h, w, input)` for every output element.
///
/// Output rows are distributed across `par` workers; each element is written
/// exactly once, so the result does not depend on the worker count.
pub fn par_map_pixels<F>(input: &Tensor4D, par: Parallelism, f: F) -> Tensor4D
where
    F: Fn(usize, usize, usize, usize, &Tensor4D) -> f32 + Sync + Send,
{
    par_from_fn(input.dims, par, |b, c, h, w| f(b, c, h, w, input))
}

/// Parallel counterpart of [`Tensor4D::from_fn`] for pure `f`.
pub fn par_from_fn<F>(dims: Dims, par: Parallelism, f: F) -> Tensor4D
where
    F: Fn(usize, usize, usize, usize) -> f32 + Sync + Send,
{
    let mut data = vec![0.0f32; dims.len()];
    for_each_row(&mut data, dims.w, par, |row, out| {
        let h = row % dims.h;
        let bc = row / dims.h;
        let (b, c) = (bc / dims.c, bc % dims.c);
        for (w, v) in out.iter_mut().enumerate() {
            *v = f(b, c, h, w);
        }
    });
    Tensor4D { dims, data }
}

/// Mean of each (b, c) plane, returned as a B×C row-major grid.
pub fn global_avg_pool(input: &Tensor4D) -> Vec<f32> {
    let d = input.dims;
    let n = d.plane_len() as f64;
    (0..d.b)
        .flat_map(|b| (0..d.c).map(move |c| (b, c)))
        .map(|(b, c)| {
            let s: f64 = input.plane(b, c).iter().map(|&v| v as f64).sum();
            (s / n) as f32
        })
        .collect()
}

/// 8-bit image with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    h: usize,
    w: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(h: usize, w: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidDims(format!("image must be non-empty, got {h}x{w}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidDims(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != h * w * channels {
            return Err(Error::InvalidDims(format!(
                "data length {} does not match {h}x{w}x{channels}",
                data.len()
            )));
        }
        Ok(Self { h, w, channels, data })
    }

    pub fn filled(h: usize, w: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(h, w, channels, vec![value; h * w * channels])
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize, ch: usize) -> u8 {
        self.data[(r * self.w + c) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, ch: usize, v: u8) {
        self.data[(r * self.w + c) * self.channels + ch] = v;
    }

    /// 1×C×H×W float copy of the samples (no rescaling).
    pub fn to_tensor(&self) -> Tensor4D {
        let dims = Dims {
            b: 1,
            c: self.channels,
            h: self.h,
            w: self.w,
        };
        Tensor4D::from_fn(dims, |_, c, h, w| self.at(h, w, c) as f32)
    }

    /// Rounds and saturates batch 0 of `t` back to 8 bits.
    pub fn from_tensor(t: &Tensor4D) -> Result<Self> {
        let d = t.dims();
        let mut data = Vec::with_capacity(d.h * d.w * d.c);
        for h in 0..d.h {
            for w in 0..d.w {
                for c in 0..d.c {
                    data.push(quantize(t.at(0, c, h, w) as f64));
                }
            }
        }
        Self::new(d.h, d.w, d.c, data)
    }

    /// Channel-mean grayscale view.
    pub fn to_gray(&self) -> ImageU8 {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks(self.channels)
            .map(|px| (px.iter().map(|&v| v as u32).sum::<u32>() / self.channels as u32) as u8)
            .collect();
        ImageU8 {
            h: self.h,
            w: self.w,
            channels: 1,
            data,
        }
    }
}

/// Round-half-up and saturate to `[0, 255]`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d2345() -> Dims {
        Dims::new(2, 3, 4, 5).unwrap()
    }

    #[test]
    fn linear_index_examples() {
        let d = d2345();
        assert_eq!(d.linear_index(0, 0, 0, 0).unwrap(), 0);
        assert_eq!(d.linear_index(1, 2, 3, 4).unwrap(), 119);
        assert_eq!(d.linear_index(0, 1, 2, 3).unwrap(), 33);
    }

    #[test]
    fn linear_index_enumeration_oracle() {
        // Position in a nested-loop enumeration is the expected offset.
        let d = d2345();
        let mut k = 0;
        for b in 0..2 {
            for c in 0..3 {
                for h in 0..4 {
                    for w in 0..5 {
                        assert_eq!(d.linear_index(b, c, h, w).unwrap(), k);
                        assert_eq!(d.unravel(k), (b, c, h, w));
                        k += 1;
                    }
                }
            }
        }
        assert_eq!(k, d.len());
    }

    #[test]
    fn linear_index_names_axis() {
        let err = d2345().linear_index(0, 3, 0, 0).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { axis: "C", index: 3, len: 3 }));
        let err = d2345().linear_index(0, 0, 0, 5).unwrap_err();
        assert!(err.to_string().contains("axis W"));
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Dims::new(1, 0, 2, 2).is_err());
        assert!(Tensor4D::new(Dims::new(1, 1, 2, 2).unwrap(), vec![0.0; 3]).is_err());
        assert!(ImageU8::new(2, 2, 2, vec![0; 8]).is_err());
    }

    #[test]
    fn par_map_identity_and_constant() {
        let d = d2345();
        let t = Tensor4D::from_fn(d, |b, c, h, w| (b * 1000 + c * 100 + h * 10 + w) as f32);
        let id = par_map_pixels(&t, Parallelism::new(3), |b, c, h, w, x| x.at(b, c, h, w));
        assert_eq!(id, t);
        let z = par_map_pixels(&t, Parallelism::new(3), |_, _, _, _, _| 0.0);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn avg_pool_examples() {
        let t = Tensor4D::filled(Dims::new(2, 3, 4, 4).unwrap(), 1.25);
        assert!(global_avg_pool(&t).iter().all(|&v| v == 1.25));
        let t = Tensor4D::from_plane(2, 2, vec![0.0, 0.0, 4.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&t), vec![2.0]);
    }

    #[test]
    fn image_tensor_round_trip() {
        let img = ImageU8::new(2, 3, 3, (0..18).map(|v| v * 10).collect()).unwrap();
        let t = img.to_tensor();
        assert_eq!(t.at(0, 2, 1, 0), img.at(1, 0, 2) as f32);
        assert_eq!(ImageU8::from_tensor(&t).unwrap(), img);
    }

    proptest! {
        #[test]
        fn avg_pool_permutation_invariant(
            vals in proptest::collection::vec(0u32..1 << 24, 64),
            seed in any::<u64>()
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let vals: Vec<f32> = vals.iter().map(|&v| v as f32 / (1u32 << 24) as f32).collect();
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = global_avg_pool(&Tensor4D::from_plane(8, 8, vals).unwrap());
            let b = global_avg_pool(&Tensor4D::from_plane(8, 8, shuffled).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
