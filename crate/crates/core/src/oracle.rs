//! Single-threaded nested-loop references for the parallel kernels.
//!
//! These follow the same arithmetic, in the same order, as the kernels they
//! check, so outputs must match bit-for-bit.

use crate::blur::{gaussian_kernel, BoxBlurSpec, GaussianSpec};
use crate::drs::TransparencyMap;
use crate::tensor::{ImageU8, Tensor4D};

pub use crate::rotate::rotate_oracle;

/// Guarded window mean with integer division, one channel at a time.
pub fn box_blur_oracle(input: &ImageU8, spec: BoxBlurSpec) -> ImageU8 {
    let (h, w, ch) = (input.height() as isize, input.width() as isize, input.channels());
    let blur = spec.radius() as isize;
    let src = input.data();
    let mut out = vec![0u8; src.len()];
    for k in 0..ch {
        for row in 0..h {
            for col in 0..w {
                let mut pix_val: u32 = 0;
                let mut pixels: u32 = 0;
                for blur_row in -blur..blur + 1 {
                    for blur_col in -blur..blur + 1 {
                        let cur_row = row + blur_row;
                        let cur_col = col + blur_col;
                        if cur_row >= 0 && cur_row < h && cur_col >= 0 && cur_col < w {
                            pix_val += src[(cur_row * w + cur_col) as usize * ch + k] as u32;
                            pixels += 1;
                        }
                    }
                }
                out[(row * w + col) as usize * ch + k] = (pix_val / pixels) as u8;
            }
        }
    }
    ImageU8::new(h as usize, w as usize, ch, out).expect("shape preserved")
}

pub fn gaussian_oracle(input: &Tensor4D, spec: GaussianSpec) -> Tensor4D {
    let kernel = gaussian_kernel(spec);
    let r = kernel.radius() as isize;
    let d = input.dims();
    let (hh, ww) = (d.h as isize, d.w as isize);
    let mut out = Tensor4D::zeros(d);
    for b in 0..d.b {
        for c in 0..d.c {
            let plane = input.plane(b, c);
            for h in 0..hh {
                for w in 0..ww {
                    let (mut num, mut den) = (0.0f64, 0.0f64);
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (y, x) = (h + dy, w + dx);
                            if y >= 0 && y < hh && x >= 0 && x < ww {
                                let wt = kernel.at(dy, dx);
                                num += wt * plane[(y * ww + x) as usize] as f64;
                                den += wt;
                            }
                        }
                    }
                    let i = ((b * d.c + c) * d.h + h as usize) * d.w + w as usize;
                    out.data_mut()[i] = (num / den) as f32;
                }
            }
        }
    }
    out
}

pub fn fuse_oracle(p: &TransparencyMap, fuzzy: &Tensor4D, original: &Tensor4D) -> Tensor4D {
    let d = fuzzy.dims();
    let pg = p.grid();
    let mut out = Tensor4D::zeros(d);
    let mut i = 0;
    for b in 0..d.b {
        for c in 0..d.c {
            for h in 0..d.h {
                for w in 0..d.w {
                    let pv = pg.at(b, 0, h, w) as f64;
                    out.data_mut()[i] =
                        (pv * fuzzy.at(b, c, h, w) as f64 + (1.0 - pv) * original.at(b, c, h, w) as f64) as f32;
                    i += 1;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::{box_blur_boundary_safe, gaussian_filter};
    use crate::drs::fuse;
    use crate::tensor::Dims;
    use crate::Parallelism;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracles_agree_with_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = ImageU8::new(11, 7, 3, (0..11 * 7 * 3).map(|_| rng.gen()).collect()).unwrap();
        let spec = BoxBlurSpec::new(2).unwrap();
        assert_eq!(box_blur_oracle(&img, spec), box_blur_boundary_safe(&img, spec, Parallelism::new(3)));

        let d = Dims::new(2, 2, 9, 6).unwrap();
        let t = Tensor4D::from_fn(d, |_, _, _, _| rng.gen());
        let g = GaussianSpec::with_sigma(1.2).unwrap();
        assert_eq!(gaussian_oracle(&t, g), gaussian_filter(&t, g, Parallelism::new(3)));

        let p = TransparencyMap::new(Tensor4D::from_fn(Dims { c: 1, ..d }, |_, _, _, _| rng.gen())).unwrap();
        let i = Tensor4D::from_fn(d, |_, _, _, _| rng.gen());
        assert_eq!(fuse_oracle(&p, &t, &i), fuse(&p, &t, &i, Parallelism::new(3)).unwrap());
    }
}
