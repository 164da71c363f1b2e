//! Image codecs (8-bit PNG, binary PPM/PGM) and the raw tensor dump format.
//!
//! Tensor dump layout, all little-endian: four `u32` extents `B C H W`
//! followed by `B·C·H·W` `f32` values in row-major order.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dims, ImageU8, Tensor4D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    /// Binary netpbm: P6 for RGB, P5 for grayscale.
    Pnm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "png" => Ok(ImageFormat::Png),
            "ppm" | "pgm" | "pnm" => Ok(ImageFormat::Pnm),
            _ => Err(Error::Format(format!("{}: expected .png or .ppm", path.display()))),
        }
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageU8> {
    if bytes.starts_with(b"P6") || bytes.starts_with(b"P5") {
        return decode_pnm(bytes);
    }
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(g) => ImageU8::new(h, w, 1, g.into_raw()),
        other => ImageU8::new(h, w, 3, other.to_rgb8().into_raw()),
    }
}

pub fn encode_image(img: &ImageU8, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Pnm => Ok(encode_pnm(img)),
        ImageFormat::Png => {
            let color = if img.channels() == 1 {
                image::ColorType::L8
            } else {
                image::ColorType::Rgb8
            };
            let mut out = Cursor::new(Vec::new());
            image::write_buffer_with_format(
                &mut out,
                img.data(),
                img.width() as u32,
                img.height() as u32,
                color,
                image::ImageOutputFormat::Png,
            )?;
            Ok(out.into_inner())
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_image(path: impl AsRef<Path>, img: &ImageU8) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, ImageFormat::from_path(path)?)?;
    write_atomic(path, &bytes)
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`,
/// so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = std::fs::write(&tmp, bytes).and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn encode_pnm(img: &ImageU8) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

fn decode_pnm(bytes: &[u8]) -> Result<ImageU8> {
    let channels = if bytes.starts_with(b"P6") { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed netpbm header".into()))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("netpbm maxval {maxval} unsupported (need 255)")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed netpbm header".into()));
    }
    pos += 1;
    let need = w * h * channels;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format(format!("netpbm data truncated: need {need} bytes")))?;
    ImageU8::new(h, w, channels, data.to_vec())
}

pub fn write_tensor<W: Write>(mut out: W, t: &Tensor4D) -> std::io::Result<()> {
    let d = t.dims();
    for v in [d.b, d.c, d.h, d.w] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for v in t.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn encode_tensor(t: &Tensor4D) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * t.data().len());
    write_tensor(&mut out, t).expect("writing to a Vec cannot fail");
    out
}

pub fn read_tensor<R: Read>(mut input: R) -> Result<Tensor4D> {
    let mut word = [0u8; 4];
    let mut ext = [0usize; 4];
    for e in &mut ext {
        input
            .read_exact(&mut word)
            .map_err(|_| Error::Format("tensor header truncated".into()))?;
        *e = u32::from_le_bytes(word) as usize;
    }
    let dims = Dims::new(ext[0], ext[1], ext[2], ext[3])?;
    let mut raw = vec![0u8; dims.len() * 4];
    input
        .read_exact(&mut raw)
        .map_err(|_| Error::Format(format!("tensor data truncated: need {} values", dims.len())))?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor4D::new(dims, data)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor4D> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_tensor(&bytes[..])
}

/// Min-max normalizes batch 0's channel mean into a grayscale image.
pub fn heat_image(t: &Tensor4D) -> ImageU8 {
    let m = t.channel_mean();
    let d = m.dims();
    let plane = m.plane(0, 0);
    let (lo, hi) = plane
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (hi - lo) as f64;
    let data = plane
        .iter()
        .map(|&v| {
            if span > 0.0 {
                crate::tensor::quantize((v - lo) as f64 / span * 255.0)
            } else {
                0
            }
        })
        .collect();
    ImageU8::new(d.h, d.w, 1, data).expect("non-empty plane")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pnm_round_trip_with_comment() {
        let img = ImageU8::new(2, 3, 3, (0..18).collect()).unwrap();
        let mut bytes = encode_image(&img, ImageFormat::Pnm).unwrap();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(decode_image(&bytes).unwrap(), img);
        bytes.splice(3..3, b"# made by hand\n".iter().cloned());
        assert_eq!(decode_image(&bytes).unwrap(), img);
    }

    #[test]
    fn pnm_rejects_truncated() {
        assert!(decode_image(b"P6\n4 4\n255\n\x00\x01").is_err());
        assert!(decode_image(b"P5\n4 x\n255\n").is_err());
        assert!(decode_image(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn png_round_trip_gray_and_rgb() {
        for ch in [1, 3] {
            let img = ImageU8::new(5, 4, ch, (0..20 * ch).map(|v| (v * 7 % 256) as u8).collect()).unwrap();
            let bytes = encode_image(&img, ImageFormat::Png).unwrap();
            assert_eq!(decode_image(&bytes).unwrap(), img);
        }
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(ImageFormat::from_path(Path::new("a/b.PNG")).unwrap(), ImageFormat::Png);
        assert_eq!(ImageFormat::from_path(Path::new("x.ppm")).unwrap(), ImageFormat::Pnm);
        assert!(ImageFormat::from_path(Path::new("x.jpg")).is_err());
    }

    #[test]
    fn tensor_dump_layout() {
        let t = Tensor4D::new(Dims::new(1, 1, 1, 2).unwrap(), vec![1.0, -2.5]).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(&bytes[..16], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert!(read_tensor(&bytes[..18]).is_err());
    }

    proptest! {
        #[test]
        fn tensor_dump_round_trip(b in 1usize..3, c in 1usize..4, h in 1usize..6, w in 1usize..6, seed in any::<u32>()) {
            let dims = Dims::new(b, c, h, w).unwrap();
            let t = Tensor4D::from_fn(dims, |b, c, h, w| (seed as f32) * 1e-3 + (b * 1000 + c * 100 + h * 10 + w) as f32);
            prop_assert_eq!(read_tensor(&encode_tensor(&t)[..]).unwrap(), t);
        }
    }
}
