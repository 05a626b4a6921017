//! File formats.
//!
//! A volume file is a 16-byte magic `ORIENTRDSVOLUME1`, then four
//! little-endian `u32`: width, height, orientations and a dtype tag (`1`
//! for `f32`), then `W·H·K` little-endian `f32` values with x fastest, then
//! y, then θ.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};
use orient_rds::{Image, Mask, Volume};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 16] = b"ORIENTRDSVOLUME1";
pub const DTYPE_F32: u32 = 1;
const HEADER_LEN: usize = 32;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(format!("{}: {e}", path.display()))
}

pub fn encode_volume(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * v.len());
    out.extend_from_slice(MAGIC);
    for n in [v.width(), v.height(), v.orientations()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&DTYPE_F32.to_le_bytes());
    for &x in v.data() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume, String> {
    if bytes.len() < HEADER_LEN || &bytes[..16] != MAGIC {
        return Err("not a volume file".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[16 + 4 * i..20 + 4 * i].try_into().unwrap());
    let (w, h, k, dtype) = (
        word(0) as usize,
        word(1) as usize,
        word(2) as usize,
        word(3),
    );
    if dtype != DTYPE_F32 {
        return Err(format!("unsupported dtype tag {dtype}"));
    }
    let n = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(k))
        .filter(|&n| n > 0)
        .ok_or("empty or oversized grid")?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * n {
        return Err(format!(
            "expected {} data bytes, found {}",
            4 * n,
            body.len()
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Volume::new(w, h, k, data).map_err(|e| e.to_string())
}

pub fn is_volume_file(path: &Path) -> CliResult<bool> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(bytes.len() >= 16 && &bytes[..16] == MAGIC)
}

pub fn read_volume(path: &Path) -> CliResult<Volume> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_volume(&bytes).map_err(|e| io_err(path, e))
}

pub fn write_volume(path: &Path, v: &Volume) -> CliResult<()> {
    fs::write(path, encode_volume(v)).map_err(|e| io_err(path, e))
}

/// Reads a greyscale image scaled to `[0, 1]` by its bit depth; colour
/// images are converted to luma first.
pub fn read_image(path: &Path) -> CliResult<Image> {
    let img = image::open(path).map_err(|e| io_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        _ => img
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
    };
    Image::new(w, h, data).map_err(|e| io_err(path, e))
}

/// `[0, 1] → [0, 255]` with rounding half to even; values outside are
/// clipped.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Writes an 8-bit greyscale PNG.
pub fn write_png(path: &Path, img: &Image) -> CliResult<()> {
    if let Some(bad) = img.data().iter().find(|v| !v.is_finite()) {
        return Err(CliError::Instability(format!(
            "refusing to write non-finite value {bad}"
        )));
    }
    let raw = img.data().iter().map(|&v| quantize(v)).collect();
    let buf = GrayImage::from_raw(img.width() as u32, img.height() as u32, raw)
        .expect("buffer matches image size");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| io_err(path, e))
}

pub fn read_mask(path: &Path) -> CliResult<Mask> {
    let img = read_image(path)?;
    Ok(Mask::from_image_fn(img.width(), img.height(), |x, y| {
        img.get(x, y) >= 0.5
    }))
}

pub fn mask_image(m: &Mask) -> Image {
    Image::from_fn(m.width(), m.height(), |x, y| {
        if m.get(x, y, 0) {
            1.0
        } else {
            0.0
        }
    })
}

pub fn write_csv(path: &Path, rows: &[(f64, f64)]) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut text = String::from("t,psnr_db\n");
    for (t, p) in rows {
        text.push_str(&format!("{t},{p}\n"));
    }
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_bytes_are_laid_out_as_documented() {
        let v = Volume::from_fn(3, 2, 4, |x, y, k| (x + 10 * y + 100 * k) as f64);
        let bytes = encode_volume(&v);
        assert_eq!(bytes.len(), 32 + 4 * 24);
        assert_eq!(&bytes[..16], b"ORIENTRDSVOLUME1");
        assert_eq!(
            &bytes[16..32],
            &[3, 0, 0, 0, 2, 0, 0, 0, 4, 0, 0, 0, 1, 0, 0, 0]
        );
        // x fastest: the second value is (1, 0, 0), the fourth (0, 1, 0)
        assert_eq!(&bytes[36..40], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[44..48], &10.0f32.to_le_bytes());
        assert_eq!(decode_volume(&bytes).unwrap(), v);
    }

    #[test]
    fn corrupt_volumes_are_rejected() {
        let v = Volume::filled(2, 2, 4, 0.5);
        let bytes = encode_volume(&v);
        assert!(decode_volume(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_volume(&bytes[..10]).is_err());
        let mut tag = bytes.clone();
        tag[28] = 2;
        assert!(decode_volume(&tag).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(decode_volume(&magic).is_err());
    }

    #[test]
    fn quantization_rounds_half_to_even() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(2.0), 255);
        assert_eq!(quantize(-1.0), 0);
        assert_eq!(quantize(0.5), 128);
        // 0.5·255 = 127.5 → 128, 2.5/255·255 → 2
        assert_eq!(quantize(2.5 / 255.0), 2);
        assert_eq!(quantize(3.5 / 255.0), 4);
        for v in 0..=255u8 {
            assert_eq!(quantize(v as f64 / 255.0), v);
        }
    }
}
