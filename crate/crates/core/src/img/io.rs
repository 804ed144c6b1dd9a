//! Image file I/O: 8/16-bit grayscale PNG and the `PAMIMG1` raw float format.
//!
//! `PAMIMG1` layout: 7-byte magic `PAMIMG1`, two little-endian u32 dims
//! (height, width), then height×width little-endian f32 intensities in
//! row-major order.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};

use super::Image;
use crate::{Error, Result};

pub const PAMIMG_MAGIC: &[u8; 7] = b"PAMIMG1";

// Guards against absurd dims in corrupt headers before allocating.
const MAX_DIM: u32 = 1 << 20;

/// Loads a grayscale image. Files starting with the `PAMIMG1` magic are
/// parsed as raw floats; anything else goes through the PNG decoder with
/// 8-bit samples divided by 255 and 16-bit by 65535.
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(PAMIMG_MAGIC) {
        return decode_raw(&bytes);
    }
    let decoded = image::load_from_memory(&bytes)?;
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let data = buf.into_raw().iter().map(|&v| v as f32 / 255.0).collect();
            Image::new(h, w, data)
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let data = buf.into_raw().iter().map(|&v| v as f32 / 65535.0).collect();
            Image::new(h, w, data)
        }
        other => Err(Error::invalid(format!(
            "expected a single-channel image, got {:?} in {}",
            other.color(),
            path.display()
        ))),
    }
}

/// Saves an image. `.pamimg` paths use the raw float format; everything
/// else is written as 16-bit grayscale PNG with intensities clipped to
/// `[0, 1]` before quantization.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "pamimg") {
        return fs::write(path, encode_raw(img)).map_err(Error::Io);
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(
        img.width() as u32,
        img.height() as u32,
        |x, y| {
            let v = img.at(y as usize, x as usize).clamp(0.0, 1.0);
            Luma([(v * 65535.0).round() as u16])
        },
    );
    buf.save(path)?;
    Ok(())
}

pub(crate) fn encode_raw(img: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(15 + img.data().len() * 4);
    out.extend_from_slice(PAMIMG_MAGIC);
    out.extend_from_slice(&(img.height() as u32).to_le_bytes());
    out.extend_from_slice(&(img.width() as u32).to_le_bytes());
    for &v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn decode_raw(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 15 || &bytes[..7] != PAMIMG_MAGIC {
        return Err(Error::format("missing PAMIMG1 magic"));
    }
    let h = u32::from_le_bytes(bytes[7..11].try_into().unwrap());
    let w = u32::from_le_bytes(bytes[11..15].try_into().unwrap());
    if h == 0 || w == 0 || h > MAX_DIM || w > MAX_DIM {
        return Err(Error::format(format!("implausible raw image dims {h}x{w}")));
    }
    let count = h as usize * w as usize;
    let payload = &bytes[15..];
    if payload.len() != count * 4 {
        return Err(Error::format(format!(
            "raw payload holds {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(h as usize, w as usize, data)
}
