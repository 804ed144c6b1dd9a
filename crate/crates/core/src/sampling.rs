//! Raster-scan undersampling at integer strides, zero-fill restoration,
//! and the bicubic-interpolation baseline.
//!
//! A ratio `[Sx, Sy]` keeps every Sx-th column and Sy-th row, starting at
//! the first scan line (decimation phase fixed at (0, 0)). Throughout the
//! crate x refers to columns and y to rows.

use std::fmt;
use std::str::FromStr;

use crate::img::Image;
use crate::{Error, Result};

/// Scan-grid decimation strides along x (columns) and y (rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownsamplingRatio {
    pub sx: usize,
    pub sy: usize,
}

impl DownsamplingRatio {
    pub fn new(sx: usize, sy: usize) -> Result<Self> {
        if sx == 0 || sy == 0 {
            return Err(Error::invalid("downsampling strides must be at least 1"));
        }
        Ok(Self { sx, sy })
    }

    /// Retained grid size for a full image of `h`×`w` pixels.
    pub fn retained_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h.div_ceil(self.sy), w.div_ceil(self.sx))
    }

    /// Fraction of pixels kept for an `h`×`w` image.
    pub fn effective_fraction(&self, h: usize, w: usize) -> f64 {
        let (rh, rw) = self.retained_dims(h, w);
        (rh * rw) as f64 / (h * w) as f64
    }
}

impl fmt::Display for DownsamplingRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.sx, self.sy)
    }
}

impl FromStr for DownsamplingRatio {
    type Err = Error;

    /// Parses the CLI notation `"SxxSy"`, e.g. `"7x3"` for strides x=7, y=3.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::invalid(format!("ratio '{s}' is not of the form SXxSY")))?;
        let sx: usize = a
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad x stride in ratio '{s}'")))?;
        let sy: usize = b
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad y stride in ratio '{s}'")))?;
        DownsamplingRatio::new(sx, sy)
    }
}

/// The samples kept by a raster decimation, plus enough bookkeeping to
/// restore the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledImage {
    full_height: usize,
    full_width: usize,
    ratio: DownsamplingRatio,
    /// Kept samples, row-major over the retained grid.
    retained: Vec<f32>,
}

impl SampledImage {
    pub fn full_dims(&self) -> (usize, usize) {
        (self.full_height, self.full_width)
    }

    pub fn ratio(&self) -> DownsamplingRatio {
        self.ratio
    }

    pub fn retained_dims(&self) -> (usize, usize) {
        self.ratio.retained_dims(self.full_height, self.full_width)
    }

    pub fn retained(&self) -> &[f32] {
        &self.retained
    }
}

/// Keeps the pixels at rows ≡ 0 (mod sy) and columns ≡ 0 (mod sx).
pub fn downsample(img: &Image, ratio: DownsamplingRatio) -> SampledImage {
    let (rh, rw) = ratio.retained_dims(img.height(), img.width());
    let mut retained = Vec::with_capacity(rh * rw);
    for i in 0..rh {
        let row = img.row(i * ratio.sy);
        for j in 0..rw {
            retained.push(row[j * ratio.sx]);
        }
    }
    SampledImage {
        full_height: img.height(),
        full_width: img.width(),
        ratio,
        retained,
    }
}

/// Restores the full grid: kept samples return to their original
/// coordinates, every other pixel is exactly 0.
pub fn zero_fill(s: &SampledImage) -> Image {
    let mut out = Image::zeros(s.full_height, s.full_width);
    let (rh, rw) = s.retained_dims();
    for i in 0..rh {
        for j in 0..rw {
            out.set(i * s.ratio.sy, j * s.ratio.sx, s.retained[i * rw + j]);
        }
    }
    out
}

/// Binary mask of retained positions: 1 where a sample is kept, 0 elsewhere.
pub fn sample_mask(ratio: DownsamplingRatio, h: usize, w: usize) -> Image {
    Image::from_fn(h, w, |y, x| {
        if y % ratio.sy == 0 && x % ratio.sx == 0 {
            1.0
        } else {
            0.0
        }
    })
}

// Catmull-Rom kernel, the a = -0.5 member of the cubic family.
fn cubic_weights(t: f32) -> [f32; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Interpolates one axis of the retained grid back to full resolution.
///
/// Retained sample `j` sits at full-grid coordinate `j * step`, so the
/// source position for output `d` is `d / step` exactly; borders clamp
/// (replicate). Keeping samples on their true raster coordinates is what
/// lets the kernel reproduce polynomials across the retained points.
fn resample_axis(src: &[f32], src_len: usize, stride: usize, step: usize, dst: &mut [f32], dst_len: usize, out_stride: usize) {
    for d in 0..dst_len {
        let pos = d as f32 / step as f32;
        let base = pos.floor();
        let t = pos - base;
        let w = cubic_weights(t);
        let mut acc = 0.0f32;
        for (k, &wk) in w.iter().enumerate() {
            let idx = (base as isize + k as isize - 1).clamp(0, src_len as isize - 1) as usize;
            acc += wk * src[idx * stride];
        }
        dst[d * out_stride] = acc;
    }
}

/// Bicubic interpolation of the retained grid back to full size, with the
/// Catmull-Rom kernel and output clipped to `[0, 1]`.
///
/// A retained axis of length 1 degrades to replicate expansion through the
/// clamped taps.
pub fn bicubic_upsample(s: &SampledImage) -> Image {
    let (rh, rw) = s.retained_dims();
    let (fh, fw) = (s.full_height, s.full_width);

    // Rows first: rh × fw intermediate.
    let mut mid = vec![0.0f32; rh * fw];
    for i in 0..rh {
        resample_axis(
            &s.retained[i * rw..(i + 1) * rw],
            rw,
            1,
            s.ratio.sx,
            &mut mid[i * fw..(i + 1) * fw],
            fw,
            1,
        );
    }
    // Then columns.
    let mut out = Image::zeros(fh, fw);
    let data = out.data_mut();
    for x in 0..fw {
        resample_axis(&mid[x..], rh, fw, s.ratio.sy, &mut data[x..], fh, fw);
    }
    out.clipped()
}
