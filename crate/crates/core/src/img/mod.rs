//! Single-channel image type, preprocessing, and quality metrics.
//!
//! Images hold unit-interval intensities in row-major order. Preprocessing
//! mirrors the acquisition cleanup chain: directional median filters and a
//! noise-floor threshold, then percentile-clipped contrast rescaling.

mod io;
mod metrics;

pub use io::{load_image, save_image, PAMIMG_MAGIC};
pub use metrics::{compute_metrics, metrics_summary, MetricsReport};

use crate::{Error, Result};

/// A 2-D grid of intensities, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

/// Restores the pre-padding region of an image produced by [`pad_to_multiple`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRecord {
    pub height: usize,
    pub width: usize,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "data length {} does not match {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::new(height, width, vec![0.0; height * width]).expect("nonzero dims")
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, data).expect("nonzero dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
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
    pub fn at(&self, y: usize, x: usize) -> f32 {
        debug_assert!(y < self.height && x < self.width);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        debug_assert!(y < self.height && x < self.width);
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `height()`×`width()` window of `self` with top-left `(y0, x0)`.
    pub fn window(&self, y0: usize, x0: usize, height: usize, width: usize) -> Result<Image> {
        if y0 + height > self.height || x0 + width > self.width {
            return Err(Error::invalid(format!(
                "window {}x{} at ({}, {}) exceeds {}x{}",
                height, width, y0, x0, self.height, self.width
            )));
        }
        let mut out = Image::zeros(height, width);
        for y in 0..height {
            let src = &self.data[(y0 + y) * self.width + x0..(y0 + y) * self.width + x0 + width];
            out.data[y * width..(y + 1) * width].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Clamps every intensity into `[0, 1]`.
    pub fn clipped(mut self) -> Image {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }
}

impl CropRecord {
    /// Cuts the padded image back to the recorded original size.
    pub fn crop(&self, img: &Image) -> Result<Image> {
        img.window(0, 0, self.height, self.width)
    }
}

/// Direction of the 3-pixel median window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedianWindow {
    /// 3×1: three pixels along a column (vertical).
    Col3,
    /// 1×3: three pixels along a row (horizontal).
    Row3,
}

/// Clips intensities to the `[P_lo, P_hi]` percentile band, then rescales
/// affinely to `[0, 1]`. Constant images (or a degenerate band) map to zeros.
///
/// Percentiles interpolate linearly between order statistics at rank
/// `p/100 · (n-1)`.
pub fn normalize_percentile(img: &Image, lo: f64, hi: f64) -> Result<Image> {
    if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
        return Err(Error::invalid(format!(
            "percentile bounds must satisfy 0 <= lo < hi <= 100, got ({lo}, {hi})"
        )));
    }
    let mut sorted: Vec<f32> = img.data.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let p_lo = percentile_sorted(&sorted, lo);
    let p_hi = percentile_sorted(&sorted, hi);
    let span = p_hi - p_lo;
    let mut out = img.clone();
    if span <= 0.0 {
        out.data.fill(0.0);
        return Ok(out);
    }
    for v in &mut out.data {
        let c = (*v as f64).clamp(p_lo, p_hi);
        *v = ((c - p_lo) / span) as f32;
    }
    Ok(out)
}

fn percentile_sorted(sorted: &[f32], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0] as f64;
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

/// 3-pixel median filter along one axis with replicate edge extension.
pub fn median_filter_directional(img: &Image, window: MedianWindow) -> Image {
    let (h, w) = (img.height, img.width);
    let mut out = Image::zeros(h, w);
    let median3 = |a: f32, b: f32, c: f32| a.max(b).min(a.min(b).max(c));
    match window {
        MedianWindow::Row3 => {
            for y in 0..h {
                for x in 0..w {
                    let l = img.at(y, x.saturating_sub(1));
                    let c = img.at(y, x);
                    let r = img.at(y, (x + 1).min(w - 1));
                    out.set(y, x, median3(l, c, r));
                }
            }
        }
        MedianWindow::Col3 => {
            for y in 0..h {
                for x in 0..w {
                    let u = img.at(y.saturating_sub(1), x);
                    let c = img.at(y, x);
                    let d = img.at((y + 1).min(h - 1), x);
                    out.set(y, x, median3(u, c, d));
                }
            }
        }
    }
    out
}

/// Zeroes every intensity below `floor`; values at or above pass unchanged.
pub fn threshold_denoise(img: &Image, floor: f32) -> Image {
    let mut out = img.clone();
    for v in &mut out.data {
        if *v < floor {
            *v = 0.0;
        }
    }
    out
}

/// Pads with zeros at the bottom/right until both dimensions are multiples
/// of `m`. The returned [`CropRecord`] restores the original region exactly.
pub fn pad_to_multiple(img: &Image, m: usize) -> (Image, CropRecord) {
    assert!(m >= 1, "padding multiple must be at least 1");
    let ph = img.height.div_ceil(m) * m;
    let pw = img.width.div_ceil(m) * m;
    let record = CropRecord { height: img.height, width: img.width };
    if ph == img.height && pw == img.width {
        return (img.clone(), record);
    }
    let mut out = Image::zeros(ph, pw);
    for y in 0..img.height {
        out.data[y * pw..y * pw + img.width].copy_from_slice(img.row(y));
    }
    (out, record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_empty_and_mismatched() {
        assert!(Image::new(0, 4, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn normalize_constant_maps_to_zeros() {
        let img = Image::new(4, 4, vec![0.5; 16]).unwrap();
        let out = normalize_percentile(&img, 0.05, 99.95).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_full_span_is_identity_on_unit_data() {
        let img = Image::new(1, 5, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let out = normalize_percentile(&img, 0.0, 100.0).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    // Independent sort-based percentile oracle used to freeze the clipping case.
    fn percentile_oracle(values: &[f32], p: f64) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let rank = p / 100.0 * (sorted.len() - 1) as f64;
        let lo = sorted[rank.floor() as usize] as f64;
        let hi = sorted[rank.ceil() as usize] as f64;
        lo + (hi - lo) * (rank - rank.floor())
    }

    #[test]
    fn normalize_clips_outlier_to_high_percentile() {
        // 1000-sample ramp plus one large outlier.
        let mut data: Vec<f32> = (0..1000).map(|i| i as f32 / 999.0).collect();
        data.push(10.0);
        let img = Image::new(7, 143, data.clone()).unwrap();
        let out = normalize_percentile(&img, 0.05, 99.95).unwrap();

        let p_lo = percentile_oracle(&data, 0.05);
        let p_hi = percentile_oracle(&data, 99.95);
        assert!(p_hi < 10.0, "oracle must clip the outlier");
        let max = out.data().iter().cloned().fold(f32::MIN, f32::max);
        let min = out.data().iter().cloned().fold(f32::MAX, f32::min);
        assert!((max - 1.0).abs() < 1e-6);
        assert!(min.abs() < 1e-6);
        // The outlier lands exactly at the top of the band.
        assert!((out.data()[1000] - 1.0).abs() < 1e-6);
        // A mid-ramp pixel matches the oracle's affine map.
        let expect = ((data[500] as f64).clamp(p_lo, p_hi) - p_lo) / (p_hi - p_lo);
        assert!((out.data()[500] as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn normalize_idempotent_on_full_span() {
        let img = Image::new(1, 6, vec![0.1, 0.9, 0.3, 0.2, 0.8, 0.5]).unwrap();
        let once = normalize_percentile(&img, 0.0, 100.0).unwrap();
        let twice = normalize_percentile(&once, 0.0, 100.0).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn median_constant_is_identity() {
        let img = Image::new(3, 3, vec![0.7; 9]).unwrap();
        assert_eq!(median_filter_directional(&img, MedianWindow::Col3).data(), img.data());
    }

    #[test]
    fn median_row_window_matches_hand_oracle() {
        let img = Image::new(1, 5, vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let out = median_filter_directional(&img, MedianWindow::Row3);
        // Replicate edges: [0,0,1] [0,1,0] [1,0,1] [0,1,0] [1,0,0]
        assert_eq!(out.data(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn median_col_removes_isolated_hot_pixel() {
        let mut img = Image::zeros(5, 5);
        img.set(2, 2, 1.0);
        let out = median_filter_directional(&img, MedianWindow::Col3);
        assert_eq!(out.at(2, 2), 0.0);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn median_output_values_come_from_input() {
        let img = Image::new(4, 4, (0..16).map(|i| (i as f32 * 7.3) % 1.0).collect()).unwrap();
        for window in [MedianWindow::Col3, MedianWindow::Row3] {
            let out = median_filter_directional(&img, window);
            for v in out.data() {
                assert!(img.data().contains(v));
            }
        }
    }

    #[test]
    fn threshold_cases() {
        let img = Image::new(1, 2, vec![0.01, 0.5]).unwrap();
        assert_eq!(threshold_denoise(&img, 0.0).data(), img.data());
        assert_eq!(threshold_denoise(&img, 0.05).data(), &[0.0, 0.5]);
        let img2 = Image::new(1, 2, vec![0.99, 0.2]).unwrap();
        assert!(threshold_denoise(&img2, 1.0).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pad_already_multiple_is_identity() {
        let img = Image::from_fn(128, 128, |y, x| ((y * x) % 7) as f32 / 7.0);
        let (padded, rec) = pad_to_multiple(&img, 128);
        assert_eq!(padded, img);
        assert_eq!(rec, CropRecord { height: 128, width: 128 });
    }

    #[test]
    fn pad_rounds_up_to_next_multiple() {
        let img = Image::zeros(300, 200);
        let (padded, rec) = pad_to_multiple(&img, 128);
        assert_eq!((padded.height(), padded.width()), (384, 256));
        let back = rec.crop(&padded).unwrap();
        assert_eq!((back.height(), back.width()), (300, 200));
    }

    #[test]
    fn pad_one_pixel_corner_case() {
        let mut img = Image::zeros(1, 1);
        img.set(0, 0, 0.9);
        let (padded, _) = pad_to_multiple(&img, 128);
        assert_eq!((padded.height(), padded.width()), (128, 128));
        assert_eq!(padded.at(0, 0), 0.9);
        assert_eq!(padded.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }
}
