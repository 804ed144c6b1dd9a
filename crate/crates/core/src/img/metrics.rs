//! PSNR, SSIM, MAE, and MSE between a ground-truth image and a reconstruction.
//!
//! All arithmetic runs in f64. SSIM follows the canonical structural
//! similarity definition: an 11×11 Gaussian window with σ = 1.5,
//! K1 = 0.01, K2 = 0.03, dynamic range 1.0, averaged over positions where
//! the window fits entirely inside the image. The filtering is separable;
//! the test suite checks it against a direct per-window oracle.

use super::Image;
use crate::{Error, Result};

/// Quality metrics for one truth/reconstruction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
    pub mse: f64,
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4; // (K1 * L)^2, K1 = 0.01, L = 1
const SSIM_C2: f64 = 9e-4; // (K2 * L)^2, K2 = 0.03

/// Computes PSNR/SSIM/MAE/MSE with peak value 1.0.
pub fn compute_metrics(truth: &Image, recon: &Image) -> Result<MetricsReport> {
    if truth.height() != recon.height() || truth.width() != recon.width() {
        return Err(Error::invalid(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            truth.height(),
            truth.width(),
            recon.height(),
            recon.width()
        )));
    }
    let n = truth.data().len() as f64;
    let mut abs_sum = 0.0f64;
    let mut sq_sum = 0.0f64;
    for (&t, &r) in truth.data().iter().zip(recon.data()) {
        let d = t as f64 - r as f64;
        abs_sum += d.abs();
        sq_sum += d * d;
    }
    let mae = abs_sum / n;
    let mse = sq_sum / n;
    let psnr = if mse > 0.0 { 10.0 * (1.0 / mse).log10() } else { f64::INFINITY };
    let ssim = ssim(truth, recon);
    Ok(MetricsReport { psnr, ssim, mae, mse })
}

/// Per-metric mean and sample standard deviation over a set of reports.
///
/// A single report yields a standard deviation of 0.
pub fn metrics_summary(reports: &[MetricsReport]) -> (MetricsReport, MetricsReport) {
    let n = reports.len() as f64;
    assert!(n > 0.0, "metrics_summary needs at least one report");
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let m = MetricsReport {
        psnr: mean(|r| r.psnr),
        ssim: mean(|r| r.ssim),
        mae: mean(|r| r.mae),
        mse: mean(|r| r.mse),
    };
    let sd = |f: fn(&MetricsReport) -> f64, mu: f64| {
        if reports.len() < 2 {
            0.0
        } else {
            (reports.iter().map(|r| (f(r) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        }
    };
    let s = MetricsReport {
        psnr: sd(|r| r.psnr, m.psnr),
        ssim: sd(|r| r.ssim, m.ssim),
        mae: sd(|r| r.mae, m.mae),
        mse: sd(|r| r.mse, m.mse),
    };
    (m, s)
}

fn gaussian_kernel(len: usize, sigma: f64) -> Vec<f64> {
    let half = (len / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Valid-region separable filter: output is (h - len + 1) × (w - len + 1).
fn filter_valid(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let len = kernel.len();
    let ow = w - len + 1;
    let oh = h - len + 1;
    // Horizontal pass.
    let mut tmp = vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                acc += src[y * w + x + i] * k;
            }
            tmp[y * ow + x] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                acc += tmp[(y + i) * ow + x] * k;
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

fn ssim(truth: &Image, recon: &Image) -> f64 {
    let (h, w) = (truth.height(), truth.width());
    // Shrink the window for tiny images so at least one position is valid.
    let mut win = SSIM_WINDOW.min(h).min(w);
    if win % 2 == 0 {
        win -= 1;
    }
    let kernel = gaussian_kernel(win, SSIM_SIGMA);

    let t: Vec<f64> = truth.data().iter().map(|&v| v as f64).collect();
    let r: Vec<f64> = recon.data().iter().map(|&v| v as f64).collect();
    let tt: Vec<f64> = t.iter().map(|v| v * v).collect();
    let rr: Vec<f64> = r.iter().map(|v| v * v).collect();
    let tr: Vec<f64> = t.iter().zip(&r).map(|(a, b)| a * b).collect();

    let mu_t = filter_valid(&t, h, w, &kernel);
    let mu_r = filter_valid(&r, h, w, &kernel);
    let e_tt = filter_valid(&tt, h, w, &kernel);
    let e_rr = filter_valid(&rr, h, w, &kernel);
    let e_tr = filter_valid(&tr, h, w, &kernel);

    let mut acc = 0.0f64;
    for i in 0..mu_t.len() {
        let (mt, mr) = (mu_t[i], mu_r[i]);
        let var_t = e_tt[i] - mt * mt;
        let var_r = e_rr[i] - mr * mr;
        let cov = e_tr[i] - mt * mr;
        let num = (2.0 * mt * mr + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (mt * mt + mr * mr + SSIM_C1) * (var_t + var_r + SSIM_C2);
        acc += num / den;
    }
    acc / mu_t.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_hit_the_sentinels() {
        let img = Image::from_fn(32, 32, |y, x| ((y * 31 + x * 17) % 97) as f32 / 97.0);
        let m = compute_metrics(&img, &img).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.mse, 0.0);
        assert!(m.psnr.is_infinite() && m.psnr > 0.0);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_closed_form() {
        // truth 0.5, recon 0.6: mse = 0.01, psnr = 20 dB, mae = 0.1.
        let truth = Image::new(64, 64, vec![0.5; 64 * 64]).unwrap();
        let recon = Image::new(64, 64, vec![0.6; 64 * 64]).unwrap();
        let m = compute_metrics(&truth, &recon).unwrap();
        // f32 quantization of 0.6 shifts the difference by ~2.4e-8.
        assert!((m.mse - 0.01).abs() < 1e-7);
        assert!((m.psnr - 20.0).abs() < 1e-5);
        assert!((m.mae - 0.1).abs() < 1e-7);
    }

    #[test]
    fn constant_images_ssim_closed_form() {
        // For constants 0 and 1 all variances vanish: SSIM = C1 / (1 + C1).
        let truth = Image::new(32, 32, vec![0.0; 1024]).unwrap();
        let recon = Image::new(32, 32, vec![1.0; 1024]).unwrap();
        let m = compute_metrics(&truth, &recon).unwrap();
        let expect = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((m.ssim - expect).abs() < 1e-6);
        assert!((expect - 9.999e-5).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Image::zeros(4, 4);
        let b = Image::zeros(4, 5);
        assert!(compute_metrics(&a, &b).is_err());
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = Image::from_fn(24, 24, |y, x| ((y + 3 * x) % 11) as f32 / 11.0);
        let b = Image::from_fn(24, 24, |y, x| ((5 * y + x) % 13) as f32 / 13.0);
        let m1 = compute_metrics(&a, &b).unwrap();
        let m2 = compute_metrics(&b, &a).unwrap();
        assert!((m1.mae - m2.mae).abs() < 1e-12);
        assert!((m1.mse - m2.mse).abs() < 1e-12);
        assert!((m1.psnr - m2.psnr).abs() < 1e-9);
        assert!((m1.ssim - m2.ssim).abs() < 1e-9);
    }

    #[test]
    fn summary_single_report_has_zero_sd() {
        let r = MetricsReport { psnr: 30.0, ssim: 0.9, mae: 0.01, mse: 0.001 };
        let (mean, sd) = metrics_summary(&[r]);
        assert_eq!(mean, r);
        assert_eq!(sd.psnr, 0.0);
        assert_eq!(sd.ssim, 0.0);
    }

    #[test]
    fn summary_mean_and_sd() {
        let a = MetricsReport { psnr: 20.0, ssim: 0.8, mae: 0.02, mse: 0.002 };
        let b = MetricsReport { psnr: 30.0, ssim: 0.9, mae: 0.04, mse: 0.004 };
        let (mean, sd) = metrics_summary(&[a, b]);
        assert!((mean.psnr - 25.0).abs() < 1e-12);
        // Sample SD of {20, 30} is sqrt(50) ≈ 7.0711.
        assert!((sd.psnr - 50f64.sqrt()).abs() < 1e-12);
        assert!((mean.ssim - 0.85).abs() < 1e-12);
    }
}
