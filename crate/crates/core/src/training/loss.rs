//! Pixel and Fourier-magnitude losses with their reverse-mode gradients.
//!
//! Both losses are means per batch element averaged over the batch; for the
//! Fourier term each channel plane goes through an unnormalized 2-D DFT and
//! the mean absolute difference of the magnitude spectra divides by the
//! per-image element count. Gradients are defined as 0 at absolute-value
//! ties and where a magnitude is exactly 0.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::exec;
use crate::nn::{Scalar, Tensor4};
use crate::{Error, Result};

fn check_dims<T: Scalar>(truth: &Tensor4<T>, recon: &Tensor4<T>) -> Result<()> {
    if truth.dims() != recon.dims() {
        return Err(Error::shape(format!(
            "loss inputs differ: {:?} vs {:?}",
            truth.dims(),
            recon.dims()
        )));
    }
    Ok(())
}

/// Mean absolute elementwise difference.
pub fn loss_mae<T: Scalar>(truth: &Tensor4<T>, recon: &Tensor4<T>) -> Result<f64> {
    Ok(loss_mae_grad(truth, recon)?.0)
}

/// MAE and its gradient with respect to the reconstruction.
pub fn loss_mae_grad<T: Scalar>(truth: &Tensor4<T>, recon: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
    check_dims(truth, recon)?;
    let b = truth.batch();
    let n = truth.len() as f64;
    let inv_n = T::c(1.0 / n);
    let elem = truth.len() / b;

    let mut grad = Tensor4::zeros(truth.dims());
    let partials: Vec<f64> = exec::map_chunks_mut(grad.data_mut(), elem, |bi, g| {
        let t = truth.element(bi);
        let r = recon.element(bi);
        let mut acc = 0.0f64;
        for i in 0..elem {
            let d = r[i] - t[i];
            acc += Scalar::to_f64(d).abs();
            g[i] = if d > T::zero() {
                inv_n
            } else if d < T::zero() {
                -inv_n
            } else {
                T::zero()
            };
        }
        acc
    });
    let total: f64 = partials.iter().sum();
    Ok((total / n, grad))
}

/// Unnormalized 2-D DFT (or inverse) of each `h`×`w` plane in `buf`.
fn fft2_planes<T: Scalar>(buf: &mut [Complex<T>], h: usize, w: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let row_fft = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    let col_fft = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    for plane in buf.chunks_exact_mut(h * w) {
        row_fft.process(plane);
        let mut t = vec![Complex::new(T::zero(), T::zero()); h * w];
        for y in 0..h {
            for x in 0..w {
                t[x * h + y] = plane[y * w + x];
            }
        }
        col_fft.process(&mut t);
        for y in 0..h {
            for x in 0..w {
                plane[y * w + x] = t[x * h + y];
            }
        }
    }
}

/// Extracts channel `c` of batch element `b` as a complex plane.
fn plane_of<T: Scalar>(t: &Tensor4<T>, b: usize, c: usize) -> Vec<Complex<T>> {
    let [_, h, w, ch] = t.dims();
    let e = t.element(b);
    let mut out = Vec::with_capacity(h * w);
    for px in 0..h * w {
        out.push(Complex::new(e[px * ch + c], T::zero()));
    }
    out
}

/// Mean absolute difference of the 2-D Fourier magnitude spectra.
pub fn loss_fmae<T: Scalar>(truth: &Tensor4<T>, recon: &Tensor4<T>) -> Result<f64> {
    check_dims(truth, recon)?;
    let [b, h, w, ch] = truth.dims();
    let n_img = (h * w * ch) as f64;
    let parts: Vec<f64> = exec::map_indexed(b, |bi| {
        let mut acc = 0.0f64;
        for c in 0..ch {
            let mut ft = plane_of(truth, bi, c);
            let mut fr = plane_of(recon, bi, c);
            fft2_planes(&mut ft, h, w, false);
            fft2_planes(&mut fr, h, w, false);
            for (a, r) in ft.iter().zip(&fr) {
                acc += (Scalar::to_f64(a.norm()) - Scalar::to_f64(r.norm())).abs();
            }
        }
        acc / n_img
    });
    Ok(parts.iter().sum::<f64>() / b as f64)
}

/// Fourier-magnitude MAE and its gradient with respect to the reconstruction.
///
/// For loss `L = mean_k | |T_k| - |R_k| |` the gradient back through the
/// magnitude and the DFT is `Re(IDFT(s ⊙ R/|R|)) / N` per plane, where
/// `s_k = sign(|R_k| - |T_k|)` and the unit phasor is taken as 0 where
/// `|R_k| = 0`.
pub fn loss_fmae_grad<T: Scalar>(
    truth: &Tensor4<T>,
    recon: &Tensor4<T>,
) -> Result<(f64, Tensor4<T>)> {
    check_dims(truth, recon)?;
    let [b, h, w, ch] = truth.dims();
    let n_img = (h * w * ch) as f64;
    let scale = T::c(1.0 / (n_img * b as f64));

    let parts: Vec<(f64, Vec<T>)> = exec::map_indexed(b, |bi| {
        let mut acc = 0.0f64;
        let mut grad_elem = vec![T::zero(); h * w * ch];
        for c in 0..ch {
            let mut ft = plane_of(truth, bi, c);
            let mut fr = plane_of(recon, bi, c);
            fft2_planes(&mut ft, h, w, false);
            fft2_planes(&mut fr, h, w, false);
            let mut g = vec![Complex::new(T::zero(), T::zero()); h * w];
            for k in 0..h * w {
                let mt = ft[k].norm();
                let mr = fr[k].norm();
                acc += (Scalar::to_f64(mt) - Scalar::to_f64(mr)).abs();
                if mr > T::zero() && mt != mr {
                    let s = if mr > mt { T::one() } else { -T::one() };
                    g[k] = fr[k] * (s / mr);
                }
            }
            // Unnormalized inverse DFT; only the real part survives because
            // the forward input was real.
            fft2_planes(&mut g, h, w, true);
            for px in 0..h * w {
                grad_elem[px * ch + c] = g[px].re * scale;
            }
        }
        (acc / n_img, grad_elem)
    });

    let mut grad = Tensor4::zeros(truth.dims());
    let elem = h * w * ch;
    let mut total = 0.0f64;
    for (bi, (v, g)) in parts.into_iter().enumerate() {
        total += v;
        grad.data_mut()[bi * elem..(bi + 1) * elem].copy_from_slice(&g);
    }
    Ok((total / b as f64, grad))
}

/// Weighted sum `λ1·MAE + λ2·FMAE`.
pub fn loss_total<T: Scalar>(
    truth: &Tensor4<T>,
    recon: &Tensor4<T>,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let mae = loss_mae(truth, recon)?;
    if lambda2 == 0.0 {
        return Ok(lambda1 * mae);
    }
    Ok(lambda1 * mae + lambda2 * loss_fmae(truth, recon)?)
}

/// Weighted loss and its gradient with respect to the reconstruction.
pub fn loss_total_grad<T: Scalar>(
    truth: &Tensor4<T>,
    recon: &Tensor4<T>,
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, Tensor4<T>)> {
    let (mae, mut grad) = loss_mae_grad(truth, recon)?;
    let l1 = T::c(lambda1);
    for g in grad.data_mut() {
        *g = *g * l1;
    }
    if lambda2 == 0.0 {
        return Ok((lambda1 * mae, grad));
    }
    let (fmae, fgrad) = loss_fmae_grad(truth, recon)?;
    let l2 = T::c(lambda2);
    for (g, &f) in grad.data_mut().iter_mut().zip(fgrad.data()) {
        *g = *g + l2 * f;
    }
    Ok((lambda1 * mae + lambda2 * fmae, grad))
}
