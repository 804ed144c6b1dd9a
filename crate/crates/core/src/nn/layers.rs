//! Differentiable layers: 2-D convolution, ELU, batch normalization, and
//! the conv→ELU→BN block the architectures are assembled from.
//!
//! Training forwards cache what the backward pass needs and consume their
//! input; `infer` paths are pure `&self` functions over running statistics,
//! so frozen models can serve tiles from many threads at once. Convolutions
//! lower to im2col + GEMM per batch element; batch elements run in parallel
//! and all cross-element reductions combine partial results in batch order,
//! keeping outputs identical with and without rayon.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{matmul, matmul_a_bt, matmul_at_b, Scalar, Tensor4};
use crate::exec;

/// A named trainable (or tracked) value array with its gradient buffer.
#[derive(Debug, Clone)]
pub struct ParamTensor<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<T>,
    pub grads: Vec<T>,
    /// Running statistics are tracked but not touched by the optimizer.
    pub trainable: bool,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, values: Vec<T>, trainable: bool) -> Self {
        let len: usize = dims.iter().product();
        assert_eq!(values.len(), len);
        Self {
            name: name.into(),
            dims,
            grads: vec![T::zero(); len],
            values,
            trainable,
        }
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(T::zero());
    }
}

/// Mutable visitor over a layer's parameters in a stable order.
pub trait Layer<T: Scalar> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>));
}

// SAME padding: output dims are ceil(in/stride); any extra padding goes to
// the bottom/right.
fn same_padding(in_len: usize, ksize: usize, stride: usize) -> (usize, usize) {
    let out = in_len.div_ceil(stride);
    let total = ((out - 1) * stride + ksize).saturating_sub(in_len);
    (total / 2, out)
}

/// 2-D cross-correlation with zero SAME padding, stride 1 or 2.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub kernel: ParamTensor<T>, // (kh, kw, cin, cout) — also the (K × cout) GEMM matrix
    pub bias: ParamTensor<T>,   // (cout)
    ksize: usize,
    stride: usize,
    cin: usize,
    cout: usize,
    cache: Option<Tensor4<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-uniform kernel init (fan-in scaled), zero bias.
    pub fn new(
        name: &str,
        ksize: usize,
        stride: usize,
        cin: usize,
        cout: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(stride == 1 || stride == 2);
        let fan_in = (ksize * ksize * cin) as f64;
        let limit = (6.0 / fan_in).sqrt();
        let kernel: Vec<T> = (0..ksize * ksize * cin * cout)
            .map(|_| T::c(rng.gen_range(-limit..limit)))
            .collect();
        Self {
            kernel: ParamTensor::new(
                format!("{name}.kernel"),
                vec![ksize, ksize, cin, cout],
                kernel,
                true,
            ),
            bias: ParamTensor::new(format!("{name}.bias"), vec![cout], vec![T::zero(); cout], true),
            ksize,
            stride,
            cin,
            cout,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn out_channels(&self) -> usize {
        self.cout
    }

    pub fn out_dims(&self, in_dims: [usize; 4]) -> [usize; 4] {
        let (_, oh) = same_padding(in_dims[1], self.ksize, self.stride);
        let (_, ow) = same_padding(in_dims[2], self.ksize, self.stride);
        [in_dims[0], oh, ow, self.cout]
    }

    fn im2col(&self, x: &Tensor4<T>, b: usize, cols: &mut [T]) {
        let [_, h, w, c] = x.dims();
        let (pt, oh) = same_padding(h, self.ksize, self.stride);
        let (pl, ow) = same_padding(w, self.ksize, self.stride);
        let k = self.ksize;
        let row_len = k * k * c;
        let data = x.element(b);
        cols.fill(T::zero());
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (oy * ow + ox) * row_len;
                for dy in 0..k {
                    let y = (oy * self.stride + dy) as isize - pt as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for dx in 0..k {
                        let xx = (ox * self.stride + dx) as isize - pl as isize;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        let src = (y as usize * w + xx as usize) * c;
                        let dst = row + (dy * k + dx) * c;
                        cols[dst..dst + c].copy_from_slice(&data[src..src + c]);
                    }
                }
            }
        }
    }

    fn col2im(&self, dcols: &[T], in_dims: [usize; 4], dx: &mut [T]) {
        let [_, h, w, c] = in_dims;
        let (pt, oh) = same_padding(h, self.ksize, self.stride);
        let (pl, ow) = same_padding(w, self.ksize, self.stride);
        let k = self.ksize;
        let row_len = k * k * c;
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (oy * ow + ox) * row_len;
                for dy in 0..k {
                    let y = (oy * self.stride + dy) as isize - pt as isize;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for dx_ in 0..k {
                        let xx = (ox * self.stride + dx_) as isize - pl as isize;
                        if xx < 0 || xx >= w as isize {
                            continue;
                        }
                        let dst = (y as usize * w + xx as usize) * c;
                        let src = row + (dy * k + dx_) * c;
                        for j in 0..c {
                            dx[dst + j] = dx[dst + j] + dcols[src + j];
                        }
                    }
                }
            }
        }
    }

    fn compute(&self, x: &Tensor4<T>) -> Tensor4<T> {
        assert_eq!(x.channels(), self.cin, "conv input channel mismatch");
        let out_dims = self.out_dims(x.dims());
        let [_, oh, ow, _] = out_dims;
        let hw = oh * ow;
        let krows = self.ksize * self.ksize * self.cin;
        let mut out = Tensor4::zeros(out_dims);
        let elem = hw * self.cout;
        let pointwise = self.ksize == 1 && self.stride == 1;
        exec::for_each_chunk_mut(out.data_mut(), elem, |b, chunk| {
            if pointwise {
                matmul(hw, self.cin, self.cout, x.element(b), &self.kernel.values, chunk);
            } else {
                let mut cols = vec![T::zero(); hw * krows];
                self.im2col(x, b, &mut cols);
                matmul(hw, krows, self.cout, &cols, &self.kernel.values, chunk);
            }
            for px in 0..hw {
                for co in 0..self.cout {
                    chunk[px * self.cout + co] =
                        chunk[px * self.cout + co] + self.bias.values[co];
                }
            }
        });
        out
    }

    pub fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let out = self.compute(&x);
        self.cache = Some(x);
        out
    }

    /// Training forward over the first `c_used` channels of a dense-block
    /// buffer; caches the prefix copy for the weight gradient.
    pub fn train_forward_prefix(&mut self, buf: &Tensor4<T>, c_used: usize) -> Tensor4<T> {
        self.train_forward(buf.slice_channels(0, c_used))
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        self.compute(x)
    }

    /// Gradients w.r.t. input; accumulates kernel and bias gradients.
    pub fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let x = self.cache.take().expect("conv backward without forward");
        let in_dims = x.dims();
        let batch = in_dims[0];
        let [_, oh, ow, _] = dy.dims();
        let hw = oh * ow;
        let krows = self.ksize * self.ksize * self.cin;
        let in_elem = in_dims[1] * in_dims[2] * in_dims[3];
        let pointwise = self.ksize == 1 && self.stride == 1;

        // Per-element partials, combined in batch order below.
        let parts: Vec<(Vec<T>, Vec<T>, Vec<T>)> = exec::map_indexed(batch, |b| {
            let dy_b = dy.element(b);
            // dX = dY · Wᵀ, scattered back through the im2col pattern.
            let mut dx_b = vec![T::zero(); in_elem];
            if pointwise {
                matmul_a_bt(hw, self.cout, self.cin, dy_b, &self.kernel.values, &mut dx_b);
            } else {
                let mut dcols = vec![T::zero(); hw * krows];
                matmul_a_bt(hw, self.cout, krows, dy_b, &self.kernel.values, &mut dcols);
                self.col2im(&dcols, in_dims, &mut dx_b);
            }
            // dW = colsᵀ · dY.
            let mut dw_b = vec![T::zero(); krows * self.cout];
            if pointwise {
                matmul_at_b(self.cin, hw, self.cout, x.element(b), dy_b, &mut dw_b);
            } else {
                let mut cols = vec![T::zero(); hw * krows];
                self.im2col(&x, b, &mut cols);
                matmul_at_b(krows, hw, self.cout, &cols, dy_b, &mut dw_b);
            }
            // db = column sums of dY.
            let mut db_b = vec![T::zero(); self.cout];
            for px in 0..hw {
                for co in 0..self.cout {
                    db_b[co] = db_b[co] + dy_b[px * self.cout + co];
                }
            }
            (dx_b, dw_b, db_b)
        });

        let mut dx = Tensor4::zeros(in_dims);
        for (b, (dx_b, dw_b, db_b)) in parts.into_iter().enumerate() {
            dx.data_mut()[b * in_elem..(b + 1) * in_elem].copy_from_slice(&dx_b);
            for (g, v) in self.kernel.grads.iter_mut().zip(&dw_b) {
                *g = *g + *v;
            }
            for (g, v) in self.bias.grads.iter_mut().zip(&db_b) {
                *g = *g + *v;
            }
        }
        dx
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        f(&mut self.kernel);
        f(&mut self.bias);
    }
}

/// Exponential linear unit, α = 1.
#[derive(Debug, Clone, Default)]
pub struct Elu<T> {
    cache: Option<Tensor4<T>>,
}

fn elu_value<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp() - T::one()
    }
}

impl<T: Scalar> Elu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    fn compute(&self, mut x: Tensor4<T>) -> Tensor4<T> {
        exec::for_each_chunk_mut(x.data_mut(), 1 << 14, |_, chunk| {
            for v in chunk {
                *v = elu_value(*v);
            }
        });
        x
    }

    pub fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let out = self.compute(x);
        self.cache = Some(out.clone());
        out
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        self.compute(x.clone())
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let y = self.cache.take().expect("elu backward without forward");
        let mut dx = dy.clone();
        // d/dx = 1 for x > 0, e^x = y + 1 otherwise.
        for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
            if yv <= T::zero() {
                *d = *d * (yv + T::one());
            }
        }
        dx
    }
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor4<T>,
    inv_std: Vec<T>,
}

/// Per-channel batch normalization with running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: ParamTensor<T>,
    pub beta: ParamTensor<T>,
    pub running_mean: ParamTensor<T>,
    pub running_var: ParamTensor<T>,
    momentum: T,
    eps: T,
    cache: Option<BnCache<T>>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: &str, channels: usize, momentum: f64, eps: f64) -> Self {
        Self {
            gamma: ParamTensor::new(
                format!("{name}.gamma"),
                vec![channels],
                vec![T::one(); channels],
                true,
            ),
            beta: ParamTensor::new(
                format!("{name}.beta"),
                vec![channels],
                vec![T::zero(); channels],
                true,
            ),
            running_mean: ParamTensor::new(
                format!("{name}.running_mean"),
                vec![channels],
                vec![T::zero(); channels],
                false,
            ),
            running_var: ParamTensor::new(
                format!("{name}.running_var"),
                vec![channels],
                vec![T::one(); channels],
                false,
            ),
            momentum: T::c(momentum),
            eps: T::c(eps),
            cache: None,
        }
    }

    /// Two-pass batch statistics with per-element partials combined in
    /// batch order (biased variance, matching the normalization statistic).
    fn batch_stats(&self, x: &Tensor4<T>) -> (Vec<T>, Vec<T>) {
        let [b, h, w, c] = x.dims();
        let n = T::c((b * h * w) as f64);
        let sums: Vec<Vec<T>> = exec::map_indexed(b, |bi| {
            let mut s = vec![T::zero(); c];
            for px in x.element(bi).chunks_exact(c) {
                for (acc, &v) in s.iter_mut().zip(px) {
                    *acc = *acc + v;
                }
            }
            s
        });
        let mut mean = vec![T::zero(); c];
        for s in &sums {
            for (m, &v) in mean.iter_mut().zip(s) {
                *m = *m + v;
            }
        }
        for m in &mut mean {
            *m = *m / n;
        }
        let sq: Vec<Vec<T>> = exec::map_indexed(b, |bi| {
            let mut s = vec![T::zero(); c];
            for px in x.element(bi).chunks_exact(c) {
                for ((acc, &v), &m) in s.iter_mut().zip(px).zip(&mean) {
                    let d = v - m;
                    *acc = *acc + d * d;
                }
            }
            s
        });
        let mut var = vec![T::zero(); c];
        for s in &sq {
            for (vv, &v) in var.iter_mut().zip(s) {
                *vv = *vv + v;
            }
        }
        for v in &mut var {
            *v = *v / n;
        }
        (mean, var)
    }

    pub fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let dims = x.dims();
        let c = dims[3];
        let (mean, var) = self.batch_stats(&x);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();

        let mut xhat = x;
        let elem = dims[1] * dims[2] * dims[3];
        exec::for_each_chunk_mut(xhat.data_mut(), elem, |_, chunk| {
            for px in chunk.chunks_exact_mut(c) {
                for (j, v) in px.iter_mut().enumerate() {
                    *v = (*v - mean[j]) * inv_std[j];
                }
            }
        });
        let mut out = xhat.clone();
        let gamma = &self.gamma.values;
        let beta = &self.beta.values;
        exec::for_each_chunk_mut(out.data_mut(), elem, |_, chunk| {
            for px in chunk.chunks_exact_mut(c) {
                for (j, v) in px.iter_mut().enumerate() {
                    *v = gamma[j] * *v + beta[j];
                }
            }
        });

        let m = self.momentum;
        let one_m = T::one() - m;
        for j in 0..c {
            self.running_mean.values[j] = m * self.running_mean.values[j] + one_m * mean[j];
            self.running_var.values[j] = m * self.running_var.values[j] + one_m * var[j];
        }
        self.cache = Some(BnCache { xhat, inv_std });
        out
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        let c = x.channels();
        let scale: Vec<T> = (0..c)
            .map(|j| self.gamma.values[j] / (self.running_var.values[j] + self.eps).sqrt())
            .collect();
        let shift: Vec<T> = (0..c)
            .map(|j| self.beta.values[j] - scale[j] * self.running_mean.values[j])
            .collect();
        let mut out = x.clone();
        let elem = x.height() * x.width() * c;
        exec::for_each_chunk_mut(out.data_mut(), elem, |_, chunk| {
            for px in chunk.chunks_exact_mut(c) {
                for (j, v) in px.iter_mut().enumerate() {
                    *v = scale[j] * *v + shift[j];
                }
            }
        });
        out
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let BnCache { xhat, inv_std } =
            self.cache.take().expect("batch norm backward without forward");
        let [b, h, w, c] = xhat.dims();
        let n = T::c((b * h * w) as f64);

        // Per-channel Σdy and Σdy·x̂, per-element partials in order.
        let parts: Vec<(Vec<T>, Vec<T>)> = exec::map_indexed(b, |bi| {
            let mut s_dy = vec![T::zero(); c];
            let mut s_dyx = vec![T::zero(); c];
            let dyb = dy.element(bi);
            let xb = xhat.element(bi);
            for (dpx, xpx) in dyb.chunks_exact(c).zip(xb.chunks_exact(c)) {
                for j in 0..c {
                    s_dy[j] = s_dy[j] + dpx[j];
                    s_dyx[j] = s_dyx[j] + dpx[j] * xpx[j];
                }
            }
            (s_dy, s_dyx)
        });
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dyx = vec![T::zero(); c];
        for (a, bb) in &parts {
            for j in 0..c {
                sum_dy[j] = sum_dy[j] + a[j];
                sum_dyx[j] = sum_dyx[j] + bb[j];
            }
        }
        for j in 0..c {
            self.beta.grads[j] = self.beta.grads[j] + sum_dy[j];
            self.gamma.grads[j] = self.gamma.grads[j] + sum_dyx[j];
        }

        let gamma = &self.gamma.values;
        let mut dx = dy.clone();
        let elem = h * w * c;
        let xh = &xhat;
        exec::for_each_chunk_mut(dx.data_mut(), elem, |bi, chunk| {
            let xb = xh.element(bi);
            for (dpx, xpx) in chunk.chunks_exact_mut(c).zip(xb.chunks_exact(c)) {
                for j in 0..c {
                    let term = dpx[j] * n - sum_dy[j] - xpx[j] * sum_dyx[j];
                    dpx[j] = gamma[j] * inv_std[j] * term / n;
                }
            }
        });
        dx
    }
}

impl<T: Scalar> Layer<T> for BatchNorm<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

/// Convolution → ELU → batch norm, the building block of every path.
#[derive(Debug, Clone)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    elu: Elu<T>,
    bn: BatchNorm<T>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new(
        name: &str,
        ksize: usize,
        stride: usize,
        cin: usize,
        cout: usize,
        momentum: f64,
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            conv: Conv2d::new(&format!("{name}.conv"), ksize, stride, cin, cout, rng),
            elu: Elu::new(),
            bn: BatchNorm::new(&format!("{name}.bn"), cout, momentum, eps),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels()
    }

    pub fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let t = self.conv.train_forward(x);
        let u = self.elu.train_forward(t);
        self.bn.train_forward(u)
    }

    pub fn train_forward_prefix(&mut self, buf: &Tensor4<T>, c_used: usize) -> Tensor4<T> {
        let t = self.conv.train_forward_prefix(buf, c_used);
        let u = self.elu.train_forward(t);
        self.bn.train_forward(u)
    }

    pub fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        self.bn.infer(&self.elu.infer(&self.conv.infer(x)))
    }

    pub fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let d = self.bn.backward(dy);
        let d = self.elu.backward(&d);
        self.conv.backward(&d)
    }
}

impl<T: Scalar> Layer<T> for ConvBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.conv.visit_params(f);
        self.bn.visit_params(f);
    }
}

/// Nearest-neighbor 2× spatial upsampling.
pub fn upsample2x<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let [b, h, w, c] = x.dims();
    let mut out = Tensor4::zeros([b, 2 * h, 2 * w, c]);
    let elem = 4 * h * w * c;
    exec::for_each_chunk_mut(out.data_mut(), elem, |bi, chunk| {
        let src = x.element(bi);
        for y in 0..2 * h {
            for xx in 0..2 * w {
                let s = ((y / 2) * w + xx / 2) * c;
                let d = (y * 2 * w + xx) * c;
                chunk[d..d + c].copy_from_slice(&src[s..s + c]);
            }
        }
    });
    out
}

/// Adjoint of [`upsample2x`]: sums each 2×2 output group.
pub fn upsample2x_backward<T: Scalar>(dy: &Tensor4<T>) -> Tensor4<T> {
    let [b, h2, w2, c] = dy.dims();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut out = Tensor4::zeros([b, h, w, c]);
    let elem = h * w * c;
    exec::for_each_chunk_mut(out.data_mut(), elem, |bi, chunk| {
        let src = dy.element(bi);
        for y in 0..h2 {
            for xx in 0..w2 {
                let s = (y * w2 + xx) * c;
                let d = ((y / 2) * w + xx / 2) * c;
                for j in 0..c {
                    chunk[d + j] = chunk[d + j] + src[s + j];
                }
            }
        }
    });
    out
}

/// Concatenates two tensors along channels, `a` first.
pub fn concat_channels<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Tensor4<T> {
    let [ab, ah, aw, ac] = a.dims();
    let bc = b.dims()[3];
    assert_eq!([ab, ah, aw], [b.dims()[0], b.dims()[1], b.dims()[2]]);
    let mut out = Tensor4::zeros([ab, ah, aw, ac + bc]);
    out.write_channels(0, a);
    out.write_channels(ac, b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn rng() -> ChaCha8Rng {
        stream(7, Purpose::Init, 0, 0)
    }

    #[test]
    fn pointwise_identity_kernel_is_identity() {
        let mut conv = Conv2d::<f64>::new("t", 1, 1, 1, 1, &mut rng());
        conv.kernel.values[0] = 1.0;
        conv.bias.values[0] = 0.0;
        let x = Tensor4::from_vec([1, 3, 3, 1], (0..9).map(|v| v as f64 * 0.1).collect()).unwrap();
        let y = conv.infer(&x);
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn ones_kernel_window_sums() {
        // 3x3 all-ones kernel over a 3x3 all-ones input with zero padding:
        // the center sees 9 taps, corners see 4, edges see 6.
        let mut conv = Conv2d::<f64>::new("t", 3, 1, 1, 1, &mut rng());
        conv.kernel.values.fill(1.0);
        conv.bias.values[0] = 0.0;
        let x = Tensor4::from_vec([1, 3, 3, 1], vec![1.0; 9]).unwrap();
        let y = conv.infer(&x);
        let expect = [4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn stride_two_halves_spatial_dims() {
        let conv = Conv2d::<f32>::new("t", 3, 2, 2, 5, &mut rng());
        assert_eq!(conv.out_dims([1, 128, 128, 2]), [1, 64, 64, 5]);
        assert_eq!(conv.out_dims([1, 65, 33, 2]), [1, 33, 17, 5]);
    }

    #[test]
    fn conv_batch_parallel_matches_sequential() {
        let conv = Conv2d::<f32>::new("t", 3, 1, 3, 4, &mut rng());
        let n = 4 * 9 * 9 * 3;
        let x = Tensor4::from_vec(
            [4, 9, 9, 3],
            (0..n).map(|i| ((i * 37 % 101) as f32) / 101.0 - 0.5).collect(),
        )
        .unwrap();
        let was = crate::exec::set_parallel(true);
        let a = conv.infer(&x);
        crate::exec::set_parallel(false);
        let b = conv.infer(&x);
        crate::exec::set_parallel(was);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn elu_values() {
        let x = Tensor4::from_vec([1, 1, 1, 3], vec![0.0f64, 2.0, -1.0]).unwrap();
        let y = Elu::new().infer(&x);
        assert_eq!(y.at(0, 0, 0, 0), 0.0);
        assert_eq!(y.at(0, 0, 0, 1), 2.0);
        assert!((y.at(0, 0, 0, 2) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((y.at(0, 0, 0, 2) + 0.63212).abs() < 1e-5);
    }

    #[test]
    fn elu_derivative_matches_finite_difference() {
        let h = 1e-6f64;
        for x0 in [-1.0f64, -0.3, 0.5, 2.0] {
            let fd = (elu_value(x0 + h) - elu_value(x0 - h)) / (2.0 * h);
            let analytic = if x0 > 0.0 { 1.0 } else { x0.exp() };
            assert!((fd - analytic).abs() < 1e-6, "x={x0}: {fd} vs {analytic}");
        }
        // Spec point: d/dx at -1 is e^{-1}.
        assert!(((-1.0f64).exp() - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn batch_norm_normalizes_unit_batch() {
        // Batch with mean 0 and variance 1 per channel: output is x / sqrt(1 + eps).
        let mut bn = BatchNorm::<f64>::new("t", 1, 0.99, 0.001);
        let vals = vec![-1.0, 1.0, -1.0, 1.0];
        let x = Tensor4::from_vec([1, 2, 2, 1], vals.clone()).unwrap();
        let y = bn.train_forward(x);
        let factor = 1.0 / 1.001f64.sqrt();
        for (o, v) in y.data().iter().zip(&vals) {
            assert!((o - v * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_norm_zero_gamma_outputs_beta() {
        let mut bn = BatchNorm::<f64>::new("t", 2, 0.99, 0.001);
        bn.gamma.values.fill(0.0);
        bn.beta.values = vec![0.3, -0.2];
        let x = Tensor4::from_vec([2, 2, 1, 2], (0..8).map(|i| i as f64).collect()).unwrap();
        let y = bn.train_forward(x);
        for px in y.data().chunks_exact(2) {
            assert!((px[0] - 0.3).abs() < 1e-12);
            assert!((px[1] + 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_norm_infer_uses_running_stats() {
        let bn = BatchNorm::<f64>::new("t", 1, 0.99, 0.001);
        // Fresh stats: mean 0, var 1 -> scaling by 1/sqrt(1.001).
        let x = Tensor4::from_vec([1, 1, 2, 1], vec![1.0, -2.0]).unwrap();
        let y = bn.infer(&x);
        let factor = 1.0 / 1.001f64.sqrt();
        assert!((factor - 0.99950).abs() < 1e-5);
        assert!((y.at(0, 0, 0, 0) - factor).abs() < 1e-12);
        assert!((y.at(0, 0, 1, 0) + 2.0 * factor).abs() < 1e-12);
    }

    #[test]
    fn batch_norm_running_stats_converge_geometrically() {
        let mut bn = BatchNorm::<f32>::new("t", 1, 0.99, 0.001);
        let x = Tensor4::from_vec([1, 2, 2, 1], vec![0.0, 2.0, 4.0, 6.0]).unwrap();
        // Batch stats: mean 3, biased var 5.
        let mut prev_err = f32::INFINITY;
        for step in 0..600 {
            bn.train_forward(x.clone());
            let err = (bn.running_mean.values[0] - 3.0).abs();
            if step % 100 == 99 {
                assert!(err < prev_err);
                prev_err = err;
            }
        }
        // 0.99^600 ≈ 2.4e-3 of the initial 3.0 gap.
        assert!((bn.running_mean.values[0] - 3.0).abs() < 0.02);
        assert!((bn.running_var.values[0] - 5.0).abs() < 0.04);
    }

    #[test]
    fn upsample_and_adjoint_shapes() {
        let x = Tensor4::from_vec([1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let up = upsample2x(&x);
        assert_eq!(up.dims(), [1, 4, 4, 1]);
        assert_eq!(up.at(0, 0, 1, 0), 1.0);
        assert_eq!(up.at(0, 3, 3, 0), 4.0);
        let back = upsample2x_backward(&up);
        assert_eq!(back.dims(), [1, 2, 2, 1]);
        // Each input pixel fans out to 4 outputs, so the adjoint of the
        // constant-1 cotangent is 4 everywhere.
        let ones = Tensor4::from_vec([1, 4, 4, 1], vec![1.0f32; 16]).unwrap();
        let g = upsample2x_backward(&ones);
        assert!(g.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn concat_orders_channels() {
        let a = Tensor4::from_vec([1, 1, 2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor4::from_vec([1, 1, 2, 1], vec![9.0f32, 8.0]).unwrap();
        let c = concat_channels(&a, &b);
        assert_eq!(c.dims(), [1, 1, 2, 3]);
        assert_eq!(c.data(), &[1.0, 2.0, 9.0, 3.0, 4.0, 8.0]);
    }
}
