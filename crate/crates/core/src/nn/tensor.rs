//! Batched NHWC tensor and the scalar abstraction behind the layer engine.
//!
//! The engine is generic over [`Scalar`] so the same layer code runs in f32
//! for training and in f64 for finite-difference gradient verification.
//! Matrix products dispatch to `matrixmultiply`'s single-threaded kernels,
//! which keeps results independent of thread count.

use num_traits::Float;

use crate::{Error, Result};

/// Floating-point element with a GEMM kernel.
pub trait Scalar:
    Float + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + rustfft::FftNum + 'static
{
    /// C = alpha * A·B + beta * C with explicit strides, `m`×`k` times `k`×`n`.
    ///
    /// # Safety
    /// Pointers must cover the strided extents, and C must not alias A or B.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    /// Shorthand for converting literals and f64 intermediates.
    fn c(v: f64) -> Self {
        num_traits::NumCast::from(v).expect("finite constant convertible to scalar")
    }

    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }

    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major C = A·B over contiguous row-major buffers, overwriting C.
pub(crate) fn matmul<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n,
            T::one(),
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), n as isize, 1,
            T::zero(),
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Row-major C = Aᵀ·B where A is stored `k`×`m`, overwriting C (`m`×`n`).
pub(crate) fn matmul_at_b<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n,
            T::one(),
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), n as isize, 1,
            T::zero(),
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Row-major C = A·Bᵀ where B is stored `n`×`k`, overwriting C (`m`×`n`).
pub(crate) fn matmul_a_bt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    unsafe {
        T::gemm(
            m, k, n,
            T::one(),
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            T::zero(),
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Batched activation tensor: dims `(batch, height, width, channels)`,
/// channel-fastest row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "tensor dims must be at least 1");
        Self { dims, data: vec![T::zero(); dims.iter().product()] }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::shape("tensor dims must be at least 1"));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::shape(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn width(&self) -> usize {
        self.dims[2]
    }

    pub fn channels(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Elements of one batch item, `height*width*channels` long.
    pub fn element(&self, b: usize) -> &[T] {
        let stride = self.dims[1] * self.dims[2] * self.dims[3];
        &self.data[b * stride..(b + 1) * stride]
    }

    #[inline]
    pub fn at(&self, b: usize, y: usize, x: usize, c: usize) -> T {
        let [_, h, w, ch] = self.dims;
        debug_assert!(b < self.dims[0] && y < h && x < w && c < ch);
        self.data[((b * h + y) * w + x) * ch + c]
    }

    #[inline]
    pub fn set(&mut self, b: usize, y: usize, x: usize, c: usize, v: T) {
        let [_, h, w, ch] = self.dims;
        debug_assert!(b < self.dims[0] && y < h && x < w && c < ch);
        self.data[((b * h + y) * w + x) * ch + c] = v;
    }

    /// Copies `count` channels starting at `src_c0` into a new tensor.
    pub fn slice_channels(&self, c0: usize, count: usize) -> Tensor4<T> {
        let [b, h, w, c] = self.dims;
        assert!(c0 + count <= c);
        let mut out = Tensor4::zeros([b, h, w, count]);
        for px in 0..b * h * w {
            out.data[px * count..(px + 1) * count]
                .copy_from_slice(&self.data[px * c + c0..px * c + c0 + count]);
        }
        out
    }

    /// Writes `src` (same b/h/w, fewer channels) into channels starting at `c0`.
    pub fn write_channels(&mut self, c0: usize, src: &Tensor4<T>) {
        let [b, h, w, c] = self.dims;
        let sc = src.dims[3];
        assert_eq!([b, h, w], [src.dims[0], src.dims[1], src.dims[2]]);
        assert!(c0 + sc <= c);
        for px in 0..b * h * w {
            self.data[px * c + c0..px * c + c0 + sc]
                .copy_from_slice(&src.data[px * sc..(px + 1) * sc]);
        }
    }

    /// Adds `src` into channels `c0..c0+src.channels()`.
    pub fn add_channels(&mut self, c0: usize, src: &Tensor4<T>) {
        let [b, h, w, c] = self.dims;
        let sc = src.dims[3];
        assert_eq!([b, h, w], [src.dims[0], src.dims[1], src.dims[2]]);
        assert!(c0 + sc <= c);
        for px in 0..b * h * w {
            for j in 0..sc {
                self.data[px * c + c0 + j] = self.data[px * c + c0 + j] + src.data[px * sc + j];
            }
        }
    }

    /// Elementwise sum into self.
    pub fn add_assign(&mut self, other: &Tensor4<T>) {
        assert_eq!(self.dims, other.dims);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    /// Converts element type, e.g. to run an f32 model in f64 test precision.
    pub fn cast<U: Scalar>(&self) -> Tensor4<U> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| U::c(Scalar::to_f64(*v))).collect(),
        }
    }
}

impl Tensor4<f32> {
    /// Single-channel, single-batch tensor from an image.
    pub fn from_image(img: &crate::img::Image) -> Self {
        Tensor4 {
            dims: [1, img.height(), img.width(), 1],
            data: img.data().to_vec(),
        }
    }

    /// Extracts batch element `b` of a single-channel tensor as an image.
    pub fn to_image(&self, b: usize) -> Result<crate::img::Image> {
        if self.channels() != 1 {
            return Err(Error::shape(format!(
                "expected a single-channel tensor, got {} channels",
                self.channels()
            )));
        }
        crate::img::Image::new(self.height(), self.width(), self.element(b).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_hand_product() {
        // [1 2; 3 4] · [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0f64, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        matmul(2, 2, 2, &a, &b, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let a = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3 or 3x2 depending on view
        let b = [1.0, 0.5, -1.0, 2.0, 0.0, 1.0];
        // at_b: A stored 3x2, compute A^T (2x3) · B (3x2) -> 2x2
        let mut c1 = [0.0f32; 4];
        matmul_at_b(2, 3, 2, &a, &b, &mut c1);
        let at = [1.0, 3.0, 5.0, 2.0, 4.0, 6.0];
        let mut c2 = [0.0f32; 4];
        matmul(2, 3, 2, &at, &b, &mut c2);
        assert_eq!(c1, c2);

        // a_bt: B stored 2x3, compute A (2x3) · B^T (3x2)
        let mut c3 = [0.0f32; 4];
        matmul_a_bt(2, 3, 2, &a, &b, &mut c3);
        let bt = [1.0, 2.0, 0.5, 0.0, -1.0, 1.0];
        let mut c4 = [0.0f32; 4];
        matmul(2, 3, 2, &a, &bt, &mut c4);
        assert_eq!(c3, c4);
    }

    #[test]
    fn channel_slices_round_trip() {
        let mut t = Tensor4::<f32>::zeros([2, 3, 3, 4]);
        for (i, v) in t.data_mut().iter_mut().enumerate() {
            *v = i as f32;
        }
        let s = t.slice_channels(1, 2);
        assert_eq!(s.dims(), [2, 3, 3, 2]);
        assert_eq!(s.at(0, 0, 0, 0), t.at(0, 0, 0, 1));
        let mut u = Tensor4::<f32>::zeros([2, 3, 3, 4]);
        u.write_channels(1, &s);
        assert_eq!(u.at(1, 2, 2, 2), t.at(1, 2, 2, 2));
        assert_eq!(u.at(1, 2, 2, 0), 0.0);
    }
}
