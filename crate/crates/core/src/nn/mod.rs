//! The fully dense encoder-decoder network and its plain U-net baseline.
//!
//! Both architectures share one skeleton: an initial 3×3 conv block to
//! `base_filters` channels, `depth_levels` levels of processing joined by
//! strided-convolution downsampling on the way in, and nearest-neighbor
//! upsampling + 3×3 conv + skip concatenation + level processing on the way
//! out, finished by a linear 1×1 convolution back to one channel.
//!
//! Level processing is where they differ. The fully dense variant uses a
//! dense block: four conv→ELU→BN growth layers, each emitting `k = f_in/4`
//! feature maps and reading the concatenation of the block input and every
//! previous layer's output; the block output is that full concatenation,
//! exactly `2·f_in` channels. The baseline replaces each dense block with a
//! plain pair of conv blocks (doubling channels on the contracting path,
//! halving the concatenation on the expanding path, as in the classic
//! U-net).

mod checkpoint;
pub mod gradcheck;
mod layers;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use layers::{
    concat_channels, upsample2x, upsample2x_backward, BatchNorm, Conv2d, ConvBlock, Elu, Layer,
    ParamTensor,
};
pub use tensor::{Scalar, Tensor4};

use rand_chacha::ChaCha8Rng;

use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Which per-level processing block the network uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    FdUnet,
    Unet,
}

/// Architecture hyperparameters. Defaults: fully dense variant, 4 levels,
/// 32 base filters, batch-norm momentum 0.99 and ε = 0.001. Growth and
/// channel rules are structural: `k = f_in/4`, `f_out = 2·f_in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub depth_levels: usize,
    pub base_filters: usize,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            arch: Arch::FdUnet,
            depth_levels: 4,
            base_filters: 32,
            bn_momentum: 0.99,
            bn_epsilon: 0.001,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_levels == 0 {
            return Err(Error::config("depth_levels must be at least 1"));
        }
        if self.base_filters == 0 || self.base_filters % 4 != 0 {
            return Err(Error::config(format!(
                "base_filters must be a positive multiple of 4 so k = f_in/4 is integral, got {}",
                self.base_filters
            )));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::config("bn_momentum must lie in [0, 1)"));
        }
        if self.bn_epsilon <= 0.0 {
            return Err(Error::config("bn_epsilon must be positive"));
        }
        Ok(())
    }

    /// Input dims must be divisible by this for the down/up paths to line up.
    pub fn spatial_divisor(&self) -> usize {
        1 << (self.depth_levels - 1)
    }
}

/// Forward-pass mode: training caches intermediates and updates batch-norm
/// running statistics; inference is pure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Dense block: growth layers see the block input plus all prior outputs;
/// the output is the concatenation of everything, doubling the channels.
#[derive(Debug, Clone)]
struct DenseBlock<T> {
    growth: Vec<ConvBlock<T>>,
    f_in: usize,
    k: usize,
}

const GROWTH_LAYERS: usize = 4;

impl<T: Scalar> DenseBlock<T> {
    fn new(name: &str, f_in: usize, momentum: f64, eps: f64, rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(f_in % 4, 0, "dense block input must be divisible by 4");
        let k = f_in / 4;
        let growth = (0..GROWTH_LAYERS)
            .map(|j| {
                ConvBlock::new(
                    &format!("{name}.g{j}"),
                    3,
                    1,
                    f_in + j * k,
                    k,
                    momentum,
                    eps,
                    rng,
                )
            })
            .collect();
        Self { growth, f_in, k }
    }

    fn out_channels(&self) -> usize {
        2 * self.f_in
    }

    fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let [b, h, w, c] = x.dims();
        assert_eq!(c, self.f_in);
        let mut buf = Tensor4::zeros([b, h, w, 2 * self.f_in]);
        buf.write_channels(0, &x);
        drop(x);
        for j in 0..GROWTH_LAYERS {
            let c_used = self.f_in + j * self.k;
            let y = self.growth[j].train_forward_prefix(&buf, c_used);
            buf.write_channels(c_used, &y);
        }
        buf
    }

    fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        let [b, h, w, _] = x.dims();
        let mut buf = Tensor4::zeros([b, h, w, 2 * self.f_in]);
        buf.write_channels(0, x);
        for j in 0..GROWTH_LAYERS {
            let c_used = self.f_in + j * self.k;
            let y = self.growth[j].infer(&buf.slice_channels(0, c_used));
            buf.write_channels(c_used, &y);
        }
        buf
    }

    fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let mut dbuf = dy.clone();
        for j in (0..GROWTH_LAYERS).rev() {
            let c_used = self.f_in + j * self.k;
            let dyj = dbuf.slice_channels(c_used, self.k);
            let dprefix = self.growth[j].backward(&dyj);
            dbuf.add_channels(0, &dprefix);
        }
        dbuf.slice_channels(0, self.f_in)
    }
}

impl<T: Scalar> Layer<T> for DenseBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        for g in &mut self.growth {
            g.visit_params(f);
        }
    }
}

/// Two plain conv blocks, the classic U-net level processing.
#[derive(Debug, Clone)]
struct PairBlock<T> {
    c0: ConvBlock<T>,
    c1: ConvBlock<T>,
}

impl<T: Scalar> PairBlock<T> {
    fn new(
        name: &str,
        cin: usize,
        cout: usize,
        momentum: f64,
        eps: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            c0: ConvBlock::new(&format!("{name}.c0"), 3, 1, cin, cout, momentum, eps, rng),
            c1: ConvBlock::new(&format!("{name}.c1"), 3, 1, cout, cout, momentum, eps, rng),
        }
    }

    fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let t = self.c0.train_forward(x);
        self.c1.train_forward(t)
    }

    fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        self.c1.infer(&self.c0.infer(x))
    }

    fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let d = self.c1.backward(dy);
        self.c0.backward(&d)
    }
}

impl<T: Scalar> Layer<T> for PairBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.c0.visit_params(f);
        self.c1.visit_params(f);
    }
}

#[derive(Debug, Clone)]
enum LevelBlock<T> {
    Dense(DenseBlock<T>),
    Pair(PairBlock<T>, usize),
}

impl<T: Scalar> LevelBlock<T> {
    fn out_channels(&self) -> usize {
        match self {
            LevelBlock::Dense(d) => d.out_channels(),
            LevelBlock::Pair(_, out) => *out,
        }
    }

    fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        match self {
            LevelBlock::Dense(d) => d.train_forward(x),
            LevelBlock::Pair(p, _) => p.train_forward(x),
        }
    }

    fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        match self {
            LevelBlock::Dense(d) => d.infer(x),
            LevelBlock::Pair(p, _) => p.infer(x),
        }
    }

    fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        match self {
            LevelBlock::Dense(d) => d.backward(dy),
            LevelBlock::Pair(p, _) => p.backward(dy),
        }
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        match self {
            LevelBlock::Dense(d) => d.visit_params(f),
            LevelBlock::Pair(p, _) => p.visit_params(f),
        }
    }
}

/// Learned downsampling: a 1×1 conv block then a stride-2 3×3 conv block,
/// both channel-preserving — channel changes belong to the level blocks.
#[derive(Debug, Clone)]
struct DownBlock<T> {
    pw: ConvBlock<T>,
    sc: ConvBlock<T>,
}

impl<T: Scalar> DownBlock<T> {
    fn new(name: &str, channels: usize, momentum: f64, eps: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            pw: ConvBlock::new(&format!("{name}.pw"), 1, 1, channels, channels, momentum, eps, rng),
            sc: ConvBlock::new(&format!("{name}.sc"), 3, 2, channels, channels, momentum, eps, rng),
        }
    }

    fn train_forward(&mut self, x: Tensor4<T>) -> Tensor4<T> {
        let t = self.pw.train_forward(x);
        self.sc.train_forward(t)
    }

    fn infer(&self, x: &Tensor4<T>) -> Tensor4<T> {
        self.sc.infer(&self.pw.infer(x))
    }

    fn backward(&mut self, dy: &Tensor4<T>) -> Tensor4<T> {
        let d = self.sc.backward(dy);
        self.pw.backward(&d)
    }
}

impl<T: Scalar> Layer<T> for DownBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.pw.visit_params(f);
        self.sc.visit_params(f);
    }
}

/// Expanding-path step: 2× nearest-neighbor upsample, 3×3 conv block down to
/// half the skip's channels, concatenation with the skip, then the level's
/// processing block.
#[derive(Debug, Clone)]
struct UpBlock<T> {
    conv: ConvBlock<T>,
    block: LevelBlock<T>,
    conv_out: usize,
    skip_ch: usize,
}

impl<T: Scalar> UpBlock<T> {
    fn train_forward(&mut self, x: Tensor4<T>, skip: &Tensor4<T>) -> Result<Tensor4<T>> {
        let u = upsample2x(&x);
        if [u.dims()[1], u.dims()[2]] != [skip.dims()[1], skip.dims()[2]] {
            return Err(Error::shape(format!(
                "skip dims {}x{} do not match upsampled {}x{}",
                skip.dims()[1],
                skip.dims()[2],
                u.dims()[1],
                u.dims()[2]
            )));
        }
        let v = self.conv.train_forward(u);
        let w = concat_channels(&v, skip);
        Ok(self.block.train_forward(w))
    }

    fn infer(&self, x: &Tensor4<T>, skip: &Tensor4<T>) -> Tensor4<T> {
        let u = upsample2x(x);
        let v = self.conv.infer(&u);
        self.block.infer(&concat_channels(&v, skip))
    }

    fn backward(&mut self, dy: &Tensor4<T>) -> (Tensor4<T>, Tensor4<T>) {
        let dw = self.block.backward(dy);
        let dv = dw.slice_channels(0, self.conv_out);
        let dskip = dw.slice_channels(self.conv_out, self.skip_ch);
        let du = self.conv.backward(&dv);
        (upsample2x_backward(&du), dskip)
    }
}

impl<T: Scalar> Layer<T> for UpBlock<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.conv.visit_params(f);
        self.block.visit_params(f);
    }
}

/// A built network: the layer graph plus everything needed to run and
/// differentiate it.
#[derive(Debug, Clone)]
pub struct Model<T> {
    cfg: ModelConfig,
    init: ConvBlock<T>,
    enc: Vec<LevelBlock<T>>,
    downs: Vec<DownBlock<T>>,
    ups: Vec<UpBlock<T>>,
    final_conv: Conv2d<T>,
}

/// Builds the default-precision (f32) network.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    Model::build(cfg, seed)
}

impl<T: Scalar> Model<T> {
    /// Constructs and He-initializes the network from the init stream of
    /// `seed`. Construction order fixes both the init draws and the
    /// parameter traversal order.
    pub fn build(cfg: &ModelConfig, seed: u64) -> Result<Model<T>> {
        cfg.validate()?;
        let mut rng = stream(seed, Purpose::Init, 0, 0);
        let d = cfg.depth_levels;
        let (mo, ep) = (cfg.bn_momentum, cfg.bn_epsilon);

        let init = ConvBlock::new("init", 3, 1, 1, cfg.base_filters, mo, ep, &mut rng);
        let mut enc = Vec::with_capacity(d);
        let mut downs = Vec::with_capacity(d - 1);
        for l in 0..d {
            let f_in = cfg.base_filters << l;
            let name = format!("enc{l}");
            enc.push(match cfg.arch {
                Arch::FdUnet => LevelBlock::Dense(DenseBlock::new(&name, f_in, mo, ep, &mut rng)),
                Arch::Unet => {
                    LevelBlock::Pair(PairBlock::new(&name, f_in, 2 * f_in, mo, ep, &mut rng), 2 * f_in)
                }
            });
            if l + 1 < d {
                downs.push(DownBlock::new(&format!("down{l}"), 2 * f_in, mo, ep, &mut rng));
            }
        }

        // Decoder, built top-down (level d-2 first) to follow execution order.
        let mut ups_rev = Vec::with_capacity(d.saturating_sub(1));
        let mut below = enc[d - 1].out_channels();
        for l in (0..d.saturating_sub(1)).rev() {
            let skip_ch = enc[l].out_channels();
            let conv_out = skip_ch / 2;
            let concat = conv_out + skip_ch;
            let conv =
                ConvBlock::new(&format!("up{l}.conv"), 3, 1, below, conv_out, mo, ep, &mut rng);
            let name = format!("up{l}.block");
            let block = match cfg.arch {
                Arch::FdUnet => LevelBlock::Dense(DenseBlock::new(&name, concat, mo, ep, &mut rng)),
                Arch::Unet => LevelBlock::Pair(
                    PairBlock::new(&name, concat, concat / 2, mo, ep, &mut rng),
                    concat / 2,
                ),
            };
            below = block.out_channels();
            ups_rev.push(UpBlock { conv, block, conv_out, skip_ch });
        }
        ups_rev.reverse(); // index by level
        let final_conv = Conv2d::new("final", 1, 1, below, 1, &mut rng);

        Ok(Model { cfg: *cfg, init, enc, downs, ups: ups_rev, final_conv })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        if x.channels() != 1 {
            return Err(Error::shape(format!(
                "model expects 1 input channel, got {}",
                x.channels()
            )));
        }
        let div = self.cfg.spatial_divisor();
        if x.height() % div != 0 || x.width() % div != 0 {
            return Err(Error::shape(format!(
                "input {}x{} not divisible by 2^(depth-1) = {div}",
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    /// Runs the network. Train mode caches for [`Model::backward`] and
    /// updates batch-norm running statistics; infer mode is equivalent to
    /// [`Model::infer`].
    pub fn forward(&mut self, x: &Tensor4<T>, mode: Mode) -> Result<Tensor4<T>> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => {
                self.check_input(x)?;
                let d = self.cfg.depth_levels;
                let mut cur = self.init.train_forward(x.clone());
                let mut skips = Vec::with_capacity(d - 1);
                for l in 0..d - 1 {
                    let s = self.enc[l].train_forward(cur);
                    cur = self.downs[l].train_forward(s.clone());
                    skips.push(s);
                }
                cur = self.enc[d - 1].train_forward(cur);
                for l in (0..d - 1).rev() {
                    cur = self.ups[l].train_forward(cur, &skips[l])?;
                }
                Ok(self.final_conv.train_forward(cur))
            }
        }
    }

    /// Pure inference over frozen parameters and running statistics; safe to
    /// call from many threads on one shared model.
    pub fn infer(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let d = self.cfg.depth_levels;
        let mut cur = self.init.infer(x);
        let mut skips = Vec::with_capacity(d - 1);
        for l in 0..d - 1 {
            let s = self.enc[l].infer(&cur);
            cur = self.downs[l].infer(&s);
            skips.push(s);
        }
        cur = self.enc[d - 1].infer(&cur);
        for l in (0..d - 1).rev() {
            cur = self.ups[l].infer(&cur, &skips[l]);
        }
        Ok(self.final_conv.infer(&cur))
    }

    /// Reverse-mode pass after a train forward: accumulates parameter
    /// gradients and returns the gradient with respect to the input.
    pub fn backward(&mut self, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
        let d = self.cfg.depth_levels;
        let mut grad = self.final_conv.backward(dy);
        let mut dskips = Vec::with_capacity(d - 1);
        for l in 0..d - 1 {
            let (dx, dskip) = self.ups[l].backward(&grad);
            grad = dx;
            dskips.push(dskip);
        }
        grad = self.enc[d - 1].backward(&grad);
        for l in (0..d - 1).rev() {
            grad = self.downs[l].backward(&grad);
            grad.add_assign(&dskips[l]);
            grad = self.enc[l].backward(&grad);
        }
        Ok(self.init.backward(&grad))
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |p| p.zero_grads());
    }

    /// Visits every parameter (trainable and running stats) in the fixed
    /// construction order.
    pub fn visit_params(&mut self, f: &mut dyn FnMut(&mut ParamTensor<T>)) {
        self.init.visit_params(f);
        let d = self.cfg.depth_levels;
        for l in 0..d {
            self.enc[l].visit_params(f);
            if l + 1 < d {
                self.downs[l].visit_params(f);
            }
        }
        for l in (0..d.saturating_sub(1)).rev() {
            self.ups[l].visit_params(f);
        }
        self.final_conv.visit_params(f);
    }

    /// Number of trainable scalar parameters.
    pub fn trainable_parameters(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| {
            if p.trainable {
                n += p.values.len();
            }
        });
        n
    }

    /// Parameter names in traversal order, for format checks and tests.
    pub fn param_names(&mut self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_params(&mut |p| names.push(p.name.clone()));
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(arch: Arch) -> ModelConfig {
        ModelConfig { arch, depth_levels: 3, base_filters: 8, ..Default::default() }
    }

    fn ramp_input(dims: [usize; 4]) -> Tensor4<f32> {
        let n: usize = dims.iter().product();
        Tensor4::from_vec(dims, (0..n).map(|i| ((i * 29) % 83) as f32 / 83.0).collect()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { base_filters: 6, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { depth_levels: 0, ..Default::default() }.validate().is_err());
        assert!(
            Model::<f32>::build(&ModelConfig { base_filters: 10, ..Default::default() }, 7).is_err()
        );
    }

    #[test]
    fn canonical_shape_contract() {
        let mut model = Model::<f32>::build(&ModelConfig::default(), 7).unwrap();
        let x = ramp_input([1, 128, 128, 1]);
        let y = model.forward(&x, Mode::Infer).unwrap();
        assert_eq!(y.dims(), [1, 128, 128, 1]);
    }

    #[test]
    fn dense_channel_law_and_growth_rate() {
        let mut rng = crate::rng::stream(7, crate::rng::Purpose::Init, 0, 0);
        let b = DenseBlock::<f32>::new("t", 32, 0.99, 0.001, &mut rng);
        assert_eq!(b.k, 8);
        assert_eq!(b.out_channels(), 64);
        let b2 = DenseBlock::<f32>::new("t2", 64, 0.99, 0.001, &mut rng);
        assert_eq!(b2.k, 16);
        assert_eq!(b2.out_channels(), 128);

        // Spatial dims preserved.
        let x = Tensor4::<f32>::zeros([1, 32, 32, 32]);
        let y = b.infer(&x);
        assert_eq!(y.dims(), [1, 32, 32, 64]);
    }

    #[test]
    fn down_block_halves_spatial_and_keeps_channels() {
        let mut rng = crate::rng::stream(7, crate::rng::Purpose::Init, 0, 0);
        let d = DownBlock::<f32>::new("t", 8, 0.99, 0.001, &mut rng);
        let x = Tensor4::<f32>::zeros([2, 128, 128, 8]);
        let y = d.infer(&x);
        assert_eq!(y.dims(), [2, 64, 64, 8]);
    }

    #[test]
    fn bottleneck_sits_at_three_halvings_for_depth_four() {
        // 128 → 64 → 32 → 16 across the three down blocks; the level-4 dense
        // block then processes the 16×16 grid.
        let cfg = ModelConfig { base_filters: 4, ..Default::default() };
        assert_eq!(cfg.spatial_divisor(), 8);
        let model = Model::<f32>::build(&cfg, 7).unwrap();
        let x = ramp_input([1, 128, 128, 1]);
        let bottleneck_in = {
            let mut cur = model.init.infer(&x);
            for l in 0..3 {
                let s = model.enc[l].infer(&cur);
                cur = model.downs[l].infer(&s);
            }
            cur
        };
        assert_eq!([bottleneck_in.dims()[1], bottleneck_in.dims()[2]], [16, 16]);
        let y = model.infer(&x).unwrap();
        assert_eq!(y.dims(), [1, 128, 128, 1]);
    }

    #[test]
    fn indivisible_input_is_a_shape_error() {
        let mut model = Model::<f32>::build(&tiny_cfg(Arch::FdUnet), 7).unwrap();
        let x = Tensor4::<f32>::zeros([1, 30, 32, 1]);
        assert!(model.forward(&x, Mode::Infer).is_err());
        let ok = Tensor4::<f32>::zeros([1, 32, 32, 1]);
        assert!(model.forward(&ok, Mode::Infer).is_ok());
    }

    #[test]
    fn infer_is_bit_stable_across_calls() {
        let model = Model::<f32>::build(&tiny_cfg(Arch::FdUnet), 7).unwrap();
        let x = ramp_input([1, 16, 16, 1]);
        let a = model.infer(&x).unwrap();
        let b = model.infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn parallel_and_sequential_inference_agree() {
        let model = Model::<f32>::build(&tiny_cfg(Arch::FdUnet), 7).unwrap();
        let x = ramp_input([2, 32, 32, 1]);
        let was = crate::exec::set_parallel(true);
        let a = model.infer(&x).unwrap();
        crate::exec::set_parallel(false);
        let b = model.infer(&x).unwrap();
        crate::exec::set_parallel(was);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn variants_share_traversal_and_differ_in_size() {
        let mut fd = Model::<f32>::build(&tiny_cfg(Arch::FdUnet), 7).unwrap();
        let mut un = Model::<f32>::build(&tiny_cfg(Arch::Unet), 7).unwrap();
        let fd_params = fd.trainable_parameters();
        let un_params = un.trainable_parameters();
        // Dense connectivity reuses features, so the fully dense variant is
        // the smaller network at equal depth and base width.
        assert!(fd_params < un_params, "fd {fd_params} vs unet {un_params}");
        assert!(fd_params > 10_000);

        let names = fd.param_names();
        assert_eq!(names.len(), names.iter().collect::<std::collections::HashSet<_>>().len());
    }

    #[test]
    fn unet_variant_runs_end_to_end() {
        let mut model = Model::<f32>::build(&tiny_cfg(Arch::Unet), 7).unwrap();
        let x = ramp_input([1, 32, 32, 1]);
        let y = model.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.dims(), [1, 32, 32, 1]);
        let dy = Tensor4::from_vec([1, 32, 32, 1], vec![1.0; 1024]).unwrap();
        model.backward(&dy).unwrap();
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut model = Model::<f32>::build(&tiny_cfg(Arch::FdUnet), 7).unwrap();
        let x = ramp_input([1, 16, 16, 1]);
        model.forward(&x, Mode::Train).unwrap();
        model.zero_grads();
        let dy = Tensor4::<f32>::zeros([1, 16, 16, 1]);
        model.backward(&dy).unwrap();
        model.visit_params(&mut |p| {
            if p.trainable {
                assert!(p.grads.iter().all(|&g| g == 0.0), "{} has nonzero grad", p.name);
            }
        });
    }
}
