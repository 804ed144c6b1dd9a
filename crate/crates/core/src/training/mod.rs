//! The training protocol: batched Adam optimization of the weighted
//! pixel/Fourier loss over augmented sparse-to-full crop pairs, per-epoch
//! validation, and best-checkpoint selection by the saving metric.

mod adam;
pub mod loss;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use loss::{loss_fmae, loss_fmae_grad, loss_mae, loss_mae_grad, loss_total, loss_total_grad};

use rand::seq::SliceRandom;

use crate::augment::{augment_sample, center_crop, random_crop, AugmentConfig};
use crate::img::{compute_metrics, metrics_summary, pad_to_multiple, Image, MetricsReport};
use crate::nn::{Mode, Model, Tensor4};
use crate::rng::{stream, Purpose};
use crate::sampling::{downsample, zero_fill, DownsamplingRatio};
use crate::{exec, Error, Result};

/// Training hyperparameters. Defaults follow the protocol: batch 16,
/// 500 epochs, Adam at lr 0.001 / β1 0.9 / β2 0.999 / ε 1e-7, loss weights
/// λ1 = 1.0 and λ2 = 0.01, 10 crops per image, and an 80/10/10 split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ratio: DownsamplingRatio,
    pub crops_per_image: usize,
    pub split: (f64, f64, f64),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 500,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-7,
            lambda1: 1.0,
            lambda2: 0.01,
            ratio: DownsamplingRatio { sx: 5, sy: 1 },
            crops_per_image: 10,
            split: (0.8, 0.1, 0.1),
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn adam_hyper(&self) -> AdamHyper {
        AdamHyper { lr: self.lr, beta1: self.beta1, beta2: self.beta2, epsilon: self.adam_epsilon }
    }
}

/// Checkpoint-selection score: `(1 - SSIM) + (40 - PSNR)/275`, lower is
/// better. An infinite PSNR clamps its term to 0 via the empirical limit
/// of 40 dB; finite PSNR above 40 is allowed to push the term negative.
pub fn saving_metric(ssim: f64, psnr: f64) -> f64 {
    let psnr_term = if psnr.is_infinite() { 0.0 } else { (40.0 - psnr) / 275.0 };
    (1.0 - ssim) + psnr_term
}

/// Deterministic shuffled split. Training and test sizes round down and
/// validation absorbs the remainder, which reproduces the published
/// 233/30/29 partition of 292 items at (0.8, 0.1, 0.1).
pub fn split_dataset<V: Clone>(
    items: &[V],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<V>, Vec<V>, Vec<V>)> {
    if items.is_empty() {
        return Err(Error::invalid("cannot split an empty manifest"));
    }
    let (ft, fv, fs) = fractions;
    if ft < 0.0 || fv < 0.0 || fs < 0.0 || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Split, 0, 0));
    // Nudge against f64 representation of fractions like 0.7 before flooring.
    let n_train = ((ft * n as f64) + 1e-9).floor() as usize;
    let n_test = ((fs * n as f64) + 1e-9).floor() as usize;
    let n_val = n - n_train - n_test;
    let take = |r: std::ops::Range<usize>| r.map(|i| items[order[i]].clone()).collect::<Vec<V>>();
    Ok((
        take(0..n_train),
        take(n_train..n_train + n_val),
        take(n_train + n_val..n),
    ))
}

/// Best-so-far snapshot selected by the saving metric.
#[derive(Clone)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub epoch: usize,
    pub metrics: MetricsReport,
    pub saving_metric: f64,
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
    pub saving_metric: f64,
}

impl EpochRecord {
    /// Comma-separated record: epoch, train_loss, val_psnr, val_ssim,
    /// saving_metric.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.8},{:.6},{:.6},{:.8}",
            self.epoch, self.train_loss, self.val_psnr, self.val_ssim, self.saving_metric
        )
    }
}

pub struct FitOutcome {
    pub best: Checkpoint,
    pub log: Vec<EpochRecord>,
}

/// One training pair: the network input is the zero-filled decimation of
/// the augmented fully-sampled crop, keeping input and target aligned.
fn make_pair(
    img: &Image,
    acfg: &AugmentConfig,
    ratio: DownsamplingRatio,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Image, Image)> {
    let target = augment_sample(img, acfg, rng)?;
    let input = zero_fill(&downsample(&target, ratio));
    Ok((input, target))
}

fn stack_batch(pairs: &[(Image, Image)]) -> (Tensor4<f32>, Tensor4<f32>) {
    let (h, w) = (pairs[0].0.height(), pairs[0].0.width());
    let b = pairs.len();
    let mut input = Tensor4::zeros([b, h, w, 1]);
    let mut target = Tensor4::zeros([b, h, w, 1]);
    let elem = h * w;
    for (i, (x, y)) in pairs.iter().enumerate() {
        input.data_mut()[i * elem..(i + 1) * elem].copy_from_slice(x.data());
        target.data_mut()[i * elem..(i + 1) * elem].copy_from_slice(y.data());
    }
    (input, target)
}

/// Mean validation metrics: per image, the center crop plus
/// `crops_per_image` random crops drawn from a fixed per-image stream, so
/// scores are comparable across epochs. Inputs are decimated and
/// zero-filled like training pairs; reconstructions are clipped to [0, 1]
/// before scoring.
pub fn evaluate_validation(
    model: &Model<f32>,
    val: &[Image],
    tcfg: &TrainConfig,
    acfg: &AugmentConfig,
) -> Result<MetricsReport> {
    let mut crops: Vec<Image> = Vec::new();
    for (i, img) in val.iter().enumerate() {
        let (padded, _) = pad_to_multiple(img, acfg.crop);
        crops.push(center_crop(&padded, acfg.crop)?);
        let mut rng = stream(tcfg.seed, Purpose::Validation, i as u64, 0);
        for _ in 0..tcfg.crops_per_image {
            crops.push(random_crop(&padded, acfg, &mut rng)?);
        }
    }
    let reports = exec::map_slice(&crops, |crop| {
        let input = zero_fill(&downsample(crop, tcfg.ratio));
        let out = model.infer(&Tensor4::from_image(&input))?;
        let recon = out.to_image(0)?.clipped();
        compute_metrics(crop, &recon)
    });
    let reports: Vec<MetricsReport> = reports.into_iter().collect::<Result<_>>()?;
    Ok(metrics_summary(&reports).0)
}

/// Runs the epoch loop: per epoch, every training image contributes
/// `crops_per_image` augmented samples, shuffled and batched (short final
/// batch kept); each batch takes one Adam step on the weighted loss. The
/// best checkpoint by validation saving metric is retained; a non-finite
/// loss aborts with a diagnostic.
pub fn fit(
    model: &mut Model<f32>,
    train: &[Image],
    val: &[Image],
    tcfg: &TrainConfig,
    acfg: &AugmentConfig,
) -> Result<FitOutcome> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if tcfg.batch_size == 0 || tcfg.crops_per_image == 0 {
        return Err(Error::invalid("batch_size and crops_per_image must be positive"));
    }
    let padded: Vec<Image> = train.iter().map(|i| pad_to_multiple(i, acfg.crop).0).collect();

    let mut adam = AdamState::new(model);
    let hyper = tcfg.adam_hyper();

    let init_metrics = evaluate_validation(model, val, tcfg, acfg)?;
    let mut best = Checkpoint {
        model: model.clone(),
        epoch: 0,
        metrics: init_metrics,
        saving_metric: saving_metric(init_metrics.ssim, init_metrics.psnr),
    };
    let mut log = Vec::with_capacity(tcfg.epochs);

    let mut step = 0usize;
    for epoch in 1..=tcfg.epochs {
        // (image, sample) pairs for this epoch, in a seeded shuffled order.
        let mut samples: Vec<usize> = (0..padded.len() * tcfg.crops_per_image).collect();
        samples.shuffle(&mut stream(tcfg.seed, Purpose::Epoch, epoch as u64, 0));

        let mut epoch_loss = 0.0f64;
        let mut epoch_count = 0usize;
        for batch_ids in samples.chunks(tcfg.batch_size) {
            let pairs = exec::map_slice(batch_ids, |&sid| {
                let img = &padded[sid / tcfg.crops_per_image];
                let mut rng = stream(tcfg.seed, Purpose::Augment, epoch as u64, sid as u64);
                make_pair(img, acfg, tcfg.ratio, &mut rng)
            });
            let pairs: Vec<(Image, Image)> = pairs.into_iter().collect::<Result<_>>()?;
            let (input, target) = stack_batch(&pairs);

            let out = model.forward(&input, Mode::Train)?;
            let (loss, grad) = loss_total_grad(&target, &out, tcfg.lambda1, tcfg.lambda2)?;
            step += 1;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, step, loss });
            }
            model.zero_grads();
            model.backward(&grad)?;
            adam_step(model, &mut adam, &hyper);
            epoch_loss += loss * batch_ids.len() as f64;
            epoch_count += batch_ids.len();
        }

        let metrics = evaluate_validation(model, val, tcfg, acfg)?;
        let sm = saving_metric(metrics.ssim, metrics.psnr);
        if sm < best.saving_metric {
            best = Checkpoint { model: model.clone(), epoch, metrics, saving_metric: sm };
        }
        log.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / epoch_count as f64,
            val_psnr: metrics.psnr,
            val_ssim: metrics.ssim,
            saving_metric: sm,
        });
    }

    Ok(FitOutcome { best, log })
}
