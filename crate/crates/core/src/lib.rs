//! Reconstruction of undersampled raster-scanned microscopy images.
//!
//! A raster-scanned microscope trades acquisition time for pixel count: skipping
//! every Sx-th column and Sy-th row of the scan grid speeds imaging up by roughly
//! Sx·Sy at the cost of image quality. This crate restores such undersampled
//! images with a fully dense encoder-decoder network trained on sparse-to-full
//! image pairs:
//!
//! - [`img`] — the image type, preprocessing, and PSNR/SSIM/MAE/MSE metrics
//! - [`sampling`] — raster decimation, zero-fill restoration, bicubic baseline
//! - [`augment`] — seeded crop / affine / noise training augmentation
//! - [`nn`] — a small reverse-mode-differentiable layer engine and the
//!   fully dense U-net built from it
//! - [`training`] — pixel + Fourier-magnitude losses, Adam, the epoch loop,
//!   and checkpoint selection
//! - [`patchwork`] — three-pass tiled inference for arbitrary-size images
//! - [`dataset`] — synthetic vessel phantoms, manifests, and corpus ingestion
//!
//! All randomness flows from a single root seed expanded into per-purpose
//! streams ([`rng`]), so every pipeline stage is reproducible bit-for-bit.
//! Data-parallel inner loops run on rayon when the `parallel` feature
//! (default) is enabled and fall back to plain sequential iteration otherwise;
//! both paths produce identical results.

pub mod augment;
//pub mod dataset;
mod error;
pub mod exec;
pub mod img;
pub mod nn;
//pub mod patchwork;
pub mod rng;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use img::{CropRecord, Image, MetricsReport};
pub use sampling::{DownsamplingRatio, SampledImage};
