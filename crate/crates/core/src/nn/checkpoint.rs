//! `PAMCKPT1` checkpoint files.
//!
//! Layout: 8-byte magic `PAMCKPT1`, little-endian u32 format version, the
//! serialized model config (arch tag u8, depth u32, base u32, bn momentum
//! f32, bn epsilon f32), a u32 record count, then one record per parameter
//! tensor in traversal order: u32 name length, name bytes, u32 dim count,
//! u32 dims, and the little-endian f32 payload. A saved-then-loaded f32
//! model produces bit-identical inference outputs.

use std::fs;
use std::path::Path;

use super::{Arch, Model, ModelConfig, Scalar};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PAMCKPT1";
const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint<T: Scalar>(model: &mut Model<T>, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let cfg = *model.config();
    out.push(match cfg.arch {
        Arch::FdUnet => 0u8,
        Arch::Unet => 1u8,
    });
    out.extend_from_slice(&(cfg.depth_levels as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.base_filters as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.bn_momentum as f32).to_le_bytes());
    out.extend_from_slice(&(cfg.bn_epsilon as f32).to_le_bytes());

    let mut count = 0u32;
    model.visit_params(&mut |_| count += 1);
    out.extend_from_slice(&count.to_le_bytes());

    model.visit_params(&mut |p| {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.dims.len() as u32).to_le_bytes());
        for &d in &p.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &p.values {
            out.extend_from_slice(&(Scalar::to_f64(v) as f32).to_le_bytes());
        }
    });
    fs::write(path, out).map_err(Error::Io)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format("checkpoint truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format(format!(
            "{} does not start with the PAMCKPT1 magic",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let arch = match r.take(1)?[0] {
        0 => Arch::FdUnet,
        1 => Arch::Unet,
        other => return Err(Error::format(format!("unknown architecture tag {other}"))),
    };
    let depth_levels = r.u32()? as usize;
    let base_filters = r.u32()? as usize;
    let bn_momentum = r.f32()? as f64;
    let bn_epsilon = r.f32()? as f64;
    let cfg = ModelConfig { arch, depth_levels, base_filters, bn_momentum, bn_epsilon };
    cfg.validate()?;

    let count = r.u32()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::format("parameter name is not UTF-8"))?;
        let dim_count = r.u32()? as usize;
        let mut dims = Vec::with_capacity(dim_count);
        for _ in 0..dim_count {
            dims.push(r.u32()? as usize);
        }
        let len: usize = dims.iter().product();
        let payload = r.take(len * 4)?;
        let values: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((name, dims, values));
    }
    if r.pos != bytes.len() {
        return Err(Error::format("trailing bytes after the last checkpoint record"));
    }

    // Weights are overwritten below, so the build seed is irrelevant.
    let mut model = Model::<f32>::build(&cfg, 0)?;
    let mut idx = 0usize;
    let mut mismatch: Option<String> = None;
    model.visit_params(&mut |p| {
        if mismatch.is_some() {
            return;
        }
        match records.get(idx) {
            None => mismatch = Some("checkpoint holds fewer records than the model".into()),
            Some((name, dims, values)) => {
                if name != &p.name || dims != &p.dims {
                    mismatch = Some(format!(
                        "record {idx} is {name} {dims:?}, expected {} {:?}",
                        p.name, p.dims
                    ));
                } else {
                    p.values.copy_from_slice(values);
                }
            }
        }
        idx += 1;
    });
    if let Some(m) = mismatch {
        return Err(Error::format(m));
    }
    if idx != records.len() {
        return Err(Error::format("checkpoint holds more records than the model"));
    }
    Ok(model)
}
