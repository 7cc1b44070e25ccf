//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "HARN" | u32 version
//! u32 low_level_channels | u32 block_count | u32 layers_per_block | u32 block_channels | u32 kernel
//! u32 epochs | f64 final_loss | u64 seed
//! u32 tensor_count
//! tensor_count x { u32 name_len | name | u32 rank | rank x u32 dim | f32 payload }
//! u32 crc32 (IEEE) of every preceding byte
//! ```

use std::path::Path;

use super::{ConvLayer, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"HARN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainingMeta {
    pub epochs: u32,
    pub final_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: TrainingMeta,
}

pub fn write_checkpoint(model: &Model, meta: &TrainingMeta) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    let s = model.spec();
    for v in [s.low_level_channels, s.block_count, s.layers_per_block, s.block_channels, s.kernel] {
        put_u32(&mut out, v as u32);
    }
    put_u32(&mut out, meta.epochs);
    out.extend_from_slice(&meta.final_loss.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());

    let tensors: Vec<(String, &Tensor<f32>)> = model
        .layers()
        .iter()
        .flat_map(|l| [(format!("{}.weight", l.name), &l.weight), (format!("{}.bias", l.name), &l.bias)])
        .collect();
    put_u32(&mut out, tensors.len() as u32);
    for (name, t) in tensors {
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            put_u32(&mut out, d as u32);
        }
        for v in t.data().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

pub fn save_checkpoint(model: &Model, meta: &TrainingMeta, path: &Path) -> Result<()> {
    write_atomic(path, &write_checkpoint(model, meta))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 4 {
        return Err(Error::Truncated("crc"));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));

    let mut spec_fields = [0usize; 5];
    for f in &mut spec_fields {
        *f = r.u32("spec")? as usize;
    }
    let spec = ModelSpec {
        low_level_channels: spec_fields[0],
        block_count: spec_fields[1],
        layers_per_block: spec_fields[2],
        block_channels: spec_fields[3],
        kernel: spec_fields[4],
    };
    spec.validate()?;
    let epochs = r.u32("metadata")?;
    let final_loss = f64::from_le_bytes(r.take(8, "metadata")?.try_into().expect("8 bytes"));
    let seed = u64::from_le_bytes(r.take(8, "metadata")?.try_into().expect("8 bytes"));

    let plan = spec.layer_plan();
    let count = r.u32("tensor count")? as usize;
    if count != plan.len() * 2 {
        return Err(Error::invalid(format!(
            "checkpoint holds {count} tensors, spec implies {}",
            plan.len() * 2
        )));
    }
    let mut layers = Vec::with_capacity(plan.len());
    for (name, out_ch, in_ch) in plan {
        let weight = read_tensor(&mut r, &format!("{name}.weight"), &[out_ch, in_ch, spec.kernel, spec.kernel])?;
        let bias = read_tensor(&mut r, &format!("{name}.bias"), &[out_ch])?;
        layers.push(ConvLayer { name, weight, bias });
    }
    if r.pos != body.len() {
        return Err(Error::invalid(format!(
            "checkpoint has {} unexpected trailing bytes",
            body.len().saturating_sub(r.pos)
        )));
    }
    let computed = crc32fast::hash(body);
    if computed != stored {
        return Err(Error::CrcMismatch { stored, computed });
    }
    Ok(Checkpoint {
        model: Model::from_layers(spec, layers)?,
        meta: TrainingMeta {
            epochs,
            final_loss,
            seed,
        },
    })
}

fn read_tensor(r: &mut Reader<'_>, expected_name: &str, expected_shape: &[usize]) -> Result<Tensor<f32>> {
    let name_len = r.u32("tensor name")? as usize;
    let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
        .map_err(|_| Error::invalid("tensor name is not UTF-8"))?;
    if name != expected_name {
        return Err(Error::invalid(format!("expected tensor `{expected_name}`, found `{name}`")));
    }
    let rank = r.u32("tensor rank")? as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u32("tensor dims")? as usize);
    }
    if shape != expected_shape {
        return Err(Error::ShapeMismatch {
            op: "checkpoint tensor",
            left: expected_shape.to_vec(),
            right: shape,
        });
    }
    let n: usize = shape.iter().product();
    let payload = r.take(n * 4, "tensor payload")?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Tensor::parameter(&shape, data)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        // the trailing CRC is never part of a field
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        if end + 4 > self.bytes.len() {
            return Err(Error::Truncated(what));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Model {
        Model::build(ModelSpec::new(4, 2, 2, 3), 11).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let meta = TrainingMeta {
            epochs: 3,
            final_loss: 0.125,
            seed: 11,
        };
        let bytes = write_checkpoint(&toy(), &meta);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(back.meta, meta);
        assert_eq!(write_checkpoint(&back.model, &back.meta), bytes);
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = write_checkpoint(&toy(), &TrainingMeta::default());
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = write_checkpoint(&toy(), &TrainingMeta::default());
        bytes[4] = 9;
        assert!(matches!(read_checkpoint(&bytes), Err(Error::UnsupportedVersion { found: 9, .. })));
    }

    #[test]
    fn truncated_file() {
        let bytes = write_checkpoint(&toy(), &TrainingMeta::default());
        assert!(matches!(read_checkpoint(&bytes[..bytes.len() / 2]), Err(Error::Truncated(_))));
    }

    #[test]
    fn flipped_payload_bit_fails_crc() {
        let model = toy();
        let mut bytes = write_checkpoint(&model, &TrainingMeta::default());
        let w0 = model.layers()[0].weight.to_vec()[0].to_le_bytes();
        let i = bytes.windows(4).position(|b| b == w0).unwrap();
        bytes[i] ^= 0x01;
        let r = read_checkpoint(&bytes);
        assert!(matches!(r, Err(Error::CrcMismatch { .. })), "{r:?}");
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let mut bytes = write_checkpoint(&toy(), &TrainingMeta::default());
        // block_channels field: magic(4) + version(4) + 3 spec fields
        bytes[8 + 12] = 5;
        let r = read_checkpoint(&bytes);
        assert!(matches!(r, Err(Error::ShapeMismatch { .. })), "{r:?}");
    }
}
