//! Sliding-window patch extraction and the binary patch dataset format.
//!
//! ```text
//! "HPAT" | u32 version | u32 count | u32 size
//! count x { input f32[size*size] | target f32[size*size] }   (little-endian)
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::image::{Angiogram, IntensityScale};

pub const PATCH_MAGIC: [u8; 4] = *b"HPAT";
pub const PATCH_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_PATCH_SIZE: usize = 38;
pub const DEFAULT_STRIDE: usize = 19;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub size: usize,
    pub stride: usize,
    pub source_id: String,
    /// (input, target) pairs, each `size * size` row-major values.
    pub patches: Vec<(Vec<f32>, Vec<f32>)>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn extend(&mut self, other: PatchSet) -> Result<()> {
        if other.size != self.size {
            return Err(Error::invalid(format!(
                "cannot merge {}-pixel patches into a {}-pixel set",
                other.size, self.size
            )));
        }
        self.patches.extend(other.patches);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let per = self.size * self.size;
        let mut out = Vec::with_capacity(16 + self.len() * per * 8);
        out.extend_from_slice(&PATCH_MAGIC);
        for v in [PATCH_FORMAT_VERSION, self.len() as u32, self.size as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (a, b) in &self.patches {
            for v in a.iter().chain(b) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses the dataset format. Stride and source id are not stored and
    /// come back as 0 and empty.
    pub fn from_bytes(bytes: &[u8]) -> Result<PatchSet> {
        if bytes.len() < 16 {
            return Err(Error::Truncated("patch header"));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != PATCH_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != PATCH_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: PATCH_FORMAT_VERSION,
            });
        }
        let (count, size) = (word(8) as usize, word(12) as usize);
        let per = size * size;
        let expected = 16 + count * per * 8;
        if bytes.len() < expected {
            return Err(Error::Truncated("patch payload"));
        }
        if bytes.len() > expected {
            return Err(Error::invalid("patch file has trailing bytes"));
        }
        let floats: Vec<f32> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let patches = floats
            .chunks_exact(2 * per.max(1))
            .take(count)
            .map(|c| (c[..per].to_vec(), c[per..].to_vec()))
            .collect();
        Ok(PatchSet {
            size,
            stride: 0,
            source_id: String::new(),
            patches,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<PatchSet> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Window origins along one axis: 0, stride, 2*stride, ... plus one window
/// flush with the far edge when the regular ones stop short of it.
pub fn tile_origins(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    if dim < size || size == 0 || stride == 0 {
        return Vec::new();
    }
    let last = dim - size;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().expect("origin 0 present") != last {
        out.push(last);
    }
    out
}

pub fn extract_patches(input: &Angiogram, target: &Angiogram, size: usize, stride: usize) -> Result<PatchSet> {
    if size == 0 || stride == 0 || stride > size {
        return Err(Error::invalid(format!(
            "need 0 < stride <= size, got size {size} and stride {stride}"
        )));
    }
    if (input.height(), input.width()) != (target.height(), target.width()) {
        return Err(Error::ShapeMismatch {
            op: "extract_patches",
            left: vec![input.height(), input.width()],
            right: vec![target.height(), target.width()],
        });
    }
    if input.scale() != IntensityScale::Unit || target.scale() != IntensityScale::Unit {
        return Err(Error::invalid("patches are extracted from Unit-scale images"));
    }
    if input.height() < size || input.width() < size {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than the {size}x{size} patch",
            input.height(),
            input.width()
        )));
    }
    let w = input.width();
    let window = |img: &Angiogram, top: usize, left: usize| -> Vec<f32> {
        let px = img.pixels();
        (top..top + size).flat_map(|r| px[r * w + left..r * w + left + size].iter().copied()).collect()
    };
    let mut patches = Vec::new();
    for &top in &tile_origins(input.height(), size, stride) {
        for &left in &tile_origins(w, size, stride) {
            patches.push((window(input, top, left), window(target, top, left)));
        }
    }
    Ok(PatchSet {
        size,
        stride,
        source_id: input.id().to_string(),
        patches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(n: usize) -> Angiogram {
        let px = (0..n * n).map(|i| (i % 97) as f32 / 97.0).collect();
        Angiogram::new("p", n, n, px, IntensityScale::Unit, 3.0).unwrap()
    }

    #[test]
    fn tiling_counts() {
        let one = img(38);
        assert_eq!(extract_patches(&one, &one, 38, 19).unwrap().len(), 1);
        let i76 = img(76);
        assert_eq!(extract_patches(&i76, &i76, 38, 19).unwrap().len(), 9);
        assert_eq!(tile_origins(100, 38, 19), vec![0, 19, 38, 57, 62]);
        let i100 = img(100);
        assert_eq!(extract_patches(&i100, &i100, 38, 19).unwrap().len(), 25);
    }

    #[test]
    fn too_small() {
        let i = img(20);
        assert!(extract_patches(&i, &i, 38, 19).is_err());
    }

    #[test]
    fn patch_content_matches_window() {
        let i = img(40);
        let set = extract_patches(&i, &i, 38, 19).unwrap();
        // origins are 0 and 2 on both axes; second patch starts at column 2
        assert_eq!(set.patches[1].0[0], i.get(0, 2));
        assert_eq!(set.patches[3].0[38 * 37 + 37], i.get(39, 39));
    }

    #[test]
    fn bytes_round_trip() {
        let i = img(40);
        let set = extract_patches(&i, &i, 38, 19).unwrap();
        let back = PatchSet::from_bytes(&set.to_bytes()).unwrap();
        assert_eq!(back.patches, set.patches);
        assert_eq!(back.size, 38);
        let bytes = set.to_bytes();
        assert!(matches!(
            PatchSet::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated(_))
        ));
    }
}
