//! Binary weight-bundle format used for checkpoints and golden tests.
//!
//! Layout, all little-endian: magic `FSNW`, version u32, layer count u32,
//! then per layer rows u32, cols u32, row-major f64 weights, f64 biases
//! (one per column). The activation is not stored; the reader supplies it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Activation, DenseLayer, ModelWeights};

const MAGIC: &[u8; 4] = b"FSNW";
const VERSION: u32 = 1;

/// Serialize a model into a weight bundle.
pub fn to_bytes(model: &ModelWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + model.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        out.extend_from_slice(&(layer.weight.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weight.cols() as u32).to_le_bytes());
        for v in layer.weight.entries() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for b in &layer.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

/// Deserialize a weight bundle produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8], activation: Activation) -> Result<ModelWeights> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.take(4)?;
    if magic != MAGIC {
        return Err(Error::WeightBundle(format!(
            "bad magic {:?}, expected {:?}",
            &magic[..4.min(magic.len())],
            MAGIC
        )));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::WeightBundle(format!(
            "unsupported bundle version {version}"
        )));
    }
    let layer_count = cursor.u32()? as usize;
    if layer_count < 2 {
        return Err(Error::WeightBundle(format!(
            "bundle holds {layer_count} layers, models need at least 2"
        )));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rows = cursor.u32()? as usize;
        let cols = cursor.u32()? as usize;
        let mut entries = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            entries.push(cursor.f64()?);
        }
        let weight = Matrix::from_vec(rows, cols, entries)?;
        let mut bias = Vec::with_capacity(cols);
        for _ in 0..cols {
            bias.push(cursor.f64()?);
        }
        layers.push(DenseLayer { weight, bias });
    }
    if cursor.pos != bytes.len() {
        return Err(Error::WeightBundle(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - cursor.pos
        )));
    }
    ModelWeights::new(layers, activation)
}

/// Write a bundle to disk.
pub fn save(model: &ModelWeights, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

/// Read a bundle from disk.
pub fn load(path: &Path, activation: Activation) -> Result<ModelWeights> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes, activation)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::WeightBundle(format!(
                "truncated bundle: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}
