//! Binary network-weights files.
//!
//! Layout: magic `PWNF`, then a 32-bit little-endian layer count, then per
//! layer: 32-bit rows, 32-bit cols, rows×cols 32-bit reals row-major, and
//! rows 32-bit bias reals. Values are stored exactly as held in memory, so
//! write → read is byte- and bit-identical.
//!
//! Readers and the constructor both validate layer shapes against the
//! feature network's layer plan; a file for any other architecture is
//! rejected with a shape error.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::LAYER_PLAN;

const MAGIC: [u8; 4] = *b"PWNF";

/// One layer: a `rows × cols` matrix plus a bias vector of length `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightLayer {
    rows: usize,
    cols: usize,
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl WeightLayer {
    /// `weights` is row-major with `rows * cols` entries; everything must
    /// be finite.
    pub fn new(rows: usize, cols: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::invalid(
                "weights",
                format!("{} entries for a {rows}x{cols} matrix", weights.len()),
            ));
        }
        if bias.len() != rows {
            return Err(Error::invalid(
                "bias",
                format!("{} entries for {rows} rows", bias.len()),
            ));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("weights", "entries must be finite"));
        }
        Ok(WeightLayer { rows, cols, weights, bias })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major matrix entries.
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }
}

/// A full set of network weights matching the feature network's plan.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsFile {
    layers: Vec<WeightLayer>,
}

impl WeightsFile {
    /// Validates the layers against the expected plan.
    pub fn new(layers: Vec<WeightLayer>) -> Result<Self> {
        let found: Vec<(usize, usize)> = layers.iter().map(|l| (l.rows, l.cols)).collect();
        if found != LAYER_PLAN {
            return Err(Error::ShapeMismatch {
                subject: "network layers".into(),
                expected: format!("{LAYER_PLAN:?}"),
                found: format!("{found:?}"),
            });
        }
        Ok(WeightsFile { layers })
    }

    pub fn layers(&self) -> &[WeightLayer] {
        &self.layers
    }
}

/// Serializes weights to the binary layout.
pub(crate) fn render_weights(w: &WeightsFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(w.layers.len() as u32).to_le_bytes());
    for layer in &w.layers {
        out.extend_from_slice(&(layer.rows as u32).to_le_bytes());
        out.extend_from_slice(&(layer.cols as u32).to_le_bytes());
        for v in &layer.weights {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &layer.bias {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Writes weights to disk.
pub fn write_weights(w: &WeightsFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_weights(w)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    data: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, expected: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.offset < n {
            return Err(Error::Truncated {
                offset: self.offset,
                expected: format!("{n} bytes for {expected}"),
            });
        }
        let slice = &self.data[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u32(&mut self, expected: &str) -> Result<u32> {
        let b = self.take(4, expected)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32_vec(&mut self, n: usize, expected: &str) -> Result<Vec<f32>> {
        let b = self.take(n.checked_mul(4).ok_or_else(|| Error::Truncated {
            offset: self.offset,
            expected: format!("a sane length for {expected}"),
        })?, expected)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses in-memory weight bytes.
pub(crate) fn parse_weights(bytes: &[u8]) -> Result<WeightsFile> {
    let mut r = Reader { data: bytes, offset: 0 };
    let magic = r.take(4, "the magic header")?;
    if magic != MAGIC {
        return Err(Error::UnsupportedFormat(format!(
            "bad magic {magic:?}; not a weights file"
        )));
    }
    let layer_count = r.u32("the layer count")? as usize;
    if layer_count != LAYER_PLAN.len() {
        return Err(Error::ShapeMismatch {
            subject: "network layers".into(),
            expected: format!("{} layers", LAYER_PLAN.len()),
            found: format!("{layer_count} layers"),
        });
    }
    let mut layers = Vec::with_capacity(layer_count);
    for (i, &(want_rows, want_cols)) in LAYER_PLAN.iter().enumerate() {
        let rows = r.u32("layer rows")? as usize;
        let cols = r.u32("layer cols")? as usize;
        if (rows, cols) != (want_rows, want_cols) {
            return Err(Error::ShapeMismatch {
                subject: format!("layer {i}"),
                expected: format!("{want_rows}x{want_cols}"),
                found: format!("{rows}x{cols}"),
            });
        }
        let weights = r.f32_vec(rows * cols, "layer weights")?;
        let bias = r.f32_vec(rows, "layer bias")?;
        layers.push(WeightLayer::new(rows, cols, weights, bias)?);
    }
    WeightsFile::new(layers)
}

/// Reads weights from disk, validating shape against the layer plan.
pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightsFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_weights(&bytes)
}
