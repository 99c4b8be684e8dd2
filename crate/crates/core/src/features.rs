//! Block partitioning and the forward-only point feature network.
//!
//! A room cloud is tiled into square horizontal blocks, each resampled to
//! a fixed point count. Every block runs through a shared per-point
//! affine stack (widths 64, 64, 64, 128, 1024), a columnwise max-pool to
//! one global vector, and a fully connected head (1024 → 512 → 128). Each
//! feature row is the point's 1024-wide local vector joined with the
//! block's 128-wide global vector.
//!
//! The per-point stack is applied row by row, so permuting a block's rows
//! permutes the local features identically and leaves the pooled global
//! vector bit-for-bit unchanged.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io::{WeightLayer, WeightsFile};

/// Layer shapes (rows = outputs, cols = inputs): five pointwise layers,
/// then two fully connected layers applied to the pooled global vector.
pub const LAYER_PLAN: [(usize, usize); 7] = [
    (64, 3),
    (64, 64),
    (64, 64),
    (128, 64),
    (1024, 128),
    (512, 1024),
    (128, 512),
];

/// Width of the per-point feature vector.
pub const LOCAL_WIDTH: usize = 1024;
/// Width of the global head vector.
pub const HEAD_WIDTH: usize = 128;
/// Feature row width without raw coordinates.
pub const FEATURE_WIDTH: usize = LOCAL_WIDTH + HEAD_WIDTH;

// ── block partitioning ──────────────────────────────────────────────────

/// Settings for [`partition_blocks`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockConfig {
    /// Horizontal cell side length, meters.
    pub block_size: f64,
    /// Every block is resampled to exactly this many points.
    pub points_per_block: usize,
    /// Cells holding fewer points than this are dropped.
    pub min_points: usize,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            block_size: 1.0,
            points_per_block: 4096,
            min_points: 100,
            seed: 0,
        }
    }
}

impl BlockConfig {
    fn validate(&self) -> Result<()> {
        if !self.block_size.is_finite() || self.block_size <= 0.0 {
            return Err(Error::invalid(
                "block_size",
                format!("must be positive, got {}", self.block_size),
            ));
        }
        if self.points_per_block < 1 {
            return Err(Error::invalid("points_per_block", "must be at least 1"));
        }
        Ok(())
    }
}

/// One resampled block of a room cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    indices: Vec<usize>,
    coords: Array2<f64>,
    origin: [f64; 3],
}

impl Block {
    /// Source cloud indices, one per matrix row. Repeats appear when the
    /// cell held fewer points than the target count.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// n×3 coordinates, centered: row r is `cloud[indices[r]] - origin`.
    pub fn coords(&self) -> &Array2<f64> {
        &self.coords
    }

    /// Cell center (x, y) at the room's floor altitude (z).
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Tiles the cloud's horizontal footprint into `block_size` cells and
/// resamples each surviving cell to exactly `points_per_block` points.
///
/// Cells are `ceil(extent / block_size)` per axis (at least one), points
/// assigned by floor division with the top edge clamped into the last
/// cell. Over-full cells are sampled uniformly without replacement,
/// under-full cells uniformly with replacement; each cell draws from its
/// own RNG stream `(seed, linear cell index)`, so dropping or adding a
/// cell leaves the others' samples untouched. Blocks are returned in
/// linear cell order with ascending-sorted indices.
pub fn partition_blocks(room: &PointCloud, config: &BlockConfig) -> Result<Vec<Block>> {
    config.validate()?;
    let bbox = room.bounding_box()?;
    let bs = config.block_size;
    let cells_along = |extent: f64| ((extent / bs).ceil() as usize).max(1);
    let nx = cells_along(bbox.max.x - bbox.min.x);
    let ny = cells_along(bbox.max.y - bbox.min.y);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
    for (i, p) in room.points().iter().enumerate() {
        let cx = (((p.x - bbox.min.x) / bs).floor() as usize).min(nx - 1);
        let cy = (((p.y - bbox.min.y) / bs).floor() as usize).min(ny - 1);
        members[cy * nx + cx].push(i);
    }
    let n = config.points_per_block;
    let mut blocks = Vec::new();
    for (cell, indices) in members.into_iter().enumerate() {
        if indices.len() < config.min_points.max(1) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(cell as u64);
        let mut chosen: Vec<usize> = if indices.len() == n {
            indices
        } else if indices.len() > n {
            rand::seq::index::sample(&mut rng, indices.len(), n)
                .iter()
                .map(|pos| indices[pos])
                .collect()
        } else {
            (0..n).map(|_| indices[rng.gen_range(0..indices.len())]).collect()
        };
        chosen.sort_unstable();
        let (cx, cy) = (cell % nx, cell / nx);
        let origin = [
            bbox.min.x + (cx as f64 + 0.5) * bs,
            bbox.min.y + (cy as f64 + 0.5) * bs,
            bbox.min.z,
        ];
        let mut coords = Array2::zeros((n, 3));
        for (r, &i) in chosen.iter().enumerate() {
            let p = room.points()[i];
            coords[[r, 0]] = p.x - origin[0];
            coords[[r, 1]] = p.y - origin[1];
            coords[[r, 2]] = p.z - origin[2];
        }
        blocks.push(Block { indices: chosen, coords, origin });
    }
    Ok(blocks)
}

// ── network weights ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer {
    rows: usize,
    cols: usize,
    w: Vec<f64>, // row-major
    b: Vec<f64>,
}

impl DenseLayer {
    /// `out[r] = b[r] + Σ_c w[r,c]·input[c]`, accumulated left to right.
    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.b[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// The seven layers of the feature network, shapes fixed to [`LAYER_PLAN`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    layers: Vec<DenseLayer>,
}

impl NetworkWeights {
    /// Converts a validated weights file; lossless (f32 widens to f64).
    pub fn from_weights_file(file: &WeightsFile) -> NetworkWeights {
        let layers = file
            .layers()
            .iter()
            .map(|l| DenseLayer {
                rows: l.rows(),
                cols: l.cols(),
                w: l.weights().iter().map(|&v| v as f64).collect(),
                b: l.bias().iter().map(|&v| v as f64).collect(),
            })
            .collect();
        NetworkWeights { layers }
    }

    /// Narrows to the storage format's f32 entries.
    pub fn to_weights_file(&self) -> Result<WeightsFile> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                WeightLayer::new(
                    l.rows,
                    l.cols,
                    l.w.iter().map(|&v| v as f32).collect(),
                    l.b.iter().map(|&v| v as f32).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        WeightsFile::new(layers)
    }
}

/// Seeded Glorot-uniform initialization: entries uniform in
/// ±√(6/(fan_in+fan_out)), biases zero, drawn layer by layer in row-major
/// order from one stream. Entries are rounded through f32 so that saving
/// and reloading reproduces them exactly.
pub fn init_weights(seed: u64) -> NetworkWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = LAYER_PLAN
        .iter()
        .map(|&(rows, cols)| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let w = (0..rows * cols)
                .map(|_| rng.gen_range(-limit..limit) as f32 as f64)
                .collect();
            DenseLayer { rows, cols, w, b: vec![0.0; rows] }
        })
        .collect();
    NetworkWeights { layers }
}

// ── forward pass ────────────────────────────────────────────────────────

/// Runs the five pointwise layers on an n×3 matrix, giving n×1024.
///
/// ReLU follows each of the first four layers; the fifth emits raw
/// features. Rows are independent: row i of the output is a function of
/// row i of the input alone.
pub fn forward_pointwise(coords: &Array2<f64>, weights: &NetworkWeights) -> Result<Array2<f64>> {
    if coords.ncols() != 3 {
        return Err(Error::ShapeMismatch {
            subject: "pointwise input".into(),
            expected: "3 columns".into(),
            found: format!("{} columns", coords.ncols()),
        });
    }
    if coords.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let n = coords.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cur: Vec<f64> = coords.row(i).iter().copied().collect();
            let mut next = Vec::new();
            for (li, layer) in weights.layers[..5].iter().enumerate() {
                layer.apply(&cur, &mut next);
                if li < 4 {
                    for v in &mut next {
                        *v = v.max(0.0);
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            cur
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let out = Array2::from_shape_vec((n, LOCAL_WIDTH), flat)
        .expect("row width fixed by the layer plan");
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("coords", "forward pass produced non-finite values"));
    }
    Ok(out)
}

/// Columnwise maximum over all rows.
pub fn global_feature(local: &Array2<f64>) -> Result<Array1<f64>> {
    if local.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let mut out = local.row(0).to_owned();
    for row in local.rows().into_iter().skip(1) {
        for (o, &v) in out.iter_mut().zip(row) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Runs the two fully connected layers on a 1024-wide global vector,
/// giving 128 values. ReLU follows the first layer only.
pub fn fc_head(global: &Array1<f64>, weights: &NetworkWeights) -> Result<Array1<f64>> {
    if global.len() != LOCAL_WIDTH {
        return Err(Error::ShapeMismatch {
            subject: "fc input".into(),
            expected: format!("{LOCAL_WIDTH} values"),
            found: format!("{} values", global.len()),
        });
    }
    let mut cur: Vec<f64> = global.iter().copied().collect();
    let mut next = Vec::new();
    weights.layers[5].apply(&cur, &mut next);
    for v in &mut next {
        *v = v.max(0.0);
    }
    std::mem::swap(&mut cur, &mut next);
    weights.layers[6].apply(&cur, &mut next);
    Ok(Array1::from_vec(next))
}

/// Per-point features of a block with their source indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    features: Array2<f64>,
    indices: Vec<usize>,
}

impl FeatureMatrix {
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Source cloud index of each row.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn nrows(&self) -> usize {
        self.features.nrows()
    }

    /// Stacks several blocks' features into one matrix.
    pub fn stack(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let Some(first) = parts.first() else {
            return Err(Error::EmptyInput);
        };
        let width = first.features.ncols();
        let mut features = Vec::new();
        let mut indices = Vec::new();
        for part in parts {
            if part.features.ncols() != width {
                return Err(Error::ShapeMismatch {
                    subject: "feature widths".into(),
                    expected: format!("{width} columns"),
                    found: format!("{} columns", part.features.ncols()),
                });
            }
            features.extend(part.features.iter().copied());
            indices.extend_from_slice(&part.indices);
        }
        let rows = indices.len();
        Ok(FeatureMatrix {
            features: Array2::from_shape_vec((rows, width), features).expect("widths checked"),
            indices,
        })
    }
}

/// Joins each local row with the shared head vector: row i becomes
/// `[local[i] | head]`.
pub fn concat_features(
    local: &Array2<f64>,
    head: &Array1<f64>,
    indices: &[usize],
) -> Result<FeatureMatrix> {
    if indices.len() != local.nrows() {
        return Err(Error::ShapeMismatch {
            subject: "feature indices".into(),
            expected: format!("{} rows", local.nrows()),
            found: format!("{} indices", indices.len()),
        });
    }
    let (n, lw, hw) = (local.nrows(), local.ncols(), head.len());
    let mut out = Array2::zeros((n, lw + hw));
    for i in 0..n {
        for c in 0..lw {
            out[[i, c]] = local[[i, c]];
        }
        for c in 0..hw {
            out[[i, lw + c]] = head[c];
        }
    }
    Ok(FeatureMatrix { features: out, indices: indices.to_vec() })
}

/// Full feature pipeline for one block: pointwise stack, max-pool, FC
/// head, concatenation. With `include_coords` the three centered
/// coordinates are appended to each row (width 1155 instead of 1152).
pub fn extract_features(
    block: &Block,
    weights: &NetworkWeights,
    include_coords: bool,
) -> Result<FeatureMatrix> {
    let local = forward_pointwise(block.coords(), weights)?;
    let global = global_feature(&local)?;
    let head = fc_head(&global, weights)?;
    let base = concat_features(&local, &head, block.indices())?;
    if !include_coords {
        return Ok(base);
    }
    let n = base.nrows();
    let w = base.features.ncols();
    let mut out = Array2::zeros((n, w + 3));
    for i in 0..n {
        for c in 0..w {
            out[[i, c]] = base.features[[i, c]];
        }
        for c in 0..3 {
            out[[i, w + c]] = block.coords()[[i, c]];
        }
    }
    Ok(FeatureMatrix { features: out, indices: base.indices })
}

// ── feature scaling ─────────────────────────────────────────────────────

/// Scaling recipe applied before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerMode {
    /// Map each column's fitted range onto [0, 1].
    MinMax,
    /// Center to zero mean and unit population standard deviation.
    Standardize,
    /// MinMax first, then standardize the result.
    Both,
}

impl std::str::FromStr for ScalerMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "minmax" => Ok(ScalerMode::MinMax),
            "standardize" => Ok(ScalerMode::Standardize),
            "both" => Ok(ScalerMode::Both),
            other => Err(format!("unknown scaler mode `{other}` (minmax|standardize|both)")),
        }
    }
}

impl std::fmt::Display for ScalerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalerMode::MinMax => "minmax",
            ScalerMode::Standardize => "standardize",
            ScalerMode::Both => "both",
        })
    }
}

/// Fitted per-column statistics. A constant column (zero range or zero
/// deviation) always transforms to 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ScalerParams {
    MinMax {
        min: Vec<f64>,
        max: Vec<f64>,
    },
    Standardize {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    /// MinMax statistics of the raw data, then standardize statistics of
    /// the min-max-scaled data.
    Both {
        min: Vec<f64>,
        max: Vec<f64>,
        mean: Vec<f64>,
        std: Vec<f64>,
    },
}

impl ScalerParams {
    fn width(&self) -> usize {
        match self {
            ScalerParams::MinMax { min, .. } => min.len(),
            ScalerParams::Standardize { mean, .. } => mean.len(),
            ScalerParams::Both { min, .. } => min.len(),
        }
    }
}

fn column_min_max(features: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let w = features.ncols();
    let mut min = vec![f64::INFINITY; w];
    let mut max = vec![f64::NEG_INFINITY; w];
    for row in features.rows() {
        for (c, &v) in row.iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    (min, max)
}

fn column_mean_std(features: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, w) = (features.nrows() as f64, features.ncols());
    let mut mean = vec![0.0; w];
    for row in features.rows() {
        for (c, &v) in row.iter().enumerate() {
            mean[c] += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    // A bitwise-constant column gets its exact value as the mean, so
    // every deviation (and the resulting std) is exactly zero and the
    // column transforms to 0 instead of noise-scale residue.
    let (lo, hi) = column_min_max(features);
    for c in 0..w {
        if lo[c] == hi[c] {
            mean[c] = lo[c];
        }
    }
    let mut var = vec![0.0; w];
    for row in features.rows() {
        for (c, &v) in row.iter().enumerate() {
            let d = v - mean[c];
            var[c] += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    (mean, std)
}

fn apply_minmax(features: &mut Array2<f64>, min: &[f64], max: &[f64]) {
    for mut row in features.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            let range = max[c] - min[c];
            *v = if range == 0.0 { 0.0 } else { (*v - min[c]) / range };
        }
    }
}

fn apply_standardize(features: &mut Array2<f64>, mean: &[f64], std: &[f64]) {
    for mut row in features.rows_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = if std[c] == 0.0 { 0.0 } else { (*v - mean[c]) / std[c] };
        }
    }
}

/// Fits scaling statistics on the given rows only.
pub fn fit_scaler(features: &Array2<f64>, mode: ScalerMode) -> Result<ScalerParams> {
    if features.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(match mode {
        ScalerMode::MinMax => {
            let (min, max) = column_min_max(features);
            ScalerParams::MinMax { min, max }
        }
        ScalerMode::Standardize => {
            let (mean, std) = column_mean_std(features);
            ScalerParams::Standardize { mean, std }
        }
        ScalerMode::Both => {
            let (min, max) = column_min_max(features);
            let mut scaled = features.clone();
            apply_minmax(&mut scaled, &min, &max);
            let (mean, std) = column_mean_std(&scaled);
            ScalerParams::Both { min, max, mean, std }
        }
    })
}

/// Transforms rows with previously fitted statistics. Values outside the
/// fitted range are not clamped.
pub fn apply_scaler(features: &Array2<f64>, params: &ScalerParams) -> Result<Array2<f64>> {
    if features.ncols() != params.width() {
        return Err(Error::ShapeMismatch {
            subject: "scaler input".into(),
            expected: format!("{} columns", params.width()),
            found: format!("{} columns", features.ncols()),
        });
    }
    let mut out = features.clone();
    match params {
        ScalerParams::MinMax { min, max } => apply_minmax(&mut out, min, max),
        ScalerParams::Standardize { mean, std } => apply_standardize(&mut out, mean, std),
        ScalerParams::Both { min, max, mean, std } => {
            apply_minmax(&mut out, min, max);
            apply_standardize(&mut out, mean, std);
        }
    }
    Ok(out)
}
