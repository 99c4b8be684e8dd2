//! Outlier removal.
//!
//! The primary method filters a cloud axis by axis: z-scores are computed
//! over the surviving points on one axis, points beyond a threshold are
//! dropped, and the next axis starts from scratch on what is left. The
//! threshold is either fixed or derived from a histogram of the scores:
//! the largest contiguous bin run around the mode whose counts stay above
//! a small fraction of the peak is considered signal, and the threshold is
//! the outermost edge of that run.
//!
//! Two classical neighborhood baselines are provided for comparison:
//! statistical removal (mean k-nearest-neighbor distance) and radius
//! removal (neighbor count within a ball).
//!
//! All three filters report the same [`CleaningOutcome`] shape: the kept
//! cloud, the index partition, and a [`CleaningReport`] with per-stage
//! removal counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{Axis, PointCloud};
use crate::error::{Error, Result};
use crate::grid::{auto_cell_size, NeighborIndex};

// ── histograms and z-scores ─────────────────────────────────────────────

/// Equal-width histogram over one axis' values.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisHistogram {
    axis: Axis,
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl AxisHistogram {
    /// Builds a histogram from explicit edges and counts.
    ///
    /// Edges must be strictly increasing with exactly one more entry than
    /// `counts`.
    pub fn from_parts(axis: Axis, edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || edges.len() != counts.len() + 1 {
            return Err(Error::invalid(
                "edges",
                format!(
                    "{} edges do not delimit {} bins",
                    edges.len(),
                    counts.len()
                ),
            ));
        }
        if edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::invalid("edges", "must be strictly increasing"));
        }
        Ok(AxisHistogram { axis, edges, counts })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Bin edges, ascending; one more than the bin count.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }
}

/// Histograms `values` into `bins` equal-width bins spanning [min, max].
///
/// Every bin is half-open on the right except the last, which also absorbs
/// the maximum value.
pub fn axis_histogram(axis: Axis, values: &[f64], bins: usize) -> Result<AxisHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins < 2 {
        return Err(Error::invalid("bins", "must be at least 2"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::DegenerateRange { value: min });
    }
    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| min + i as f64 * width).collect();
    edges.push(max);
    if edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        // The value range is too narrow to split into this many bins.
        return Err(Error::DegenerateRange { value: min });
    }
    let mut counts = vec![0u64; bins];
    for &v in values {
        let bin = (((v - min) / width) as usize).min(bins - 1);
        counts[bin] += 1;
    }
    Ok(AxisHistogram { axis, edges, counts })
}

/// Standard scores: `(x − μ)/σ` with the population standard deviation.
pub fn z_scores(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(values.iter().map(|v| (v - mean) / sigma).collect())
}

/// Derives a |z| cutoff from a histogram of z-scores.
///
/// The peak bin (lowest index on ties) anchors a contiguous run that grows
/// outward while bin counts stay at or above `cutoff_fraction` of the peak
/// count. The threshold is the largest-magnitude edge of that run. When
/// everything but the peak falls below the cutoff, this degrades to the
/// peak bin's far edge.
pub fn adaptive_threshold(hist: &AxisHistogram, cutoff_fraction: f64) -> Result<f64> {
    if !(cutoff_fraction > 0.0 && cutoff_fraction < 1.0) {
        return Err(Error::invalid(
            "cutoff_fraction",
            format!("must lie strictly between 0 and 1, got {cutoff_fraction}"),
        ));
    }
    if hist.bins() < 2 {
        return Err(Error::invalid("hist", "needs at least 2 bins"));
    }
    let counts = hist.counts();
    let peak = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    if counts[peak] == 0 {
        return Err(Error::invalid("hist", "all bins are empty"));
    }
    let cut = cutoff_fraction * counts[peak] as f64;
    let mut lo = peak;
    while lo > 0 && counts[lo - 1] as f64 >= cut {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < counts.len() && counts[hi + 1] as f64 >= cut {
        hi += 1;
    }
    let edges = hist.edges();
    Ok(edges[lo].abs().max(edges[hi + 1].abs()))
}

// ── filter configuration and reports ────────────────────────────────────

/// How the z-score filter picks its cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// A fixed |z| cutoff.
    Fixed(f64),
    /// Derived per stage from a histogram of the current z-scores.
    Adaptive { bins: usize, cutoff_fraction: f64 },
}

/// Configuration for [`zscore_axis_filter`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZScoreFilterConfig {
    /// Axes filtered in order; each stage recomputes scores on survivors.
    pub axes: Vec<Axis>,
    pub threshold: ThresholdMode,
}

impl Default for ZScoreFilterConfig {
    fn default() -> Self {
        // Vertical structure (floors, ceilings) makes the Z axis a poor
        // outlier signal, so it is not filtered unless asked for.
        ZScoreFilterConfig {
            axes: vec![Axis::X, Axis::Y],
            threshold: ThresholdMode::Adaptive {
                bins: 256,
                cutoff_fraction: 0.001,
            },
        }
    }
}

impl ZScoreFilterConfig {
    pub fn with_fixed_threshold(t: f64) -> Self {
        ZScoreFilterConfig {
            threshold: ThresholdMode::Fixed(t),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::invalid("axes", "need at least one axis"));
        }
        match self.threshold {
            ThresholdMode::Fixed(t) => {
                if !t.is_finite() || t <= 0.0 {
                    return Err(Error::invalid(
                        "threshold",
                        format!("fixed threshold must be positive and finite, got {t}"),
                    ));
                }
            }
            ThresholdMode::Adaptive { bins, cutoff_fraction } => {
                if bins < 2 {
                    return Err(Error::invalid("bins", "must be at least 2"));
                }
                if !(cutoff_fraction > 0.0 && cutoff_fraction < 1.0) {
                    return Err(Error::invalid(
                        "cutoff_fraction",
                        "must lie strictly between 0 and 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One filtration stage's outcome within a [`CleaningReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    /// Axis name for z-score stages, method name for the baselines.
    pub stage: String,
    /// The decision threshold applied, if the stage ran.
    pub threshold: Option<f64>,
    pub removed: usize,
    /// True when the stage could not discriminate (zero variance) and was
    /// skipped without removing anything.
    pub skipped: bool,
}

/// Summary of one cleaning run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleaningReport {
    pub method: String,
    pub total_points: usize,
    pub removed_points: usize,
    pub cleaning_portion_percent: f64,
    pub stages: Vec<StageReport>,
}

impl CleaningReport {
    pub fn new(
        method: impl Into<String>,
        total_points: usize,
        removed_points: usize,
        stages: Vec<StageReport>,
    ) -> Result<Self> {
        if total_points == 0 {
            return Err(Error::EmptyInput);
        }
        if removed_points > total_points {
            return Err(Error::invalid(
                "removed_points",
                format!("{removed_points} exceeds total {total_points}"),
            ));
        }
        Ok(CleaningReport {
            method: method.into(),
            total_points,
            removed_points,
            cleaning_portion_percent: removed_points as f64 / total_points as f64 * 100.0,
            stages,
        })
    }
}

/// Result of any cleaning method: the kept cloud plus the index partition.
///
/// `kept_indices` and `removed_indices` are each sorted ascending, disjoint,
/// and together cover the input index range.
#[derive(Debug, Clone)]
pub struct CleaningOutcome {
    pub kept: PointCloud,
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
    pub report: CleaningReport,
}

fn finish(
    cloud: &PointCloud,
    method: &str,
    kept_indices: Vec<usize>,
    mut removed_indices: Vec<usize>,
    stages: Vec<StageReport>,
) -> Result<CleaningOutcome> {
    removed_indices.sort_unstable();
    let report = CleaningReport::new(method, cloud.len(), removed_indices.len(), stages)?;
    Ok(CleaningOutcome {
        kept: cloud.select(&kept_indices),
        kept_indices,
        removed_indices,
        report,
    })
}

// ── the three filters ───────────────────────────────────────────────────

/// Staged axis-wise z-score filtration.
///
/// Z-scores are recomputed on the surviving points at every stage, so a
/// gross outlier removed by the first axis no longer distorts the next
/// axis' statistics. A stage whose axis has zero variance is skipped and
/// flagged in the report.
pub fn zscore_axis_filter(
    cloud: &PointCloud,
    config: &ZScoreFilterConfig,
) -> Result<CleaningOutcome> {
    config.validate()?;
    if cloud.len() < 3 {
        return Err(Error::InsufficientPoints {
            need: 3,
            found: cloud.len(),
        });
    }
    let mut kept: Vec<usize> = (0..cloud.len()).collect();
    let mut removed: Vec<usize> = Vec::new();
    let mut stages = Vec::new();
    for &axis in &config.axes {
        if kept.is_empty() {
            stages.push(StageReport {
                stage: axis.name().to_owned(),
                threshold: None,
                removed: 0,
                skipped: true,
            });
            continue;
        }
        let values: Vec<f64> = kept.iter().map(|&i| cloud.points()[i].coord(axis)).collect();
        let z = match z_scores(&values) {
            Ok(z) => z,
            Err(Error::ZeroVariance) => {
                stages.push(StageReport {
                    stage: axis.name().to_owned(),
                    threshold: None,
                    removed: 0,
                    skipped: true,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let t = match config.threshold {
            ThresholdMode::Fixed(t) => t,
            ThresholdMode::Adaptive { bins, cutoff_fraction } => {
                let hist = axis_histogram(axis, &z, bins)?;
                adaptive_threshold(&hist, cutoff_fraction)?
            }
        };
        let mut still = Vec::with_capacity(kept.len());
        let mut dropped = 0usize;
        for (pos, &idx) in kept.iter().enumerate() {
            if z[pos].abs() > t {
                removed.push(idx);
                dropped += 1;
            } else {
                still.push(idx);
            }
        }
        stages.push(StageReport {
            stage: axis.name().to_owned(),
            threshold: Some(t),
            removed: dropped,
            skipped: false,
        });
        kept = still;
    }
    finish(cloud, "zscore", kept, removed, stages)
}

/// Removes points whose mean distance to their `k` nearest neighbors is
/// more than `std_ratio` standard deviations above the cloud-wide mean.
pub fn statistical_outlier_removal(
    cloud: &PointCloud,
    k: usize,
    std_ratio: f64,
) -> Result<CleaningOutcome> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if !std_ratio.is_finite() {
        return Err(Error::invalid("std_ratio", "must be finite"));
    }
    if cloud.len() <= k {
        return Err(Error::InsufficientPoints {
            need: k + 1,
            found: cloud.len(),
        });
    }
    let index = NeighborIndex::build(cloud, auto_cell_size(cloud))?;
    let mean_dists: Vec<f64> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            // k+1 nearest including the query point itself; drop self by
            // index so duplicate positions still count as neighbors.
            let nn = index.k_nearest(p, k + 1).expect("k+1 >= 1");
            let mut sum = 0.0;
            let mut cnt = 0usize;
            for (idx, d) in nn {
                if idx == i {
                    continue;
                }
                if cnt == k {
                    break;
                }
                sum += d;
                cnt += 1;
            }
            sum / cnt as f64
        })
        .collect();
    let n = mean_dists.len() as f64;
    let mu = mean_dists.iter().sum::<f64>() / n;
    let var = mean_dists.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / n;
    let sigma = var.sqrt();

    if sigma == 0.0 {
        let stages = vec![StageReport {
            stage: "statistical".to_owned(),
            threshold: None,
            removed: 0,
            skipped: true,
        }];
        return finish(cloud, "statistical", (0..cloud.len()).collect(), Vec::new(), stages);
    }

    let cutoff = mu + std_ratio * sigma;
    let mut kept = Vec::with_capacity(cloud.len());
    let mut removed = Vec::new();
    for (i, &d) in mean_dists.iter().enumerate() {
        if d > cutoff {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    let stages = vec![StageReport {
        stage: "statistical".to_owned(),
        threshold: Some(cutoff),
        removed: removed.len(),
        skipped: false,
    }];
    finish(cloud, "statistical", kept, removed, stages)
}

/// Removes points with fewer than `min_neighbors` other points within
/// `radius`.
pub fn radius_outlier_removal(
    cloud: &PointCloud,
    radius: f64,
    min_neighbors: usize,
) -> Result<CleaningOutcome> {
    if min_neighbors == 0 {
        return Err(Error::invalid("min_neighbors", "must be at least 1"));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::invalid(
            "radius",
            format!("must be positive and finite, got {radius}"),
        ));
    }
    let index = NeighborIndex::build(cloud, radius)?;
    let neighbor_counts: Vec<usize> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let hits = index.radius_neighbors(p, radius).expect("radius > 0");
            // The query point always finds itself; don't count it.
            hits.iter().filter(|&&idx| idx != i).count()
        })
        .collect();
    let mut kept = Vec::with_capacity(cloud.len());
    let mut removed = Vec::new();
    for (i, &c) in neighbor_counts.iter().enumerate() {
        if c < min_neighbors {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    let stages = vec![StageReport {
        stage: "radius".to_owned(),
        threshold: Some(radius),
        removed: removed.len(),
        skipped: false,
    }];
    finish(cloud, "radius", kept, removed, stages)
}
