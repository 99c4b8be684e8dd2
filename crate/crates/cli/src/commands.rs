//! The four pipeline subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use roomscan::classify::{evaluate_cv, CvConfig, KernelSpec, SvmConfig};
use roomscan::cleaning::{
    radius_outlier_removal, statistical_outlier_removal, zscore_axis_filter, CleaningOutcome,
    ThresholdMode, ZScoreFilterConfig,
};
use roomscan::features::{
    extract_features, init_weights, partition_blocks, BlockConfig, FeatureMatrix, NetworkWeights,
    ScalerMode,
};
use roomscan::io::{
    read_ply, read_weights, read_xyz, write_ply, write_report_json, CloudDocument, PlyEncoding,
};
use roomscan::planes::{
    classify_segments, extract_planes, plane_report, separate_walls_from_objects, ClassifyConfig,
    PlaneSegment, RansacConfig, SurfaceClass,
};
use roomscan::synth::{generate_room, ClutterBox, RoomSpec};
use roomscan::{Axis, Error};

use crate::config::{pick, CliError, FileConfig};

fn read_cloud(path: &Path) -> Result<CloudDocument, CliError> {
    let doc = match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => read_xyz(path)?,
        _ => read_ply(path)?,
    };
    Ok(doc)
}

fn encoding(ascii: bool) -> PlyEncoding {
    if ascii {
        PlyEncoding::Ascii
    } else {
        PlyEncoding::BinaryLittleEndian
    }
}

// ── clean ───────────────────────────────────────────────────────────────

/// Remove outlier points from a cloud.
#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Input cloud (.ply or .xyz).
    #[arg(long)]
    pub input: PathBuf,
    /// Cleaned cloud to write (PLY).
    #[arg(long)]
    pub output: PathBuf,
    /// Cleaning report to write (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// zscore | statistical | radius.
    #[arg(long)]
    pub method: Option<String>,
    /// Axes for the z-score stages, e.g. `xy` or `x,z`.
    #[arg(long)]
    pub axes: Option<String>,
    /// `auto` for the histogram threshold, or a fixed |z| cutoff.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<String>,
    /// Histogram bins for the auto threshold.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram tail fraction for the auto threshold.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Neighbor count for the statistical method.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Deviation ratio for the statistical method.
    #[arg(long)]
    pub std_ratio: Option<f64>,
    /// Search radius for the radius method, meters.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Minimum neighbor count for the radius method.
    #[arg(long)]
    pub min_neighbors: Option<usize>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    pub ascii: bool,
}

fn parse_axes(raw: &str) -> Result<Vec<Axis>, CliError> {
    let mut axes = Vec::new();
    for ch in raw.chars() {
        if ch == ',' || ch.is_whitespace() {
            continue;
        }
        axes.push(match ch.to_ascii_lowercase() {
            'x' => Axis::X,
            'y' => Axis::Y,
            'z' => Axis::Z,
            other => return Err(CliError::args(format!("unknown axis `{other}` in `{raw}`"))),
        });
    }
    if axes.is_empty() {
        return Err(CliError::args(format!("no axes given in `{raw}`")));
    }
    Ok(axes)
}

pub fn run_clean(args: CleanArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let doc = read_cloud(&args.input)?;
    let method = pick(
        args.method,
        cfg.get("clean", "method").map(str::to_owned),
        "zscore".to_owned(),
    );
    let outcome: CleaningOutcome = match method.as_str() {
        "zscore" => {
            let axes = parse_axes(&pick(
                args.axes,
                cfg.get("clean", "axes").map(str::to_owned),
                "xy".to_owned(),
            ))?;
            let raw_threshold = pick(
                args.threshold,
                cfg.get("clean", "threshold").map(str::to_owned),
                "auto".to_owned(),
            );
            let threshold = if raw_threshold == "auto" {
                ThresholdMode::Adaptive {
                    bins: pick(args.bins, cfg.parsed("clean", "bins")?, 256),
                    cutoff_fraction: pick(args.cutoff, cfg.parsed("clean", "cutoff")?, 0.001),
                }
            } else {
                let t: f64 = raw_threshold
                    .parse()
                    .map_err(|_| CliError::args(format!("threshold must be `auto` or a number, got `{raw_threshold}`")))?;
                ThresholdMode::Fixed(t)
            };
            zscore_axis_filter(&doc.cloud, &ZScoreFilterConfig { axes, threshold })?
        }
        "statistical" => statistical_outlier_removal(
            &doc.cloud,
            pick(args.neighbors, cfg.parsed("clean", "neighbors")?, 8),
            pick(args.std_ratio, cfg.parsed("clean", "std_ratio")?, 1.0),
        )?,
        "radius" => radius_outlier_removal(
            &doc.cloud,
            pick(args.radius, cfg.parsed("clean", "radius")?, 0.1),
            pick(args.min_neighbors, cfg.parsed("clean", "min_neighbors")?, 2),
        )?,
        other => {
            return Err(CliError::args(format!(
                "unknown cleaning method `{other}` (zscore|statistical|radius)"
            )))
        }
    };
    write_ply(
        &CloudDocument::from_cloud(outcome.kept),
        &args.output,
        encoding(args.ascii),
    )?;
    write_report_json(&outcome.report, &args.report)?;
    Ok(())
}

// ── planes ──────────────────────────────────────────────────────────────

/// Extract planes and classify floor, ceiling, walls, and objects.
#[derive(Debug, Args)]
pub struct PlanesArgs {
    /// Input cloud (.ply or .xyz).
    #[arg(long)]
    pub input: PathBuf,
    /// Segment-labeled cloud to write (PLY with segment and class columns).
    #[arg(long)]
    pub output: PathBuf,
    /// Plane report to write (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Inlier distance threshold, meters.
    #[arg(long)]
    pub distance_threshold: Option<f64>,
    /// Sampling iterations per plane.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Early-stop consensus size; absent means run all iterations.
    #[arg(long)]
    pub min_consensus: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extraction rounds before stopping.
    #[arg(long)]
    pub max_planes: Option<usize>,
    /// Smallest inlier set that still counts as a plane.
    #[arg(long)]
    pub min_inliers: Option<usize>,
    /// Smallest inlier set that still counts as a wall (defaults to
    /// the min-inliers value).
    #[arg(long)]
    pub min_wall_inliers: Option<usize>,
    /// Degrees from horizontal a floor or ceiling may tilt.
    #[arg(long)]
    pub horiz_tol_deg: Option<f64>,
    /// Degrees from vertical a wall may tilt.
    #[arg(long)]
    pub vert_tol_deg: Option<f64>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    pub ascii: bool,
}

pub fn run_planes(args: PlanesArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let doc = read_cloud(&args.input)?;
    let cloud = doc.cloud;
    let defaults = RansacConfig::default();
    let ransac = RansacConfig {
        t: pick(args.distance_threshold, cfg.parsed("planes", "distance_threshold")?, defaults.t),
        iterations: pick(args.iterations, cfg.parsed("planes", "iterations")?, defaults.iterations),
        min_consensus: pick(
            args.min_consensus,
            cfg.parsed("planes", "min_consensus")?,
            defaults.min_consensus,
        ),
        seed: pick(args.seed, cfg.parsed("planes", "seed")?, defaults.seed),
    };
    let max_planes = pick(args.max_planes, cfg.parsed("planes", "max_planes")?, 8);
    let min_inliers = pick(args.min_inliers, cfg.parsed("planes", "min_inliers")?, 100);
    let min_wall_inliers = pick(
        args.min_wall_inliers,
        cfg.parsed("planes", "min_wall_inliers")?,
        min_inliers,
    );
    let classify = ClassifyConfig {
        horiz_tol_deg: pick(args.horiz_tol_deg, cfg.parsed("planes", "horiz_tol_deg")?, 10.0),
        vert_tol_deg: pick(args.vert_tol_deg, cfg.parsed("planes", "vert_tol_deg")?, 10.0),
        ..ClassifyConfig::default()
    };

    let segments = extract_planes(&cloud, &ransac, max_planes, min_inliers)?;
    if segments.is_empty() {
        return Err(Error::NoPlaneFound { min_inliers, best: 0 }.into());
    }
    let classified = classify_segments(&cloud, segments, &classify)?;
    let floor = classified.iter().find(|s| s.class() == SurfaceClass::Floor);
    let ceiling = classified.iter().find(|s| s.class() == SurfaceClass::Ceiling);
    let (final_segments, objects): (Vec<PlaneSegment>, Vec<usize>) = match (floor, ceiling) {
        (Some(floor), Some(ceiling)) => {
            let (walls, objects) = separate_walls_from_objects(
                &cloud,
                floor,
                ceiling,
                &ransac,
                &classify,
                min_wall_inliers,
            )?;
            let mut segments = vec![floor.clone(), ceiling.clone()];
            segments.extend(walls);
            (segments, objects)
        }
        _ => (classified, Vec::new()),
    };

    let report = plane_report(&cloud, &final_segments, ClassifyConfig::default().up);
    write_report_json(&report, &args.report)?;

    let mut segment_ids = vec![-1i32; cloud.len()];
    let mut class_ids = vec![SurfaceClass::Unclassified.id(); cloud.len()];
    for (si, segment) in final_segments.iter().enumerate() {
        for &i in segment.inliers() {
            segment_ids[i] = si as i32;
            class_ids[i] = segment.class().id();
        }
    }
    for &i in &objects {
        class_ids[i] = SurfaceClass::Object.id();
    }
    let mut out = CloudDocument::from_cloud(cloud);
    out.extra_int_columns = vec![("segment".into(), segment_ids), ("class".into(), class_ids)];
    write_ply(&out, &args.output, encoding(args.ascii))?;
    Ok(())
}

// ── segment ─────────────────────────────────────────────────────────────

/// Evaluate point-wise classification on a labeled cloud with k-fold
/// cross-validation.
#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Labeled input cloud (.ply with a `label` property).
    #[arg(long)]
    pub input: PathBuf,
    /// Predicted-label cloud to write (PLY with a `predicted` column).
    #[arg(long)]
    pub output: PathBuf,
    /// Evaluation report to write (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Block side length, meters.
    #[arg(long)]
    pub block_size: Option<f64>,
    /// Points resampled per block.
    #[arg(long)]
    pub points_per_block: Option<usize>,
    /// Cells with fewer points are dropped.
    #[arg(long)]
    pub min_points: Option<usize>,
    /// Append the centered coordinates to each feature row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_coords: Option<bool>,
    /// Network weights file; absent means seeded random initialization.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed for random weight initialization.
    #[arg(long)]
    pub weights_seed: Option<u64>,
    /// minmax | standardize | both.
    #[arg(long)]
    pub scaler: Option<String>,
    /// Cross-validation folds (at least 2).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Seed for block resampling and fold shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// linear | rbf.
    #[arg(long)]
    pub kernel: Option<String>,
    /// RBF width; defaults to 1 / feature width.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Soft-margin penalty.
    #[arg(long)]
    pub c: Option<f64>,
    /// Optimality tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Quiet optimization passes before stopping.
    #[arg(long)]
    pub max_passes: Option<usize>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    pub ascii: bool,
}

/// Per-point majority vote over feature rows; ties go to the smaller
/// class id, points never sampled into a block get -1.
fn vote_per_point(n: usize, rows: &[usize], predictions: &[i32]) -> Vec<i32> {
    let mut counts: Vec<BTreeMap<i32, usize>> = vec![BTreeMap::new(); n];
    for (row, &point) in rows.iter().enumerate() {
        *counts[point].entry(predictions[row]).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|by_class| {
            let mut best: Option<(i32, usize)> = None;
            for (class, count) in by_class {
                if best.is_none_or(|(_, c)| count > c) {
                    best = Some((class, count));
                }
            }
            best.map_or(-1, |(class, _)| class)
        })
        .collect()
}

pub fn run_segment(args: SegmentArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let doc = read_cloud(&args.input)?;
    let cloud = doc.cloud;
    let labels: Vec<i32> = cloud.labels().ok_or(Error::MissingLabels)?.to_vec();

    let seed = pick(args.seed, cfg.parsed("segment", "seed")?, 0);
    let folds = pick(args.folds, cfg.parsed("segment", "folds")?, 10);
    if folds < 2 {
        return Err(CliError::args(format!("folds must be at least 2, got {folds}")));
    }
    let block_defaults = BlockConfig::default();
    let blocks_cfg = BlockConfig {
        block_size: pick(args.block_size, cfg.parsed("segment", "block_size")?, block_defaults.block_size),
        points_per_block: pick(
            args.points_per_block,
            cfg.parsed("segment", "points_per_block")?,
            block_defaults.points_per_block,
        ),
        min_points: pick(args.min_points, cfg.parsed("segment", "min_points")?, block_defaults.min_points),
        seed,
    };
    let weights = match &args.weights {
        Some(path) => NetworkWeights::from_weights_file(&read_weights(path)?),
        None => init_weights(pick(args.weights_seed, cfg.parsed("segment", "weights_seed")?, 0)),
    };
    let include_coords = pick(args.include_coords, cfg.parsed("segment", "include_coords")?, false);

    let blocks = partition_blocks(&cloud, &blocks_cfg)?;
    if blocks.is_empty() {
        return Err(Error::InsufficientPoints {
            need: blocks_cfg.min_points.max(1),
            found: 0,
        }
        .into());
    }
    let parts = blocks
        .iter()
        .map(|block| extract_features(block, &weights, include_coords))
        .collect::<roomscan::Result<Vec<_>>>()?;
    let features = FeatureMatrix::stack(&parts)?;
    let row_labels: Vec<i32> = features.indices().iter().map(|&i| labels[i]).collect();

    let kernel_name = pick(
        args.kernel,
        cfg.get("segment", "kernel").map(str::to_owned),
        "rbf".to_owned(),
    );
    let gamma = pick(args.gamma, cfg.parsed("segment", "gamma")?, 1.0 / features.features().ncols() as f64);
    let kernel = match kernel_name.as_str() {
        "linear" => KernelSpec::Linear,
        "rbf" => KernelSpec::Rbf { gamma },
        other => return Err(CliError::args(format!("unknown kernel `{other}` (linear|rbf)"))),
    };
    let scaler: ScalerMode = pick(
        args.scaler,
        cfg.get("segment", "scaler").map(str::to_owned),
        "standardize".to_owned(),
    )
    .parse()
    .map_err(CliError::Args)?;
    let cv = CvConfig {
        k: folds,
        svm: SvmConfig {
            c: pick(args.c, cfg.parsed("segment", "c")?, 10.0),
            kernel,
            tol: pick(args.tol, cfg.parsed("segment", "tol")?, 1e-3),
            max_passes: pick(args.max_passes, cfg.parsed("segment", "max_passes")?, 10),
        },
        scaler,
        seed,
    };

    let outcome = evaluate_cv(features.features(), &row_labels, &cv)?;
    write_report_json(&outcome.report, &args.report)?;

    let predicted = vote_per_point(cloud.len(), features.indices(), &outcome.predictions);
    let mut out = CloudDocument::from_cloud(cloud);
    out.extra_int_columns = vec![("predicted".into(), predicted)];
    write_ply(&out, &args.output, encoding(args.ascii))?;
    Ok(())
}

// ── synth ───────────────────────────────────────────────────────────────

/// Generate a labeled synthetic room scan with ground truth.
#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene cloud to write (PLY with class-id labels).
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth sidecar to write (JSON).
    #[arg(long)]
    pub truth: PathBuf,
    /// Room extent along x, meters.
    #[arg(long)]
    pub width: Option<f64>,
    /// Room extent along y, meters.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Room extent along z, meters.
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub points_per_face: Option<usize>,
    /// Surface noise standard deviation, meters.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Outlier fraction in [0, 1).
    #[arg(long)]
    pub outliers: Option<f64>,
    /// Outlier bounding-box scale about the room center.
    #[arg(long)]
    pub outlier_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clutter box `cx,cy,cz,ex,ey,ez,points`; repeatable.
    #[arg(long)]
    pub clutter: Vec<String>,
    /// Write ASCII PLY instead of binary.
    #[arg(long)]
    pub ascii: bool,
}

fn parse_clutter(raw: &str) -> Result<ClutterBox, CliError> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != 7 {
        return Err(CliError::args(format!(
            "clutter expects `cx,cy,cz,ex,ey,ez,points`, got `{raw}`"
        )));
    }
    let number = |i: usize| -> Result<f64, CliError> {
        parts[i]
            .parse()
            .map_err(|_| CliError::args(format!("clutter value `{}` is not a number", parts[i])))
    };
    let points: usize = parts[6]
        .parse()
        .map_err(|_| CliError::args(format!("clutter point count `{}` is not an integer", parts[6])))?;
    Ok(ClutterBox {
        center: [number(0)?, number(1)?, number(2)?],
        extents: [number(3)?, number(4)?, number(5)?],
        points,
    })
}

/// Everything the generator knew: the six face planes and the
/// per-point provenance of the scene.
#[derive(Debug, Serialize)]
struct TruthSidecar {
    planes: Vec<TruthPlane>,
    /// Per point: the face or clutter surface it was sampled from;
    /// null for outliers.
    surface: Vec<Option<u32>>,
    /// Per point: true class id (floor 0, ceiling 1, wall 2, object 3,
    /// unclassified 4).
    class: Vec<i32>,
    outlier: Vec<bool>,
}

#[derive(Debug, Serialize)]
struct TruthPlane {
    surface: u32,
    class: String,
    normal: [f64; 3],
    offset: f64,
}

pub fn run_synth(args: SynthArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let defaults = RoomSpec::default();
    let clutter = args
        .clutter
        .iter()
        .map(|raw| parse_clutter(raw))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = RoomSpec {
        width: pick(args.width, cfg.parsed("synth", "width")?, defaults.width),
        depth: pick(args.depth, cfg.parsed("synth", "depth")?, defaults.depth),
        height: pick(args.height, cfg.parsed("synth", "height")?, defaults.height),
        points_per_face: pick(
            args.points_per_face,
            cfg.parsed("synth", "points_per_face")?,
            defaults.points_per_face,
        ),
        noise_sigma: pick(args.sigma, cfg.parsed("synth", "sigma")?, defaults.noise_sigma),
        outlier_fraction: pick(
            args.outliers,
            cfg.parsed("synth", "outlier_fraction")?,
            defaults.outlier_fraction,
        ),
        outlier_bbox_scale: pick(
            args.outlier_scale,
            cfg.parsed("synth", "outlier_scale")?,
            defaults.outlier_bbox_scale,
        ),
        clutter,
        seed: pick(args.seed, cfg.parsed("synth", "seed")?, defaults.seed),
    };
    let (cloud, truth) = generate_room(&spec)?;
    let classes = [
        SurfaceClass::Floor,
        SurfaceClass::Ceiling,
        SurfaceClass::Wall,
        SurfaceClass::Wall,
        SurfaceClass::Wall,
        SurfaceClass::Wall,
    ];
    let planes = (0..6u32)
        .map(|face| {
            let plane = truth.truth_plane(face)?;
            Ok(TruthPlane {
                surface: face,
                class: classes[face as usize].name().to_owned(),
                normal: plane.normal(),
                offset: plane.d(),
            })
        })
        .collect::<roomscan::Result<Vec<_>>>()?;
    let sidecar = TruthSidecar {
        planes,
        surface: truth.surface().to_vec(),
        class: truth.class().iter().map(|c| c.id()).collect(),
        outlier: truth.outlier().to_vec(),
    };
    write_ply(&CloudDocument::from_cloud(cloud), &args.output, encoding(args.ascii))?;
    write_report_json(&sidecar, &args.truth)?;
    Ok(())
}
