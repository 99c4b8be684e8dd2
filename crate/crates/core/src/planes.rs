//! RANSAC plane detection, multi-plane extraction, and semantic
//! classification of planar segments.
//!
//! The pipeline: [`ransac_plane`] finds the dominant plane of a cloud by
//! sampling point triples, [`extract_planes`] peels planes off a cloud one
//! by one, [`classify_segments`] tags segments as floor, ceiling, or wall
//! by normal direction and altitude, and [`separate_walls_from_objects`]
//! splits what remains after floor and ceiling removal.
//!
//! Determinism contract: every operation here is a pure function of its
//! inputs. Candidate evaluation is parallel, but each RANSAC iteration
//! seeds its own RNG stream from (seed, iteration index) and winners are
//! selected in iteration order, so results are identical on any thread
//! count.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Candidate evaluations per parallel batch. Batches are scanned in
/// iteration order so early stopping matches a sequential run exactly.
const CANDIDATE_CHUNK: usize = 64;

// ── plane geometry ──────────────────────────────────────────────────────

/// A plane `normal · p + d = 0` with unit normal.
///
/// Canonical orientation: the largest-magnitude normal component is
/// positive (ties broken toward the first such component), so a plane and
/// its flipped twin construct identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plane {
    normal: [f64; 3],
    d: f64,
}

impl Plane {
    /// Builds a plane from any non-zero normal, rescaling `d` to match the
    /// unit normal and applying the canonical orientation.
    pub fn new(normal: [f64; 3], d: f64) -> Result<Plane> {
        let len = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
        if !len.is_finite() || len < 1e-12 || !d.is_finite() {
            return Err(Error::invalid(
                "normal",
                "must be a finite, non-zero vector with finite offset",
            ));
        }
        let mut n = [normal[0] / len, normal[1] / len, normal[2] / len];
        let mut d = d / len;
        let lead = (0..3)
            .max_by(|&a, &b| {
                n[a].abs()
                    .partial_cmp(&n[b].abs())
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .unwrap();
        if n[lead] < 0.0 {
            n = [-n[0], -n[1], -n[2]];
            d = -d;
        }
        Ok(Plane { normal: n, d })
    }

    /// Unit normal vector.
    pub fn normal(&self) -> [f64; 3] {
        self.normal
    }

    /// Offset `d` in `normal · p + d = 0`, meters.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Signed distance of `p` from the plane.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z + self.d
    }

    /// Angle between this plane's normal and `other`'s, in degrees,
    /// folded to [0, 90] so orientation is irrelevant.
    pub fn normal_angle_deg(&self, other: &Plane) -> f64 {
        let dot: f64 = (0..3).map(|i| self.normal[i] * other.normal[i]).sum();
        dot.abs().clamp(0.0, 1.0).acos().to_degrees()
    }
}

/// `|normal · p + d|`: the distance from `p` to the plane.
pub fn point_plane_distance(plane: &Plane, p: &Point3) -> f64 {
    plane.signed_distance(p).abs()
}

/// Exact plane through three points.
///
/// Rejects triples whose cross product is smaller than `1e-12` relative to
/// the edge lengths (collinear or coincident points).
pub fn plane_from_three_points(p1: &Point3, p2: &Point3, p3: &Point3) -> Result<Plane> {
    let e1 = [p2.x - p1.x, p2.y - p1.y, p2.z - p1.z];
    let e2 = [p3.x - p1.x, p3.y - p1.y, p3.z - p1.z];
    let cross = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    let cross_len = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let e1_len = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e2_len = (e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]).sqrt();
    if cross_len <= 1e-12 * e1_len * e2_len || cross_len == 0.0 {
        return Err(Error::CollinearPoints);
    }
    let d = -(cross[0] * p1.x + cross[1] * p1.y + cross[2] * p1.z);
    Plane::new(cross, d)
}

/// Indices of all points within `t` of the plane, ascending.
pub fn consensus_set(cloud: &PointCloud, plane: &Plane, t: f64) -> Result<Vec<usize>> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    Ok(cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| point_plane_distance(plane, p) <= t)
        .map(|(i, _)| i)
        .collect())
}

fn count_consensus(cloud: &PointCloud, plane: &Plane, t: f64) -> usize {
    cloud
        .points()
        .iter()
        .filter(|p| point_plane_distance(plane, p) <= t)
        .count()
}

/// Total-least-squares plane through the indexed points: the normal is the
/// covariance eigenvector with the smallest eigenvalue, and the plane
/// passes through the centroid.
pub fn refit_plane_lsq(cloud: &PointCloud, indices: &[usize]) -> Result<Plane> {
    if indices.len() < 3 {
        return Err(Error::InsufficientPoints {
            need: 3,
            found: indices.len(),
        });
    }
    let pts = cloud.points();
    let n = indices.len() as f64;
    let mut centroid = Vector3::zeros();
    for &i in indices {
        centroid += Vector3::new(pts[i].x, pts[i].y, pts[i].z);
    }
    centroid /= n;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let q = Vector3::new(pts[i].x, pts[i].y, pts[i].z) - centroid;
        cov += q * q.transpose();
    }
    cov /= n;
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].partial_cmp(&eigen.eigenvalues[b]).unwrap());
    let [lo, mid, hi] = [order[0], order[1], order[2]];
    // A plane needs spread in two directions: the middle eigenvalue must
    // be meaningfully non-zero.
    if eigen.eigenvalues[hi] <= 0.0 || eigen.eigenvalues[mid] <= 1e-12 * eigen.eigenvalues[hi] {
        return Err(Error::CollinearPoints);
    }
    let normal = eigen.eigenvectors.column(lo);
    let d = -normal.dot(&centroid);
    Plane::new([normal[0], normal[1], normal[2]], d)
}

// ── RANSAC ──────────────────────────────────────────────────────────────

/// RANSAC settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RansacConfig {
    /// Inlier distance threshold, meters.
    pub t: f64,
    /// Maximum number of sampling iterations.
    pub iterations: usize,
    /// Early-stop consensus size: the first candidate (in iteration
    /// order) reaching this many inliers wins immediately. The default
    /// (`usize::MAX`) never triggers, so all iterations run.
    pub min_consensus: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            t: 0.02,
            iterations: 1000,
            min_consensus: usize::MAX,
            seed: 0,
        }
    }
}

impl RansacConfig {
    fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t <= 0.0 {
            return Err(Error::invalid("t", format!("must be positive, got {}", self.t)));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.min_consensus < 3 {
            return Err(Error::invalid("min_consensus", "must be at least 3"));
        }
        Ok(())
    }
}

/// Semantic class of a planar segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceClass {
    Floor,
    Ceiling,
    Wall,
    Object,
    Unclassified,
}

impl SurfaceClass {
    /// Stable numeric id used in labeled files.
    pub fn id(self) -> i32 {
        match self {
            SurfaceClass::Floor => 0,
            SurfaceClass::Ceiling => 1,
            SurfaceClass::Wall => 2,
            SurfaceClass::Object => 3,
            SurfaceClass::Unclassified => 4,
        }
    }

    pub fn from_id(id: i32) -> Option<SurfaceClass> {
        Some(match id {
            0 => SurfaceClass::Floor,
            1 => SurfaceClass::Ceiling,
            2 => SurfaceClass::Wall,
            3 => SurfaceClass::Object,
            4 => SurfaceClass::Unclassified,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceClass::Floor => "floor",
            SurfaceClass::Ceiling => "ceiling",
            SurfaceClass::Wall => "wall",
            SurfaceClass::Object => "object",
            SurfaceClass::Unclassified => "unclassified",
        }
    }
}

impl std::fmt::Display for SurfaceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One detected plane with its supporting points.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSegment {
    plane: Plane,
    inliers: Vec<usize>,
    class: SurfaceClass,
}

impl PlaneSegment {
    pub fn new(plane: Plane, inliers: Vec<usize>, class: SurfaceClass) -> Self {
        PlaneSegment { plane, inliers, class }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    /// Indices into the source cloud, ascending.
    pub fn inliers(&self) -> &[usize] {
        &self.inliers
    }

    /// Consensus score: the number of inliers.
    pub fn score(&self) -> usize {
        self.inliers.len()
    }

    pub fn class(&self) -> SurfaceClass {
        self.class
    }

    pub fn with_class(mut self, class: SurfaceClass) -> Self {
        self.class = class;
        self
    }
}

/// Finds the dominant plane of a cloud.
///
/// Up to `iterations` candidates are drawn: three distinct points sampled
/// from an RNG stream derived from (seed, iteration), fitted exactly, and
/// scored by consensus count at threshold `t`. A degenerate triple
/// consumes its iteration. The first candidate (lowest iteration index)
/// reaching `min_consensus` stops the search; otherwise the best-scoring
/// candidate wins, ties going to the lower iteration. The winner is refit
/// by total least squares on its inliers, and the returned inliers are the
/// consensus set of the *refit* plane.
pub fn ransac_plane(cloud: &PointCloud, config: &RansacConfig) -> Result<PlaneSegment> {
    config.validate()?;
    let n = cloud.len();
    if n < 3 {
        return Err(Error::InsufficientPoints { need: 3, found: n });
    }
    let pts = cloud.points();
    let evaluate = |iteration: usize| -> Option<(Plane, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(iteration as u64);
        let pick = rand::seq::index::sample(&mut rng, n, 3);
        let plane =
            plane_from_three_points(&pts[pick.index(0)], &pts[pick.index(1)], &pts[pick.index(2)])
                .ok()?;
        Some((plane, count_consensus(cloud, &plane, config.t)))
    };

    let mut best: Option<(Plane, usize, usize)> = None; // plane, score, iteration
    'search: for chunk_start in (0..config.iterations).step_by(CANDIDATE_CHUNK) {
        let chunk_end = (chunk_start + CANDIDATE_CHUNK).min(config.iterations);
        let candidates: Vec<Option<(Plane, usize)>> =
            (chunk_start..chunk_end).into_par_iter().map(evaluate).collect();
        for (offset, candidate) in candidates.into_iter().enumerate() {
            let Some((plane, score)) = candidate else {
                continue;
            };
            let iteration = chunk_start + offset;
            if score >= config.min_consensus {
                best = Some((plane, score, iteration));
                break 'search;
            }
            if best.as_ref().is_none_or(|&(_, s, _)| score > s) {
                best = Some((plane, score, iteration));
            }
        }
    }

    let Some((candidate, _, _)) = best else {
        return Err(Error::CollinearPoints);
    };
    let rough_inliers = consensus_set(cloud, &candidate, config.t)?;
    let refit = refit_plane_lsq(cloud, &rough_inliers)?;
    let inliers = consensus_set(cloud, &refit, config.t)?;
    Ok(PlaneSegment::new(refit, inliers, SurfaceClass::Unclassified))
}

/// Extracts up to `max_planes` disjoint planar segments.
///
/// Each round runs [`ransac_plane`] on the residual cloud (with a
/// round-offset seed so rounds draw independent samples), keeps the
/// segment if its score reaches `min_inliers`, removes its inliers, and
/// continues. Segment indices refer to the original cloud. A first-round
/// RANSAC failure propagates; later failures end extraction quietly.
pub fn extract_planes(
    cloud: &PointCloud,
    config: &RansacConfig,
    max_planes: usize,
    min_inliers: usize,
) -> Result<Vec<PlaneSegment>> {
    if max_planes < 1 {
        return Err(Error::invalid("max_planes", "must be at least 1"));
    }
    if min_inliers < 3 {
        return Err(Error::invalid("min_inliers", "must be at least 3"));
    }
    config.validate()?;
    let mut segments = Vec::new();
    let mut residual: Vec<usize> = (0..cloud.len()).collect();
    for round in 0.. {
        if segments.len() >= max_planes {
            break;
        }
        // Round 0 always attempts an extraction so that errors on an
        // unusable input surface instead of silently yielding no planes.
        if round > 0 && residual.len() < min_inliers {
            break;
        }
        let sub = cloud.select(&residual);
        let round_config = RansacConfig {
            seed: config.seed.wrapping_add(round as u64),
            ..*config
        };
        let segment = match ransac_plane(&sub, &round_config) {
            Ok(s) => s,
            Err(e) if round == 0 => return Err(e),
            Err(_) => break,
        };
        if segment.score() < min_inliers {
            break;
        }
        let global: Vec<usize> = segment.inliers().iter().map(|&i| residual[i]).collect();
        let mut taken = vec![false; residual.len()];
        for &i in segment.inliers() {
            taken[i] = true;
        }
        residual = residual
            .iter()
            .enumerate()
            .filter(|&(i, _)| !taken[i])
            .map(|(_, &orig)| orig)
            .collect();
        segments.push(PlaneSegment::new(*segment.plane(), global, segment.class()));
    }
    Ok(segments)
}

// ── classification ──────────────────────────────────────────────────────

/// Settings for [`classify_segments`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    /// Unit up direction; altitude is the projection onto this axis.
    pub up: [f64; 3],
    /// A segment is horizontal when its normal is within this many degrees
    /// of the up axis.
    pub horiz_tol_deg: f64,
    /// A segment is a wall when its normal is within this many degrees of
    /// perpendicular to the up axis.
    pub vert_tol_deg: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            up: [0.0, 0.0, 1.0],
            horiz_tol_deg: 10.0,
            vert_tol_deg: 10.0,
        }
    }
}

impl ClassifyConfig {
    fn validate(&self) -> Result<()> {
        let len =
            (self.up[0] * self.up[0] + self.up[1] * self.up[1] + self.up[2] * self.up[2]).sqrt();
        if !len.is_finite() || (len - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("up", "must be a unit vector"));
        }
        for (name, v) in [
            ("horiz_tol_deg", self.horiz_tol_deg),
            ("vert_tol_deg", self.vert_tol_deg),
        ] {
            if !(v > 0.0 && v < 90.0) {
                return Err(Error::invalid(
                    name,
                    format!("must lie strictly between 0 and 90 degrees, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

fn altitude(p: &Point3, up: [f64; 3]) -> f64 {
    p.x * up[0] + p.y * up[1] + p.z * up[2]
}

/// Mean altitude of the indexed points along `up`.
pub fn mean_altitude(cloud: &PointCloud, indices: &[usize], up: [f64; 3]) -> f64 {
    let pts = cloud.points();
    indices.iter().map(|&i| altitude(&pts[i], up)).sum::<f64>() / indices.len() as f64
}

fn median_altitude(cloud: &PointCloud, up: [f64; 3]) -> f64 {
    let mut alts: Vec<f64> = cloud.points().iter().map(|p| altitude(p, up)).collect();
    alts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = alts.len();
    if n % 2 == 1 {
        alts[n / 2]
    } else {
        0.5 * (alts[n / 2 - 1] + alts[n / 2])
    }
}

/// Assigns a [`SurfaceClass`] to each segment.
///
/// The angle α between a segment normal and the up axis (folded to
/// [0°, 90°]) decides the family: α within `horiz_tol_deg` → horizontal,
/// 90°−α within `vert_tol_deg` → `Wall`, anything else `Unclassified`.
/// Among horizontals, the lowest mean inlier altitude becomes `Floor`, the
/// highest `Ceiling`, the rest `Object`. A lone horizontal segment is
/// `Floor` when its mean altitude lies below the cloud's median altitude,
/// otherwise `Ceiling`. An empty segment list yields an empty result.
pub fn classify_segments(
    cloud: &PointCloud,
    segments: Vec<PlaneSegment>,
    config: &ClassifyConfig,
) -> Result<Vec<PlaneSegment>> {
    config.validate()?;
    if segments.is_empty() {
        return Ok(segments);
    }
    let up = config.up;
    let mut classed: Vec<PlaneSegment> = Vec::with_capacity(segments.len());
    let mut horizontals: Vec<(usize, f64)> = Vec::new(); // (output index, mean altitude)
    for segment in segments {
        let n = segment.plane().normal();
        let dot = (n[0] * up[0] + n[1] * up[1] + n[2] * up[2]).abs().clamp(0.0, 1.0);
        let alpha = dot.acos().to_degrees();
        let class = if alpha <= config.horiz_tol_deg {
            horizontals.push((classed.len(), mean_altitude(cloud, segment.inliers(), up)));
            SurfaceClass::Object // placeholder; resolved below
        } else if 90.0 - alpha <= config.vert_tol_deg {
            SurfaceClass::Wall
        } else {
            SurfaceClass::Unclassified
        };
        classed.push(segment.with_class(class));
    }
    match horizontals.len() {
        0 => {}
        1 => {
            let (idx, alt) = horizontals[0];
            let class = if alt < median_altitude(cloud, up) {
                SurfaceClass::Floor
            } else {
                SurfaceClass::Ceiling
            };
            classed[idx] = classed[idx].clone().with_class(class);
        }
        _ => {
            let lowest = horizontals
                .iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            let highest = horizontals
                .iter()
                .rev()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0;
            classed[lowest] = classed[lowest].clone().with_class(SurfaceClass::Floor);
            classed[highest] = classed[highest].clone().with_class(SurfaceClass::Ceiling);
        }
    }
    Ok(classed)
}

/// Ceiling altitude minus floor altitude, both as mean inlier altitudes.
pub fn ceiling_height(
    cloud: &PointCloud,
    floor: &PlaneSegment,
    ceiling: &PlaneSegment,
    up: [f64; 3],
) -> Result<f64> {
    let floor_alt = mean_altitude(cloud, floor.inliers(), up);
    let ceiling_alt = mean_altitude(cloud, ceiling.inliers(), up);
    if ceiling_alt <= floor_alt {
        return Err(Error::InvertedGeometry {
            floor: floor_alt,
            ceiling: ceiling_alt,
        });
    }
    Ok(ceiling_alt - floor_alt)
}

/// Splits the points left after floor and ceiling removal into wall
/// segments and object points.
///
/// Planes are extracted from the residual; those whose normal is within
/// `classify.vert_tol_deg` of perpendicular to the up axis are walls
/// (the same angle test [`classify_segments`] applies, which does not
/// depend on altitude ranking). Everything else, including inliers of
/// non-wall planes, lands in the object indices. Wall inliers and object
/// indices partition the residual; both use original-cloud indices.
pub fn separate_walls_from_objects(
    cloud: &PointCloud,
    floor: &PlaneSegment,
    ceiling: &PlaneSegment,
    ransac: &RansacConfig,
    classify: &ClassifyConfig,
    min_wall_inliers: usize,
) -> Result<(Vec<PlaneSegment>, Vec<usize>)> {
    classify.validate()?;
    let mut removed = vec![false; cloud.len()];
    for &i in floor.inliers().iter().chain(ceiling.inliers()) {
        removed[i] = true;
    }
    let residual: Vec<usize> = (0..cloud.len()).filter(|&i| !removed[i]).collect();
    if residual.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let sub = cloud.select(&residual);
    // Disjoint segments of >= min_wall_inliers points each bound how many
    // planes can exist.
    let max_planes = residual.len() / min_wall_inliers.max(3) + 1;
    let segments = match extract_planes(&sub, ransac, max_planes, min_wall_inliers) {
        Ok(s) => s,
        // A residual too small or too degenerate to fit any plane simply
        // has no walls.
        Err(Error::InsufficientPoints { .. }) | Err(Error::CollinearPoints) => Vec::new(),
        Err(e) => return Err(e),
    };
    let up = classify.up;
    let mut is_wall_point = vec![false; residual.len()];
    let mut walls = Vec::new();
    for segment in segments {
        let n = segment.plane().normal();
        let dot = (n[0] * up[0] + n[1] * up[1] + n[2] * up[2]).abs().clamp(0.0, 1.0);
        let alpha = dot.acos().to_degrees();
        if 90.0 - alpha <= classify.vert_tol_deg {
            for &i in segment.inliers() {
                is_wall_point[i] = true;
            }
            let global: Vec<usize> = segment.inliers().iter().map(|&i| residual[i]).collect();
            walls.push(PlaneSegment::new(*segment.plane(), global, SurfaceClass::Wall));
        }
    }
    let objects: Vec<usize> = residual
        .iter()
        .enumerate()
        .filter(|&(local, _)| !is_wall_point[local])
        .map(|(_, &orig)| orig)
        .collect();
    Ok((walls, objects))
}

// ── reporting ───────────────────────────────────────────────────────────

/// One segment's row in the plane report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub class: String,
    pub normal: [f64; 3],
    pub offset: f64,
    pub inlier_count: usize,
    pub mean_altitude: f64,
}

/// JSON-serializable summary of a plane extraction run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneReport {
    pub segments: Vec<SegmentReport>,
    /// Present when both a floor and a ceiling were identified.
    pub ceiling_height_m: Option<f64>,
}

/// Builds the report for a set of classified segments.
pub fn plane_report(cloud: &PointCloud, segments: &[PlaneSegment], up: [f64; 3]) -> PlaneReport {
    let rows: Vec<SegmentReport> = segments
        .iter()
        .map(|s| SegmentReport {
            class: s.class().name().to_owned(),
            normal: s.plane().normal(),
            offset: s.plane().d(),
            inlier_count: s.score(),
            mean_altitude: mean_altitude(cloud, s.inliers(), up),
        })
        .collect();
    let floor = segments.iter().find(|s| s.class() == SurfaceClass::Floor);
    let ceiling = segments.iter().find(|s| s.class() == SurfaceClass::Ceiling);
    let height = match (floor, ceiling) {
        (Some(f), Some(c)) => ceiling_height(cloud, f, c, up).ok(),
        _ => None,
    };
    PlaneReport {
        segments: rows,
        ceiling_height_m: height,
    }
}
