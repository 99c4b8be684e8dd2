//! Synthetic room scenes with per-point ground truth.
//!
//! [`generate_room`] samples the six faces of an axis-aligned box room,
//! optional clutter boxes, and uniform outliers, recording for every point
//! which surface produced it. The output is deterministic per seed: one
//! RNG drives generation in a fixed order (faces, then clutter, then
//! outliers), so a spec reproduces its cloud bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::cloud::{Aabb, Point3, PointCloud};
use crate::error::{Error, Result};
use crate::planes::{Plane, SurfaceClass};

/// Axis-aligned clutter box resting inside the room.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClutterBox {
    pub center: [f64; 3],
    /// Full side lengths along x, y, z.
    pub extents: [f64; 3],
    /// Number of points sampled on the box surface.
    pub points: usize,
}

/// Recipe for a synthetic room scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoomSpec {
    /// Room extent along x, meters.
    pub width: f64,
    /// Room extent along y, meters.
    pub depth: f64,
    /// Room extent along z, meters.
    pub height: f64,
    /// Points sampled uniformly on each of the six faces.
    pub points_per_face: usize,
    /// Standard deviation of Gaussian noise along each surface normal.
    pub noise_sigma: f64,
    /// Outlier count as a fraction of the face points (floor of
    /// `fraction * 6 * points_per_face`), in [0, 1).
    pub outlier_fraction: f64,
    /// Outliers are drawn uniformly from the room's bounding box scaled
    /// about its center by this factor (>= 1).
    pub outlier_bbox_scale: f64,
    pub clutter: Vec<ClutterBox>,
    pub seed: u64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        RoomSpec {
            width: 4.0,
            depth: 5.0,
            height: 2.7,
            points_per_face: 1000,
            noise_sigma: 0.005,
            outlier_fraction: 0.05,
            outlier_bbox_scale: 1.5,
            clutter: Vec::new(),
            seed: 0,
        }
    }
}

impl RoomSpec {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("depth", self.depth),
            ("height", self.height),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.points_per_face < 1 {
            return Err(Error::invalid("points_per_face", "must be at least 1"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::invalid(
                "noise_sigma",
                format!("must be non-negative, got {}", self.noise_sigma),
            ));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::invalid(
                "outlier_fraction",
                format!("must lie in [0, 1), got {}", self.outlier_fraction),
            ));
        }
        if !self.outlier_bbox_scale.is_finite() || self.outlier_bbox_scale < 1.0 {
            return Err(Error::invalid(
                "outlier_bbox_scale",
                format!("must be at least 1, got {}", self.outlier_bbox_scale),
            ));
        }
        for (i, c) in self.clutter.iter().enumerate() {
            for (axis, &e) in ["x", "y", "z"].iter().zip(&c.extents) {
                if !e.is_finite() || e <= 0.0 {
                    return Err(Error::invalid(
                        "clutter",
                        format!("box {i}: {axis} extent must be positive, got {e}"),
                    ));
                }
            }
            if !c.center.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(
                    "clutter",
                    format!("box {i}: center must be finite"),
                ));
            }
        }
        Ok(())
    }
}

/// Per-point provenance of a generated scene.
///
/// All vectors run parallel to the cloud. Surface ids 0..6 are the room
/// faces (floor, ceiling, x=0, x=width, y=0, y=depth); ids `6 + i` are
/// clutter boxes; outliers carry no surface.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    face_planes: [Plane; 6],
    surface: Vec<Option<u32>>,
    class: Vec<SurfaceClass>,
    outlier: Vec<bool>,
}

/// Surface ids of the six room faces, in generation order.
pub const FACE_FLOOR: u32 = 0;
pub const FACE_CEILING: u32 = 1;
pub const FACE_X0: u32 = 2;
pub const FACE_XW: u32 = 3;
pub const FACE_Y0: u32 = 4;
pub const FACE_YD: u32 = 5;

impl GroundTruth {
    /// True surface id per point; `None` marks an outlier.
    pub fn surface(&self) -> &[Option<u32>] {
        &self.surface
    }

    /// True class per point.
    pub fn class(&self) -> &[SurfaceClass] {
        &self.class
    }

    /// Outlier flag per point.
    pub fn outlier(&self) -> &[bool] {
        &self.outlier
    }

    /// Exact plane of a room face. Clutter surfaces have no plane.
    pub fn truth_plane(&self, surface_id: u32) -> Result<Plane> {
        self.face_planes
            .get(surface_id as usize)
            .copied()
            .ok_or(Error::UnknownSurface(surface_id))
    }

    pub fn len(&self) -> usize {
        self.surface.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface.is_empty()
    }
}

/// Free axes of each room face, in sampling order, plus the noisy axis
/// and its fixed coordinate. Axes are indexed x=0, y=1, z=2.
struct Face {
    free: [(usize, f64); 2], // (axis, upper bound); lower bound is 0
    fixed: (usize, f64),
    class: SurfaceClass,
}

/// Generates a room scan and its ground truth.
///
/// Point order is faces 0..6 (each `points_per_face` points), clutter
/// boxes in declaration order, then outliers. Cloud labels are set to the
/// numeric class ids from [`SurfaceClass::id`].
pub fn generate_room(spec: &RoomSpec) -> Result<(PointCloud, GroundTruth)> {
    spec.validate()?;
    let (w, d, h) = (spec.width, spec.depth, spec.height);
    let faces = [
        Face { free: [(0, w), (1, d)], fixed: (2, 0.0), class: SurfaceClass::Floor },
        Face { free: [(0, w), (1, d)], fixed: (2, h), class: SurfaceClass::Ceiling },
        Face { free: [(1, d), (2, h)], fixed: (0, 0.0), class: SurfaceClass::Wall },
        Face { free: [(1, d), (2, h)], fixed: (0, w), class: SurfaceClass::Wall },
        Face { free: [(0, w), (2, h)], fixed: (1, 0.0), class: SurfaceClass::Wall },
        Face { free: [(0, w), (2, h)], fixed: (1, d), class: SurfaceClass::Wall },
    ];
    let face_planes = [
        Plane::new([0.0, 0.0, 1.0], 0.0)?,
        Plane::new([0.0, 0.0, 1.0], -h)?,
        Plane::new([1.0, 0.0, 0.0], 0.0)?,
        Plane::new([1.0, 0.0, 0.0], -w)?,
        Plane::new([0.0, 1.0, 0.0], 0.0)?,
        Plane::new([0.0, 1.0, 0.0], -d)?,
    ];
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n_outliers = (spec.outlier_fraction * (6 * spec.points_per_face) as f64).floor() as usize;
    let n_clutter: usize = spec.clutter.iter().map(|c| c.points).sum();
    let total = 6 * spec.points_per_face + n_clutter + n_outliers;
    let mut points = Vec::with_capacity(total);
    let mut surface = Vec::with_capacity(total);
    let mut class = Vec::with_capacity(total);
    let mut outlier = Vec::with_capacity(total);

    for (face_id, face) in faces.iter().enumerate() {
        for _ in 0..spec.points_per_face {
            let mut coords = [0.0; 3];
            for &(axis, hi) in &face.free {
                coords[axis] = rng.gen_range(0.0..hi);
            }
            coords[face.fixed.0] = face.fixed.1 + noise.sample(&mut rng);
            points.push(Point3::new(coords[0], coords[1], coords[2]));
            surface.push(Some(face_id as u32));
            class.push(face.class);
            outlier.push(false);
        }
    }

    for (box_id, cb) in spec.clutter.iter().enumerate() {
        let [ex, ey, ez] = cb.extents;
        // Face areas by fixed axis: two x-faces, two y-faces, two z-faces.
        let areas = [ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey];
        let total_area: f64 = areas.iter().sum();
        let half = [ex / 2.0, ey / 2.0, ez / 2.0];
        for _ in 0..cb.points {
            let mut pick = rng.gen_range(0.0..total_area);
            let mut face = 0;
            for (i, &a) in areas.iter().enumerate() {
                if pick < a {
                    face = i;
                    break;
                }
                pick -= a;
            }
            let fixed_axis = face / 2;
            let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
            let mut coords = [0.0; 3];
            for axis in 0..3 {
                if axis != fixed_axis {
                    coords[axis] = cb.center[axis] + rng.gen_range(-half[axis]..half[axis]);
                }
            }
            coords[fixed_axis] = cb.center[fixed_axis] + sign * half[fixed_axis] + noise.sample(&mut rng);
            points.push(Point3::new(coords[0], coords[1], coords[2]));
            surface.push(Some(6 + box_id as u32));
            class.push(SurfaceClass::Object);
            outlier.push(false);
        }
    }

    let room_box = Aabb {
        min: Point3::new(0.0, 0.0, 0.0),
        max: Point3::new(w, d, h),
    };
    let scaled = room_box.scaled_about_center(spec.outlier_bbox_scale);
    for _ in 0..n_outliers {
        let x = rng.gen_range(scaled.min.x..scaled.max.x);
        let y = rng.gen_range(scaled.min.y..scaled.max.y);
        let z = rng.gen_range(scaled.min.z..scaled.max.z);
        points.push(Point3::new(x, y, z));
        surface.push(None);
        class.push(SurfaceClass::Unclassified);
        outlier.push(true);
    }

    let mut cloud = PointCloud::new(points)?;
    let labels: Vec<i32> = class.iter().map(|c| c.id()).collect();
    cloud.set_labels(labels)?;
    let truth = GroundTruth { face_planes, surface, class, outlier };
    Ok((cloud, truth))
}
