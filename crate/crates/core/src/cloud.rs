//! Point-cloud container types.
//!
//! A [`PointCloud`] stores coordinates in metres as `f64` plus optional
//! per-point attributes (RGB color, intensity, integer label). Attribute
//! vectors always have exactly one entry per point, and no non-finite
//! coordinate is admitted into a cloud.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in 3-D space, coordinates in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// The coordinate on `axis`.
    pub fn coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dist_sq(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

/// Coordinate axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::invalid("axis", format!("unknown axis `{other}`"))),
        }
    }
}

/// Axis-aligned bounding box with `min` componentwise below `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Extent along each axis, always non-negative.
    pub fn extents(&self) -> [f64; 3] {
        [
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        ]
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )
    }

    /// Diagonal length of the box.
    pub fn diagonal(&self) -> f64 {
        self.min.dist(&self.max)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// The box scaled about its own center by `factor` per axis.
    pub fn scaled_about_center(&self, factor: f64) -> Aabb {
        let c = self.center();
        let half = [
            0.5 * factor * (self.max.x - self.min.x),
            0.5 * factor * (self.max.y - self.min.y),
            0.5 * factor * (self.max.z - self.min.z),
        ];
        Aabb {
            min: Point3::new(c.x - half[0], c.y - half[1], c.z - half[2]),
            max: Point3::new(c.x + half[0], c.y + half[1], c.z + half[2]),
        }
    }
}

/// A point cloud with optional per-point attributes.
///
/// Attribute vectors, when present, are exactly as long as `points`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    colors: Option<Vec<[u8; 3]>>,
    intensities: Option<Vec<f64>>,
    labels: Option<Vec<i32>>,
}

impl PointCloud {
    /// Builds a cloud from bare points, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index });
        }
        Ok(PointCloud {
            points,
            colors: None,
            intensities: None,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn intensities(&self) -> Option<&[f64]> {
        self.intensities.as_deref()
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn set_colors(&mut self, colors: Vec<[u8; 3]>) -> Result<()> {
        if colors.len() != self.points.len() {
            return Err(Error::AttributeLength {
                name: "colors",
                expected: self.points.len(),
                found: colors.len(),
            });
        }
        self.colors = Some(colors);
        Ok(())
    }

    pub fn set_intensities(&mut self, intensities: Vec<f64>) -> Result<()> {
        if intensities.len() != self.points.len() {
            return Err(Error::AttributeLength {
                name: "intensities",
                expected: self.points.len(),
                found: intensities.len(),
            });
        }
        self.intensities = Some(intensities);
        Ok(())
    }

    pub fn set_labels(&mut self, labels: Vec<i32>) -> Result<()> {
        if labels.len() != self.points.len() {
            return Err(Error::AttributeLength {
                name: "labels",
                expected: self.points.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(())
    }

    /// Values of one coordinate across the whole cloud.
    pub fn axis_values(&self, axis: Axis) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(move |p| p.coord(axis))
    }

    /// The subset at `indices`, attributes carried along.
    ///
    /// Panics if an index is out of range; duplicates are allowed and
    /// produce duplicated points.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            intensities: self
                .intensities
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Tight axis-aligned bounding box.
    pub fn bounding_box(&self) -> Result<Aabb> {
        let first = *self.points.first().ok_or(Error::EmptyInput)?;
        let mut min = first;
        let mut max = first;
        for p in &self.points[1..] {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            min.z = min.z.min(p.z);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
            max.z = max.z.max(p.z);
        }
        Ok(Aabb { min, max })
    }
}
