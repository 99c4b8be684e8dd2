//! Uniform-grid spatial index for neighbor queries.
//!
//! The index buckets point indices into cubic cells of a fixed size and
//! answers exact k-nearest-neighbor and radius queries against the cloud it
//! was built from. Queries never mutate the index, and their results are
//! identical to a brute-force scan over all points, including tie handling.

use std::collections::HashMap;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

/// Grid-bucketed view of a cloud for neighbor queries.
///
/// Cell size only affects query speed, never results.
pub struct NeighborIndex<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    origin: Point3,
    cells: HashMap<[i64; 3], Vec<u32>>,
    occ_min: [i64; 3],
    occ_max: [i64; 3],
}

impl<'a> NeighborIndex<'a> {
    /// Buckets every point of `cloud` into cells of edge `cell_size`.
    pub fn build(cloud: &'a PointCloud, cell_size: f64) -> Result<Self> {
        if !cell_size.is_finite() || cell_size <= 0.0 {
            return Err(Error::invalid(
                "cell_size",
                format!("must be positive and finite, got {cell_size}"),
            ));
        }
        if cloud.is_empty() {
            return Err(Error::EmptyInput);
        }
        let origin = cloud.bounding_box()?.min;
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut occ_min = [i64::MAX; 3];
        let mut occ_max = [i64::MIN; 3];
        for (i, p) in cloud.points().iter().enumerate() {
            let c = cell_coords(p, &origin, cell_size);
            for axis in 0..3 {
                occ_min[axis] = occ_min[axis].min(c[axis]);
                occ_max[axis] = occ_max[axis].max(c[axis]);
            }
            cells.entry(c).or_default().push(i as u32);
        }
        Ok(NeighborIndex {
            cloud,
            cell: cell_size,
            origin,
            cells,
            occ_min,
            occ_max,
        })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// The `min(k, n)` nearest points to `query` as (index, distance) pairs,
    /// sorted by ascending distance with ties broken by ascending index.
    pub fn k_nearest(&self, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let qc = cell_coords(query, &self.origin, self.cell);
        // Chebyshev cell distance from the query cell to the farthest
        // occupied cell bounds the shell sweep.
        let mut s_max: i64 = 0;
        for ((q, lo), hi) in qc.iter().zip(&self.occ_min).zip(&self.occ_max) {
            s_max = s_max.max((q - lo).abs()).max((q - hi).abs());
        }
        // Shells strictly inside the gap to the occupied region are empty.
        let s_start = chebyshev_gap(&qc, &self.occ_min, &self.occ_max);

        let mut found: Vec<(f64, u32)> = Vec::new();
        let mut s = s_start;
        while s <= s_max {
            self.visit_shell(&qc, s, |cell_pts| {
                for &idx in cell_pts {
                    let d2 = self.cloud.points()[idx as usize].dist_sq(query);
                    found.push((d2, idx));
                }
            });
            if found.len() >= k {
                found.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                found.truncate(k);
                // Every unvisited point sits at distance >= s * cell. Stop
                // only when the current k-th is strictly closer, so that
                // equidistant points in farther shells can still claim their
                // index-order priority.
                let kth = found[k - 1].0;
                let bound = s as f64 * self.cell;
                if kth < bound * bound {
                    break;
                }
            }
            s += 1;
        }
        found.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        found.truncate(k);
        Ok(found
            .into_iter()
            .map(|(d2, idx)| (idx as usize, d2.sqrt()))
            .collect())
    }

    /// Indices of every point within `radius` of `query` (closed ball),
    /// sorted ascending. The query's own index is included if indexed.
    pub fn radius_neighbors(&self, query: &Point3, radius: f64) -> Result<Vec<usize>> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::invalid(
                "radius",
                format!("must be positive and finite, got {radius}"),
            ));
        }
        let lo_pt = Point3::new(query.x - radius, query.y - radius, query.z - radius);
        let hi_pt = Point3::new(query.x + radius, query.y + radius, query.z + radius);
        let lo = cell_coords(&lo_pt, &self.origin, self.cell);
        let hi = cell_coords(&hi_pt, &self.origin, self.cell);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for cx in lo[0].max(self.occ_min[0])..=hi[0].min(self.occ_max[0]) {
            for cy in lo[1].max(self.occ_min[1])..=hi[1].min(self.occ_max[1]) {
                for cz in lo[2].max(self.occ_min[2])..=hi[2].min(self.occ_max[2]) {
                    if let Some(cell_pts) = self.cells.get(&[cx, cy, cz]) {
                        for &idx in cell_pts {
                            if self.cloud.points()[idx as usize].dist_sq(query) <= r2 {
                                out.push(idx as usize);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Calls `f` on every occupied cell at Chebyshev distance exactly `s`
    /// from `qc`, restricted to the occupied coordinate range.
    fn visit_shell(&self, qc: &[i64; 3], s: i64, mut f: impl FnMut(&[u32])) {
        let lo = [
            (qc[0] - s).max(self.occ_min[0]),
            (qc[1] - s).max(self.occ_min[1]),
            (qc[2] - s).max(self.occ_min[2]),
        ];
        let hi = [
            (qc[0] + s).min(self.occ_max[0]),
            (qc[1] + s).min(self.occ_max[1]),
            (qc[2] + s).min(self.occ_max[2]),
        ];
        for cx in lo[0]..=hi[0] {
            for cy in lo[1]..=hi[1] {
                for cz in lo[2]..=hi[2] {
                    let cheb = (cx - qc[0])
                        .abs()
                        .max((cy - qc[1]).abs())
                        .max((cz - qc[2]).abs());
                    if cheb != s {
                        continue;
                    }
                    if let Some(cell_pts) = self.cells.get(&[cx, cy, cz]) {
                        f(cell_pts);
                    }
                }
            }
        }
    }
}

fn cell_coords(p: &Point3, origin: &Point3, cell: f64) -> [i64; 3] {
    [
        ((p.x - origin.x) / cell).floor() as i64,
        ((p.y - origin.y) / cell).floor() as i64,
        ((p.z - origin.z) / cell).floor() as i64,
    ]
}

/// Chebyshev cell distance from `qc` to the box `[lo, hi]`; zero when inside.
fn chebyshev_gap(qc: &[i64; 3], lo: &[i64; 3], hi: &[i64; 3]) -> i64 {
    let mut gap: i64 = 0;
    for axis in 0..3 {
        let d = if qc[axis] < lo[axis] {
            lo[axis] - qc[axis]
        } else if qc[axis] > hi[axis] {
            qc[axis] - hi[axis]
        } else {
            0
        };
        gap = gap.max(d);
    }
    gap
}

/// A cell size that yields roughly cube-root-of-n cells per axis.
///
/// Degenerate clouds (single point, all points equal) fall back to 1.0.
pub fn auto_cell_size(cloud: &PointCloud) -> f64 {
    match cloud.bounding_box() {
        Ok(bb) => {
            let diag = bb.diagonal();
            if diag > 0.0 {
                (diag / (cloud.len() as f64).cbrt()).max(diag * 1e-9)
            } else {
                1.0
            }
        }
        Err(_) => 1.0,
    }
}
