//! File formats: PLY and XYZ point clouds, network weights, JSON reports.
//!
//! Readers return a [`CloudDocument`] wrapping the parsed cloud together
//! with provenance: which format it came from, the per-point property
//! names as declared, and any properties that were skipped. Writers accept
//! the same document type, so read → process → write pipelines carry
//! attributes through without re-plumbing.
//!
//! Every reader returns structured errors on malformed input; none panic
//! on arbitrary bytes.

mod ply;
mod weights;
mod xyz;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub use ply::{read_ply, write_ply, PlyEncoding};
pub use weights::{read_weights, write_weights, WeightLayer, WeightsFile};
pub use xyz::{read_xyz, write_xyz};

/// Which carrier a [`CloudDocument`] came from (or is destined for).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    PlyAscii,
    PlyBinaryLittleEndian,
    Xyz,
    /// Built in memory rather than parsed from a file.
    InMemory,
}

/// A point cloud plus file-level context.
#[derive(Debug, Clone)]
pub struct CloudDocument {
    pub cloud: PointCloud,
    pub format: SourceFormat,
    /// Per-point property names in declaration order, as read.
    pub property_names: Vec<String>,
    /// Properties present in the file but not understood; skipped with a
    /// warning rather than failing the parse.
    pub skipped_properties: Vec<String>,
    /// Extra integer columns to append when writing PLY (for example a
    /// per-point segment id). Each vector must match the point count.
    pub extra_int_columns: Vec<(String, Vec<i32>)>,
}

impl CloudDocument {
    /// Wraps an in-memory cloud, deriving property names from whichever
    /// attributes are present.
    pub fn from_cloud(cloud: PointCloud) -> Self {
        let mut names: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        if cloud.colors().is_some() {
            names.extend(["red", "green", "blue"].iter().map(|s| s.to_string()));
        }
        if cloud.intensities().is_some() {
            names.push("intensity".to_owned());
        }
        if cloud.labels().is_some() {
            names.push("label".to_owned());
        }
        CloudDocument {
            cloud,
            format: SourceFormat::InMemory,
            property_names: names,
            skipped_properties: Vec::new(),
            extra_int_columns: Vec::new(),
        }
    }

    fn validate_extra_columns(&self) -> Result<()> {
        let n = self.cloud.len();
        for (name, column) in &self.extra_int_columns {
            if column.len() != n {
                return Err(Error::invalid(
                    "extra_int_columns",
                    format!("column `{name}` has {} entries for {n} points", column.len()),
                ));
            }
        }
        let mut seen: Vec<&str> = self.property_names.iter().map(String::as_str).collect();
        for (name, _) in &self.extra_int_columns {
            if seen.contains(&name.as_str()) {
                return Err(Error::invalid(
                    "extra_int_columns",
                    format!("duplicate property name `{name}`"),
                ));
            }
            seen.push(name);
        }
        Ok(())
    }
}

/// Serializes any report as pretty-printed UTF-8 JSON with a trailing
/// newline. Key order follows the struct's field order, so repeated runs
/// produce byte-identical files.
pub fn write_report_json<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).map_err(|e| {
        Error::invalid("report", format!("not serializable as JSON: {e}"))
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cleaning::CleaningReport;
    use crate::cloud::Point3;

    fn tiny_cloud() -> PointCloud {
        PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 3.0),
        ])
        .unwrap()
    }

    #[test]
    fn document_from_cloud_lists_attribute_properties() {
        let mut cloud = tiny_cloud();
        cloud.set_labels(vec![1, 2]).unwrap();
        let doc = CloudDocument::from_cloud(cloud);
        assert_eq!(doc.property_names, ["x", "y", "z", "label"]);
        assert_eq!(doc.format, SourceFormat::InMemory);
        assert!(doc.skipped_properties.is_empty());
    }

    #[test]
    fn extra_column_validation_checks_length_and_name_clash() {
        let mut doc = CloudDocument::from_cloud(tiny_cloud());
        doc.extra_int_columns.push(("segment".into(), vec![0]));
        assert!(doc.validate_extra_columns().is_err());
        doc.extra_int_columns[0].1.push(1);
        assert!(doc.validate_extra_columns().is_ok());
        doc.extra_int_columns.push(("x".into(), vec![0, 0]));
        assert!(doc.validate_extra_columns().is_err());
    }

    #[test]
    fn report_json_roundtrips_and_ends_with_newline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = CleaningReport::new("zscore", 598_000, 9_567, vec![]).unwrap();
        write_report_json(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["total_points"], 598_000);
        assert_eq!(value["removed_points"], 9_567);
        let portion = value["cleaning_portion_percent"].as_f64().unwrap();
        assert!((portion - 1.599_832).abs() < 1e-4);
    }

    #[test]
    fn report_json_key_order_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let report = CleaningReport::new("radius", 100, 7, vec![]).unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        write_report_json(&report, &a).unwrap();
        write_report_json(&report, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        let total = text.find("total_points").unwrap();
        let removed = text.find("removed_points").unwrap();
        let portion = text.find("cleaning_portion_percent").unwrap();
        assert!(total < removed && removed < portion);
    }

    #[test]
    fn report_json_to_unwritable_path_is_an_io_error() {
        let report = CleaningReport::new("zscore", 10, 0, vec![]).unwrap();
        let err = write_report_json(&report, "/nonexistent-dir/report.json").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
