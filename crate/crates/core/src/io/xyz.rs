//! Whitespace-separated XYZ text files.
//!
//! Column layouts: 3 (coordinates), 6 (plus 0-255 RGB), or 7 (plus
//! intensity). `#`-prefixed and blank lines are ignored. Every data row
//! must use the same layout.

use std::fs;
use std::path::Path;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

use super::{CloudDocument, SourceFormat};

fn parse_coord(token: &str, line: usize) -> Result<f64> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number `{token}`"),
    })
}

fn parse_channel(token: &str, line: usize) -> Result<u8> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid color value `{token}` (expected 0-255)"),
    })
}

/// Parses in-memory XYZ text.
pub(crate) fn parse_xyz(text: &str) -> Result<CloudDocument> {
    let mut points = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut intensities: Vec<f64> = Vec::new();
    let mut layout: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match layout {
            None => {
                if !matches!(tokens.len(), 3 | 6 | 7) {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "row has {} columns; expected 3 (xyz), 6 (xyz rgb), or 7 (xyz rgb intensity)",
                            tokens.len()
                        ),
                    });
                }
                layout = Some(tokens.len());
            }
            Some(n) if n != tokens.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("row has {} columns; earlier rows have {n}", tokens.len()),
                });
            }
            Some(_) => {}
        }
        points.push(Point3::new(
            parse_coord(tokens[0], line)?,
            parse_coord(tokens[1], line)?,
            parse_coord(tokens[2], line)?,
        ));
        if tokens.len() >= 6 {
            colors.push([
                parse_channel(tokens[3], line)?,
                parse_channel(tokens[4], line)?,
                parse_channel(tokens[5], line)?,
            ]);
        }
        if tokens.len() == 7 {
            intensities.push(parse_coord(tokens[6], line)?);
        }
    }
    let mut cloud = PointCloud::new(points)?;
    let mut names = vec!["x".to_owned(), "y".to_owned(), "z".to_owned()];
    if layout.unwrap_or(3) >= 6 {
        cloud.set_colors(colors)?;
        names.extend(["red", "green", "blue"].iter().map(|s| s.to_string()));
    }
    if layout == Some(7) {
        cloud.set_intensities(intensities)?;
        names.push("intensity".to_owned());
    }
    Ok(CloudDocument {
        cloud,
        format: SourceFormat::Xyz,
        property_names: names,
        skipped_properties: Vec::new(),
        extra_int_columns: Vec::new(),
    })
}

/// Reads an XYZ text file from disk.
pub fn read_xyz(path: impl AsRef<Path>) -> Result<CloudDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text)
}

/// Serializes a document as XYZ text.
///
/// Labels have no column in this format and are not written; intensity
/// requires the 7-column layout and therefore colors.
pub(crate) fn render_xyz(doc: &CloudDocument) -> Result<String> {
    let cloud = &doc.cloud;
    if cloud.intensities().is_some() && cloud.colors().is_none() {
        return Err(Error::invalid(
            "doc",
            "XYZ cannot store intensity without colors (7-column layout)",
        ));
    }
    let mut out = String::new();
    for (i, p) in cloud.points().iter().enumerate() {
        out.push_str(&format!("{} {} {}", p.x, p.y, p.z));
        if let Some(colors) = cloud.colors() {
            let [r, g, b] = colors[i];
            out.push_str(&format!(" {r} {g} {b}"));
        }
        if let Some(intensities) = cloud.intensities() {
            out.push_str(&format!(" {}", intensities[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes a document to disk as XYZ text.
pub fn write_xyz(doc: &CloudDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_xyz(doc)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
