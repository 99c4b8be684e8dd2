//! PLY 1.0 reader and writer.
//!
//! Supported encodings: `ascii` and `binary_little_endian`. The reader
//! understands the vertex properties this pipeline needs (coordinates,
//! colors, intensity, label), skips anything else with a warning, and
//! skips whole foreign elements, list properties included. The writer
//! emits 64-bit coordinates so a written file reproduces its cloud
//! bit-exactly when read back, in either encoding.

use std::fs;
use std::path::Path;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};

use super::{CloudDocument, SourceFormat};

/// Output encoding for [`write_ply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

// ── header model ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PropType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PropType {
    fn from_name(name: &str) -> Option<PropType> {
        Some(match name {
            "char" | "int8" => PropType::I8,
            "uchar" | "uint8" => PropType::U8,
            "short" | "int16" => PropType::I16,
            "ushort" | "uint16" => PropType::U16,
            "int" | "int32" => PropType::I32,
            "uint" | "uint32" => PropType::U32,
            "float" | "float32" => PropType::F32,
            "double" | "float64" => PropType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PropType::I8 | PropType::U8 => 1,
            PropType::I16 | PropType::U16 => 2,
            PropType::I32 | PropType::U32 | PropType::F32 => 4,
            PropType::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, PropType::F32 | PropType::F64)
    }

    fn is_real(self) -> bool {
        matches!(self, PropType::F32 | PropType::F64)
    }
}

#[derive(Debug, Clone, Copy)]
enum PropKind {
    Scalar(PropType),
    List { count: PropType, item: PropType },
}

#[derive(Debug, Clone)]
struct PropDecl {
    name: String,
    kind: PropKind,
    line: usize,
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    props: Vec<PropDecl>,
    line: usize,
}

struct Header {
    encoding: PlyEncoding,
    elements: Vec<ElementDecl>,
    /// Byte offset of the first data byte, just past the end_header line.
    data_start: usize,
    /// 1-based line number of the first data line (ascii token tracking).
    data_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let next_line = |pos: &mut usize, line_no: &mut usize| -> Option<(String, usize)> {
        if *pos >= bytes.len() {
            return None;
        }
        let start = *pos;
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| start + i);
        let (line_end, new_pos) = match end {
            Some(e) => (e, e + 1),
            None => (bytes.len(), bytes.len()),
        };
        *pos = new_pos;
        *line_no += 1;
        let text = String::from_utf8_lossy(&bytes[start..line_end])
            .trim_end()
            .to_owned();
        Some((text, *line_no))
    };

    let (magic, magic_line) = next_line(&mut pos, &mut line_no).ok_or(Error::Parse {
        line: 1,
        message: "empty file is not PLY".into(),
    })?;
    if magic != "ply" {
        return Err(Error::Parse {
            line: magic_line,
            message: "missing `ply` magic line".into(),
        });
    }

    let mut encoding: Option<PlyEncoding> = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        let Some((text, line)) = next_line(&mut pos, &mut line_no) else {
            return Err(Error::Parse {
                line: line_no,
                message: "header ends without `end_header`".into(),
            });
        };
        let mut words = text.split_whitespace();
        let Some(keyword) = words.next() else {
            continue; // tolerate a blank header line
        };
        match keyword {
            "comment" | "obj_info" => {}
            "format" => {
                let enc = words.next().unwrap_or("");
                let version = words.next().unwrap_or("");
                if version != "1.0" {
                    return Err(Error::UnsupportedFormat(format!(
                        "PLY version `{version}` (only 1.0 is supported)"
                    )));
                }
                encoding = Some(match enc {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => {
                        return Err(Error::UnsupportedFormat(format!(
                            "PLY encoding `{other}` (ascii and binary_little_endian are supported)"
                        )))
                    }
                });
            }
            "element" => {
                let name = words.next().unwrap_or("").to_owned();
                let count: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("element `{name}` has no valid count"),
                    })?;
                if elements.iter().any(|e| e.name == name) {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate element `{name}`"),
                    });
                }
                elements.push(ElementDecl {
                    name,
                    count,
                    props: Vec::new(),
                    line,
                });
            }
            "property" => {
                let elem = elements.last_mut().ok_or_else(|| Error::Parse {
                    line,
                    message: "property declared before any element".into(),
                })?;
                let first = words.next().unwrap_or("");
                let (kind, name) = if first == "list" {
                    let count_ty = words.next().unwrap_or("");
                    let item_ty = words.next().unwrap_or("");
                    let count = PropType::from_name(count_ty).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("unknown list count type `{count_ty}`"),
                    })?;
                    if !count.is_integer() {
                        return Err(Error::Parse {
                            line,
                            message: format!("list count type `{count_ty}` is not an integer"),
                        });
                    }
                    let item = PropType::from_name(item_ty).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("unknown list item type `{item_ty}`"),
                    })?;
                    (PropKind::List { count, item }, words.next().unwrap_or(""))
                } else {
                    let ty = PropType::from_name(first).ok_or_else(|| Error::Parse {
                        line,
                        message: format!("unknown property type `{first}`"),
                    })?;
                    (PropKind::Scalar(ty), words.next().unwrap_or(""))
                };
                if name.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "property without a name".into(),
                    });
                }
                if elem.props.iter().any(|p| p.name == name) {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate property `{name}` in element `{}`", elem.name),
                    });
                }
                elem.props.push(PropDecl {
                    name: name.to_owned(),
                    kind,
                    line,
                });
            }
            "end_header" => {
                let encoding = encoding.ok_or(Error::Parse {
                    line,
                    message: "header has no `format` line".into(),
                })?;
                return Ok(Header {
                    encoding,
                    elements,
                    data_start: pos,
                    data_line: line_no + 1,
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown header keyword `{other}`"),
                });
            }
        }
    }
}

// ── vertex property roles ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    X,
    Y,
    Z,
    Red,
    Green,
    Blue,
    Intensity,
    Label,
    Skip,
}

fn vertex_roles(elem: &ElementDecl) -> Result<Vec<Role>> {
    let mut roles = Vec::with_capacity(elem.props.len());
    let mut have_intensity = false;
    let mut have_label = false;
    for prop in &elem.props {
        let scalar = match prop.kind {
            PropKind::Scalar(t) => Some(t),
            PropKind::List { .. } => None,
        };
        let role = match prop.name.as_str() {
            n @ ("x" | "y" | "z") => {
                if !scalar.is_some_and(PropType::is_real) {
                    return Err(Error::Parse {
                        line: prop.line,
                        message: format!("property `{n}` must be a 32- or 64-bit real"),
                    });
                }
                match n {
                    "x" => Role::X,
                    "y" => Role::Y,
                    _ => Role::Z,
                }
            }
            "red" if scalar == Some(PropType::U8) => Role::Red,
            "green" if scalar == Some(PropType::U8) => Role::Green,
            "blue" if scalar == Some(PropType::U8) => Role::Blue,
            "intensity" | "scalar_intensity" if scalar.is_some() && !have_intensity => {
                have_intensity = true;
                Role::Intensity
            }
            "label" | "scalar_label"
                if scalar.is_some_and(PropType::is_integer) && !have_label =>
            {
                have_label = true;
                Role::Label
            }
            _ => Role::Skip,
        };
        roles.push(role);
    }
    for (role, name) in [(Role::X, "x"), (Role::Y, "y"), (Role::Z, "z")] {
        if !roles.contains(&role) {
            return Err(Error::Parse {
                line: elem.line,
                message: format!("vertex element is missing property `{name}`"),
            });
        }
    }
    // Colors only make sense as a full triple; demote partial ones.
    let full_rgb = [Role::Red, Role::Green, Role::Blue]
        .iter()
        .all(|r| roles.contains(r));
    if !full_rgb {
        for r in &mut roles {
            if matches!(r, Role::Red | Role::Green | Role::Blue) {
                *r = Role::Skip;
            }
        }
    }
    Ok(roles)
}

// ── scalar values ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
enum Scalar {
    Int(i64),
    Real(f64),
}

impl Scalar {
    fn as_f64(self) -> f64 {
        match self {
            Scalar::Int(v) => v as f64,
            Scalar::Real(v) => v,
        }
    }
}

fn int_range(t: PropType) -> (i64, i64) {
    match t {
        PropType::I8 => (i8::MIN as i64, i8::MAX as i64),
        PropType::U8 => (0, u8::MAX as i64),
        PropType::I16 => (i16::MIN as i64, i16::MAX as i64),
        PropType::U16 => (0, u16::MAX as i64),
        PropType::I32 => (i32::MIN as i64, i32::MAX as i64),
        PropType::U32 => (0, u32::MAX as i64),
        _ => unreachable!("not an integer type"),
    }
}

// ── ascii data ──────────────────────────────────────────────────────────

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(data: &'a [u8], start: usize, line: usize) -> Self {
        Tokens { data, pos: start, line }
    }

    /// Next whitespace-delimited token with the line it starts on, or
    /// `None` at end of input.
    fn next(&mut self) -> Option<(&'a [u8], usize)> {
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
            if self.data[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
        if self.pos >= self.data.len() {
            return None;
        }
        let start = self.pos;
        let line = self.line;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some((&self.data[start..self.pos], line))
    }
}

fn ascii_scalar(tokens: &mut Tokens, t: PropType, context: &str) -> Result<Scalar> {
    let (raw, line) = tokens.next().ok_or_else(|| Error::Truncated {
        offset: tokens.pos,
        expected: format!("a value for {context}"),
    })?;
    let text = std::str::from_utf8(raw).map_err(|_| Error::Parse {
        line,
        message: format!("non-UTF-8 token for {context}"),
    })?;
    if t.is_integer() {
        let v: i64 = text.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid integer `{text}` for {context}"),
        })?;
        let (lo, hi) = int_range(t);
        if v < lo || v > hi {
            return Err(Error::Parse {
                line,
                message: format!("value {v} out of range for {context}"),
            });
        }
        Ok(Scalar::Int(v))
    } else {
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid number `{text}` for {context}"),
        })?;
        Ok(Scalar::Real(v))
    }
}

// ── binary data ─────────────────────────────────────────────────────────

struct ByteReader<'a> {
    data: &'a [u8],
    /// Absolute byte offset within the whole file, for error reporting.
    offset: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, context: &str) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::Truncated {
                offset: self.offset,
                expected: format!("{n} bytes for {context}"),
            });
        }
        let (head, rest) = self.data.split_at(n);
        self.data = rest;
        self.offset += n;
        Ok(head)
    }
}

fn binary_scalar(reader: &mut ByteReader, t: PropType, context: &str) -> Result<Scalar> {
    let b = reader.take(t.size(), context)?;
    Ok(match t {
        PropType::I8 => Scalar::Int(b[0] as i8 as i64),
        PropType::U8 => Scalar::Int(b[0] as i64),
        PropType::I16 => Scalar::Int(i16::from_le_bytes([b[0], b[1]]) as i64),
        PropType::U16 => Scalar::Int(u16::from_le_bytes([b[0], b[1]]) as i64),
        PropType::I32 => Scalar::Int(i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64),
        PropType::U32 => Scalar::Int(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64),
        PropType::F32 => Scalar::Real(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64),
        PropType::F64 => Scalar::Real(f64::from_le_bytes(b.try_into().unwrap())),
    })
}

// ── reading ─────────────────────────────────────────────────────────────

enum DataSource<'a> {
    Ascii(Tokens<'a>),
    Binary(ByteReader<'a>),
}

impl DataSource<'_> {
    fn scalar(&mut self, t: PropType, context: &str) -> Result<Scalar> {
        match self {
            DataSource::Ascii(tokens) => ascii_scalar(tokens, t, context),
            DataSource::Binary(reader) => binary_scalar(reader, t, context),
        }
    }

    fn position(&self) -> usize {
        match self {
            DataSource::Ascii(tokens) => tokens.pos,
            DataSource::Binary(reader) => reader.offset,
        }
    }

    fn list_len(&mut self, t: PropType, context: &str) -> Result<usize> {
        let v = match self.scalar(t, context)? {
            Scalar::Int(v) => v,
            Scalar::Real(_) => unreachable!("list counts are integer-typed"),
        };
        if v < 0 {
            return Err(Error::Truncated {
                offset: self.position(),
                expected: format!("a non-negative list count for {context}"),
            });
        }
        Ok(v as usize)
    }
}

/// Parses an in-memory PLY file.
pub(crate) fn parse_ply(bytes: &[u8]) -> Result<CloudDocument> {
    let header = parse_header(bytes)?;
    let vertex = header
        .elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or(Error::Parse {
            line: header.data_line.saturating_sub(1),
            message: "file declares no vertex element".into(),
        })?;
    let roles = vertex_roles(vertex)?;
    let has_colors = roles.contains(&Role::Red);
    let has_intensity = roles.contains(&Role::Intensity);
    let has_label = roles.contains(&Role::Label);

    let mut source = match header.encoding {
        PlyEncoding::Ascii => {
            DataSource::Ascii(Tokens::new(bytes, header.data_start, header.data_line))
        }
        PlyEncoding::BinaryLittleEndian => DataSource::Binary(ByteReader {
            data: &bytes[header.data_start..],
            offset: header.data_start,
        }),
    };

    // Capacity guard: a hostile header can claim billions of vertices.
    let cap = |n: usize| n.min(1 << 20);
    let mut points: Vec<Point3> = Vec::with_capacity(cap(vertex.count));
    let mut colors: Vec<[u8; 3]> = Vec::with_capacity(if has_colors { cap(vertex.count) } else { 0 });
    let mut intensities: Vec<f64> =
        Vec::with_capacity(if has_intensity { cap(vertex.count) } else { 0 });
    let mut labels: Vec<i32> = Vec::with_capacity(if has_label { cap(vertex.count) } else { 0 });

    for elem in &header.elements {
        if elem.name == "vertex" {
            for i in 0..elem.count {
                let mut coord = [0.0f64; 3];
                let mut rgb = [0u8; 3];
                let mut intensity = 0.0f64;
                let mut label = 0i32;
                for (prop, &role) in elem.props.iter().zip(&roles) {
                    let context = format!("property `{}` of vertex {i}", prop.name);
                    match prop.kind {
                        PropKind::Scalar(t) => {
                            let value = source.scalar(t, &context)?;
                            match role {
                                Role::X => coord[0] = value.as_f64(),
                                Role::Y => coord[1] = value.as_f64(),
                                Role::Z => coord[2] = value.as_f64(),
                                Role::Red | Role::Green | Role::Blue => {
                                    // Role assignment guarantees U8 here.
                                    let Scalar::Int(v) = value else { unreachable!() };
                                    let slot = match role {
                                        Role::Red => 0,
                                        Role::Green => 1,
                                        _ => 2,
                                    };
                                    rgb[slot] = v as u8;
                                }
                                Role::Intensity => intensity = value.as_f64(),
                                Role::Label => {
                                    let Scalar::Int(v) = value else { unreachable!() };
                                    label = i32::try_from(v).map_err(|_| Error::Truncated {
                                        offset: source.position(),
                                        expected: format!(
                                            "a 32-bit signed value for {context}, got {v}"
                                        ),
                                    })?;
                                }
                                Role::Skip => {}
                            }
                        }
                        PropKind::List { count, item } => {
                            let n = source.list_len(count, &context)?;
                            for _ in 0..n {
                                source.scalar(item, &context)?;
                            }
                        }
                    }
                }
                points.push(Point3::new(coord[0], coord[1], coord[2]));
                if has_colors {
                    colors.push(rgb);
                }
                if has_intensity {
                    intensities.push(intensity);
                }
                if has_label {
                    labels.push(label);
                }
            }
        } else {
            // Foreign element: consume and discard every value.
            for i in 0..elem.count {
                for prop in &elem.props {
                    let context = format!("property `{}` of {} {i}", prop.name, elem.name);
                    match prop.kind {
                        PropKind::Scalar(t) => {
                            source.scalar(t, &context)?;
                        }
                        PropKind::List { count, item } => {
                            let n = source.list_len(count, &context)?;
                            for _ in 0..n {
                                source.scalar(item, &context)?;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut cloud = PointCloud::new(points)?;
    if has_colors {
        cloud.set_colors(colors)?;
    }
    if has_intensity {
        cloud.set_intensities(intensities)?;
    }
    if has_label {
        cloud.set_labels(labels)?;
    }
    let skipped: Vec<String> = vertex
        .props
        .iter()
        .zip(&roles)
        .filter(|&(_, &role)| role == Role::Skip)
        .map(|(p, _)| p.name.clone())
        .collect();
    Ok(CloudDocument {
        cloud,
        format: match header.encoding {
            PlyEncoding::Ascii => SourceFormat::PlyAscii,
            PlyEncoding::BinaryLittleEndian => SourceFormat::PlyBinaryLittleEndian,
        },
        property_names: vertex.props.iter().map(|p| p.name.clone()).collect(),
        skipped_properties: skipped,
        extra_int_columns: Vec::new(),
    })
}

/// Reads a PLY file from disk.
pub fn read_ply(path: impl AsRef<Path>) -> Result<CloudDocument> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

// ── writing ─────────────────────────────────────────────────────────────

/// Serializes a document to PLY bytes.
pub(crate) fn render_ply(doc: &CloudDocument, encoding: PlyEncoding) -> Result<Vec<u8>> {
    doc.validate_extra_columns()?;
    let cloud = &doc.cloud;
    let mut out = Vec::new();
    out.extend_from_slice(b"ply\n");
    out.extend_from_slice(match encoding {
        PlyEncoding::Ascii => b"format ascii 1.0\n".as_slice(),
        PlyEncoding::BinaryLittleEndian => b"format binary_little_endian 1.0\n".as_slice(),
    });
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for axis in ["x", "y", "z"] {
        out.extend_from_slice(format!("property double {axis}\n").as_bytes());
    }
    if cloud.colors().is_some() {
        for c in ["red", "green", "blue"] {
            out.extend_from_slice(format!("property uchar {c}\n").as_bytes());
        }
    }
    if cloud.intensities().is_some() {
        out.extend_from_slice(b"property double intensity\n");
    }
    if cloud.labels().is_some() {
        out.extend_from_slice(b"property int label\n");
    }
    for (name, _) in &doc.extra_int_columns {
        out.extend_from_slice(format!("property int {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    for (i, p) in cloud.points().iter().enumerate() {
        match encoding {
            PlyEncoding::Ascii => {
                let mut row = format!("{} {} {}", p.x, p.y, p.z);
                if let Some(colors) = cloud.colors() {
                    let [r, g, b] = colors[i];
                    row.push_str(&format!(" {r} {g} {b}"));
                }
                if let Some(intensities) = cloud.intensities() {
                    row.push_str(&format!(" {}", intensities[i]));
                }
                if let Some(labels) = cloud.labels() {
                    row.push_str(&format!(" {}", labels[i]));
                }
                for (_, column) in &doc.extra_int_columns {
                    row.push_str(&format!(" {}", column[i]));
                }
                row.push('\n');
                out.extend_from_slice(row.as_bytes());
            }
            PlyEncoding::BinaryLittleEndian => {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
                out.extend_from_slice(&p.z.to_le_bytes());
                if let Some(colors) = cloud.colors() {
                    out.extend_from_slice(&colors[i]);
                }
                if let Some(intensities) = cloud.intensities() {
                    out.extend_from_slice(&intensities[i].to_le_bytes());
                }
                if let Some(labels) = cloud.labels() {
                    out.extend_from_slice(&labels[i].to_le_bytes());
                }
                for (_, column) in &doc.extra_int_columns {
                    out.extend_from_slice(&column[i].to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

/// Writes a document to disk as PLY.
pub fn write_ply(doc: &CloudDocument, path: impl AsRef<Path>, encoding: PlyEncoding) -> Result<()> {
    let path = path.as_ref();
    let bytes = render_ply(doc, encoding)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-100.0..100.0),
                        rng.gen_range(-100.0..100.0),
                        rng.gen_range(-100.0..100.0),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ascii_two_vertex_fixture() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    end_header\n0 0 0\n1 2 3\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(doc.cloud.len(), 2);
        assert_eq!(doc.cloud.points()[1], Point3::new(1.0, 2.0, 3.0));
        assert!(doc.cloud.colors().is_none());
        assert!(doc.cloud.labels().is_none());
        assert_eq!(doc.format, SourceFormat::PlyAscii);
        assert_eq!(doc.property_names, ["x", "y", "z"]);
        assert!(doc.skipped_properties.is_empty());
    }

    #[test]
    fn both_encodings_parse_to_the_same_cloud() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 3.0),
        ])
        .unwrap();
        let doc = CloudDocument::from_cloud(cloud);
        let ascii = render_ply(&doc, PlyEncoding::Ascii).unwrap();
        let binary = render_ply(&doc, PlyEncoding::BinaryLittleEndian).unwrap();
        let a = parse_ply(&ascii).unwrap();
        let b = parse_ply(&binary).unwrap();
        assert_eq!(a.cloud.points(), b.cloud.points());
        assert_eq!(a.format, SourceFormat::PlyAscii);
        assert_eq!(b.format, SourceFormat::PlyBinaryLittleEndian);
    }

    #[test]
    fn header_claiming_more_vertices_than_present_is_truncation() {
        let text = "ply\nformat ascii 1.0\nelement vertex 5\n\
                    property float x\nproperty float y\nproperty float z\n\
                    end_header\n0 0 0\n1 1 1\n2 2 2\n3 3 3\n";
        match parse_ply(text.as_bytes()) {
            Err(Error::Truncated { expected, .. }) => {
                assert!(expected.contains("vertex 4"), "unhelpful message: {expected}");
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn binary_truncation_names_the_byte_offset() {
        let cloud = random_cloud(3, 1);
        let doc = CloudDocument::from_cloud(cloud);
        let mut bytes = render_ply(&doc, PlyEncoding::BinaryLittleEndian).unwrap();
        let full = bytes.len();
        bytes.truncate(full - 5);
        match parse_ply(&bytes) {
            Err(Error::Truncated { offset, .. }) => {
                assert!(offset <= full, "offset {offset} beyond file size {full}");
                assert!(offset > 0);
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn binary_roundtrip_with_labels_is_exact() {
        let mut cloud = random_cloud(3, 2);
        cloud.set_labels(vec![4, -1, 7]).unwrap();
        let doc = CloudDocument::from_cloud(cloud.clone());
        let bytes = render_ply(&doc, PlyEncoding::BinaryLittleEndian).unwrap();
        let back = parse_ply(&bytes).unwrap();
        assert_eq!(back.cloud.points(), cloud.points());
        assert_eq!(back.cloud.labels(), cloud.labels());
    }

    #[test]
    fn empty_cloud_roundtrips_with_zero_count() {
        let doc = CloudDocument::from_cloud(PointCloud::new(vec![]).unwrap());
        let bytes = render_ply(&doc, PlyEncoding::Ascii).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("element vertex 0"));
        let back = parse_ply(&bytes).unwrap();
        assert_eq!(back.cloud.len(), 0);
    }

    #[test]
    fn ascii_roundtrip_of_random_points_is_exact() {
        // The contract asks for < 1e-6 deviation; shortest-roundtrip
        // decimal rendering actually reproduces every bit.
        let cloud = random_cloud(1000, 3);
        let doc = CloudDocument::from_cloud(cloud.clone());
        let bytes = render_ply(&doc, PlyEncoding::Ascii).unwrap();
        let back = parse_ply(&bytes).unwrap();
        assert_eq!(back.cloud.points(), cloud.points());
    }

    #[test]
    fn colors_and_intensity_roundtrip_in_both_encodings() {
        let mut cloud = random_cloud(50, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        cloud
            .set_colors((0..50).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect())
            .unwrap();
        cloud
            .set_intensities((0..50).map(|_| rng.gen_range(0.0..1.0)).collect())
            .unwrap();
        let doc = CloudDocument::from_cloud(cloud.clone());
        for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let back = parse_ply(&render_ply(&doc, encoding).unwrap()).unwrap();
            assert_eq!(back.cloud.points(), cloud.points());
            assert_eq!(back.cloud.colors(), cloud.colors());
            assert_eq!(back.cloud.intensities(), cloud.intensities());
        }
    }

    #[test]
    fn unknown_property_is_skipped_with_warning() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property float nx\n\
                    end_header\n1 2 3 0.5\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(doc.cloud.points()[0], Point3::new(1.0, 2.0, 3.0));
        assert_eq!(doc.skipped_properties, ["nx"]);
        assert_eq!(doc.property_names, ["x", "y", "z", "nx"]);
    }

    #[test]
    fn big_endian_is_rejected_as_unsupported() {
        let text = "ply\nformat binary_big_endian 1.0\nelement vertex 0\n\
                    property float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::UnsupportedFormat(msg)) if msg.contains("binary_big_endian")
        ));
    }

    #[test]
    fn unknown_version_is_rejected_as_unsupported() {
        let text = "ply\nformat ascii 2.0\nend_header\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::UnsupportedFormat(msg)) if msg.contains("2.0")
        ));
    }

    #[test]
    fn missing_coordinate_property_is_a_parse_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float z\nend_header\n0 0\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::Parse { message, .. }) if message.contains("`y`")
        ));
    }

    #[test]
    fn integer_typed_coordinate_is_a_parse_error() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property int x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::Parse { message, .. }) if message.contains("`x`")
        ));
    }

    #[test]
    fn bad_magic_is_a_parse_error() {
        assert!(matches!(
            parse_ply(b"plx\nformat ascii 1.0\nend_header\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn foreign_elements_are_skipped_in_ascii() {
        let text = "ply\nformat ascii 1.0\n\
                    element camera 1\nproperty float fov\n\
                    element vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    element face 2\nproperty list uchar int vertex_indices\n\
                    end_header\n\
                    1.25\n\
                    0 0 0\n1 1 1\n\
                    3 0 1 0\n2 1 0\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(doc.cloud.len(), 2);
        assert_eq!(doc.cloud.points()[1], Point3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn foreign_elements_are_skipped_in_binary() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\n\
              element camera 1\nproperty float fov\n\
              element vertex 1\n\
              property double x\nproperty double y\nproperty double z\n\
              element face 1\nproperty list uchar short indices\n\
              end_header\n",
        );
        bytes.extend_from_slice(&1.25f32.to_le_bytes());
        for v in [4.0f64, 5.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.push(2); // list of two shorts
        bytes.extend_from_slice(&7i16.to_le_bytes());
        bytes.extend_from_slice(&8i16.to_le_bytes());
        let doc = parse_ply(&bytes).unwrap();
        assert_eq!(doc.cloud.points(), &[Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn non_finite_coordinate_is_rejected() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    end_header\nnan 0 0\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::NonFiniteCoordinate { index: 0 })
        ));
    }

    #[test]
    fn label_may_use_any_integer_type_and_alias_name() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar scalar_label\n\
                    end_header\n0 0 0 3\n1 1 1 250\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(doc.cloud.labels(), Some([3, 250].as_slice()));
    }

    #[test]
    fn intensity_alias_and_integer_storage_are_accepted() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property ushort scalar_intensity\n\
                    end_header\n0 0 0 512\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(doc.cloud.intensities(), Some([512.0].as_slice()));
    }

    #[test]
    fn partial_rgb_is_demoted_to_skipped() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\n\
                    end_header\n0 0 0 200\n";
        let doc = parse_ply(text.as_bytes()).unwrap();
        assert!(doc.cloud.colors().is_none());
        assert_eq!(doc.skipped_properties, ["red"]);
    }

    #[test]
    fn out_of_range_ascii_color_cites_its_line() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\n\
                    property float x\nproperty float y\nproperty float z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\n\
                    end_header\n0 0 0 300 0 0\n";
        assert!(matches!(
            parse_ply(text.as_bytes()),
            Err(Error::Parse { line: 11, .. })
        ));
    }

    #[test]
    fn extra_int_columns_are_written_and_skipped_on_read() {
        let cloud = random_cloud(3, 5);
        let mut doc = CloudDocument::from_cloud(cloud.clone());
        doc.extra_int_columns
            .push(("segment".into(), vec![0, 1, -1]));
        for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let bytes = render_ply(&doc, encoding).unwrap();
            let back = parse_ply(&bytes).unwrap();
            assert_eq!(back.cloud.points(), cloud.points());
            assert_eq!(back.skipped_properties, ["segment"]);
        }
        let ascii = String::from_utf8(render_ply(&doc, PlyEncoding::Ascii).unwrap()).unwrap();
        assert!(ascii.contains("property int segment"));
    }

    #[test]
    fn file_reader_reports_missing_file_as_io_error() {
        assert!(matches!(
            read_ply("/nonexistent/cloud.ply"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn disk_roundtrip_through_real_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cloud = random_cloud(20, 6);
        cloud.set_labels((0..20).map(|i| i % 5).collect()).unwrap();
        let doc = CloudDocument::from_cloud(cloud.clone());
        for (name, encoding) in [
            ("a.ply", PlyEncoding::Ascii),
            ("b.ply", PlyEncoding::BinaryLittleEndian),
        ] {
            let path = dir.path().join(name);
            write_ply(&doc, &path, encoding).unwrap();
            let back = read_ply(&path).unwrap();
            assert_eq!(back.cloud.points(), cloud.points());
            assert_eq!(back.cloud.labels(), cloud.labels());
        }
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..512)) {
            let _ = parse_ply(&bytes);
        }

        #[test]
        fn mutated_valid_files_never_panic(
            seed in 0u64..50,
            cut in 0usize..400,
            flip_at in 0usize..400,
            flip_to in proptest::prelude::any::<u8>(),
        ) {
            let cloud = random_cloud(8, seed);
            let doc = CloudDocument::from_cloud(cloud);
            for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
                let mut bytes = render_ply(&doc, encoding).unwrap();
                if flip_at < bytes.len() {
                    bytes[flip_at] = flip_to;
                }
                bytes.truncate(bytes.len().saturating_sub(cut));
                let _ = parse_ply(&bytes);
            }
        }
    }
}
