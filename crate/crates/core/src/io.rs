//! File formats.
//!
//! * Cornell rectangles: four `x y` lines per rectangle.
//! * Jacquard grasps: one `x;y;theta_deg;opening;jaw` per line.
//! * DDHM: little-endian container for the eight map channels.
//! * Predictions: `image_id x1 y1 x2 y2 score` lines.
//! * Scenes: one `x y` vertex per line.
//!
//! Text formats accept blank lines and `#` comments unless noted.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{reduce_mod_pi, DoubleDotGrasp, OrientedRect, Point2};
use crate::raster::{GraspMaps, Raster, CHANNEL_NAMES};
use crate::scalar::Real;
use crate::sim::{PolygonScene, SimError};

pub const DDHM_MAGIC: &[u8; 4] = b"DDHM";
pub const DDHM_VERSION: u32 = 1;
pub const DDHM_CHANNELS: u32 = 8;
pub const DDHM_HEADER_LEN: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("DDHM {field}: {message}")]
    Ddhm { field: &'static str, message: String },
    #[error("file is not valid UTF-8")]
    Encoding,
    #[error("scene: {0}")]
    Scene(#[from] SimError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

fn ddhm_err(field: &'static str, message: impl Into<String>) -> FormatError {
    FormatError::Ddhm { field, message: message.into() }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(bytes: &[u8]) -> Result<Vec<(usize, &str)>, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|_| FormatError::Encoding)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

/// Decimal float; `NaN` is accepted, infinities are not.
fn parse_float(token: &str, line: usize) -> Result<f64, FormatError> {
    let v: f64 = token.parse().map_err(|_| parse_err(line, format!("malformed number {token:?}")))?;
    if v.is_infinite() {
        return Err(parse_err(line, format!("non-finite number {token:?}")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFormat {
    Cornell,
    Jacquard,
}

/// Which Cornell edge spans a gripper plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlateEdge {
    /// Vertices 1–2 (and 3–4) lie along a plate.
    #[default]
    V12,
    /// Vertices 2–3 (and 4–1) lie along a plate.
    V23,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet<T> {
    pub image_id: String,
    pub grasps: Vec<OrientedRect<T>>,
    pub format: AnnotationFormat,
    /// Groups dropped because they contained NaN coordinates.
    pub skipped: usize,
}

fn rect_from_quad<T: Real>(v: [Point2<f64>; 4], plate: PlateEdge, line: usize) -> Result<OrientedRect<T>, FormatError> {
    let center = Point2::new((v[0].x + v[1].x + v[2].x + v[3].x) / 4.0, (v[0].y + v[1].y + v[2].y + v[3].y) / 4.0);
    let (plate_a, plate_b, open_a, open_b) = match plate {
        PlateEdge::V12 => ((v[0], v[1]), (v[2], v[3]), (v[1], v[2]), (v[3], v[0])),
        PlateEdge::V23 => ((v[1], v[2]), (v[3], v[0]), (v[0], v[1]), (v[2], v[3])),
    };
    let h = 0.5 * (plate_a.0.distance(plate_a.1) + plate_b.0.distance(plate_b.1));
    let w = 0.5 * (open_a.0.distance(open_a.1) + open_b.0.distance(open_b.1));
    // Opening axis is perpendicular to the first plate edge.
    let theta = reduce_mod_pi((plate_a.1 - plate_a.0).angle() + std::f64::consts::FRAC_PI_2);
    OrientedRect::new(center, w, h, theta)
        .map(|r| r.cast())
        .map_err(|e| parse_err(line, format!("degenerate rectangle: {e}")))
}

/// Cornell-style positive rectangle file.
pub fn parse_cornell<T: Real>(bytes: &[u8], image_id: &str, plate: PlateEdge) -> Result<AnnotationSet<T>, FormatError> {
    let lines = content_lines(bytes)?;
    if lines.len() % 4 != 0 {
        let last = lines.last().map_or(0, |l| l.0);
        return Err(parse_err(last, format!("{} vertex lines is not a multiple of 4", lines.len())));
    }
    let mut grasps = Vec::with_capacity(lines.len() / 4);
    let mut skipped = 0;
    for group in lines.chunks(4) {
        let mut quad = [Point2::new(0.0, 0.0); 4];
        let mut has_nan = false;
        for (k, &(line, text)) in group.iter().enumerate() {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(line, format!("expected 2 fields, found {}", fields.len())));
            }
            let (x, y) = (parse_float(fields[0], line)?, parse_float(fields[1], line)?);
            has_nan |= x.is_nan() || y.is_nan();
            quad[k] = Point2::new(x, y);
        }
        if has_nan {
            skipped += 1;
            continue;
        }
        grasps.push(rect_from_quad(quad, plate, group[0].0)?);
    }
    Ok(AnnotationSet { image_id: image_id.to_string(), grasps, format: AnnotationFormat::Cornell, skipped })
}

/// Jacquard-style grasp file. With `theta_flip` the angle's sign is negated
/// to move from y-up annotation axes to the y-down image frame.
pub fn parse_jacquard<T: Real>(
    bytes: &[u8],
    image_id: &str,
    theta_flip: bool,
) -> Result<AnnotationSet<T>, FormatError> {
    let mut grasps = Vec::new();
    for (line, text) in content_lines(bytes)? {
        let fields: Vec<&str> = text.split(';').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 5];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = parse_float(f, line)?;
            if slot.is_nan() {
                return Err(parse_err(line, "NaN field"));
            }
        }
        let [x, y, deg, opening, jaw] = v;
        let theta = if theta_flip { -deg.to_radians() } else { deg.to_radians() };
        let rect =
            OrientedRect::new(Point2::new(x, y), opening, jaw, theta).map_err(|e| parse_err(line, e.to_string()))?;
        grasps.push(rect.cast());
    }
    Ok(AnnotationSet { image_id: image_id.to_string(), grasps, format: AnnotationFormat::Jacquard, skipped: 0 })
}

/// Serializes maps as DDHM. Values are stored as `f32`.
pub fn write_ddhm<T: Real>(maps: &GraspMaps<T>, stride: u32) -> Vec<u8> {
    let (h, w) = maps.shape();
    let mut out = Vec::with_capacity(DDHM_HEADER_LEN + 8 * h * w * 4);
    out.extend_from_slice(DDHM_MAGIC);
    for v in [DDHM_VERSION, h as u32, w as u32, DDHM_CHANNELS, stride] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for ch in maps.channels() {
        for &v in ch.as_slice() {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses a DDHM file into maps and stride.
pub fn read_ddhm<T: Real>(bytes: &[u8]) -> Result<(GraspMaps<T>, u32), FormatError> {
    if bytes.len() < DDHM_HEADER_LEN {
        return Err(ddhm_err("header", format!("{} bytes, need {DDHM_HEADER_LEN}", bytes.len())));
    }
    if &bytes[0..4] != DDHM_MAGIC {
        return Err(ddhm_err("magic", format!("{:?}", &bytes[0..4])));
    }
    let version = read_u32(bytes, 4);
    if version != DDHM_VERSION {
        return Err(ddhm_err("version", format!("{version}, expected {DDHM_VERSION}")));
    }
    let (h, w) = (read_u32(bytes, 8) as usize, read_u32(bytes, 12) as usize);
    let channels = read_u32(bytes, 16);
    if channels != DDHM_CHANNELS {
        return Err(ddhm_err("channel_count", format!("{channels}, expected {DDHM_CHANNELS}")));
    }
    let stride = read_u32(bytes, 20);
    if stride == 0 {
        return Err(ddhm_err("stride", "must be >= 1"));
    }
    let plane = h.checked_mul(w).ok_or_else(|| ddhm_err("payload length", "dimensions overflow"))?;
    let expected = plane
        .checked_mul(8 * 4)
        .and_then(|p| p.checked_add(DDHM_HEADER_LEN))
        .ok_or_else(|| ddhm_err("payload length", "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(ddhm_err("payload length", format!("file has {} bytes, header implies {expected}", bytes.len())));
    }
    let mut planes: Vec<Raster<T>> = Vec::with_capacity(8);
    for (c, name) in CHANNEL_NAMES.iter().copied().enumerate() {
        let base = DDHM_HEADER_LEN + c * plane * 4;
        let mut data = Vec::with_capacity(plane);
        for i in 0..plane {
            let at = base + i * 4;
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(ddhm_err(name, format!("non-finite value at index {i}")));
            }
            if c < 2 && !(0.0..=1.0).contains(&v) {
                return Err(ddhm_err(name, format!("score {v} outside [0, 1] at index {i}")));
            }
            data.push(T::from_f32(v).unwrap());
        }
        planes.push(Raster::from_vec(h, w, data));
    }
    let planes: [Raster<T>; 8] = planes.try_into().ok().unwrap();
    Ok((GraspMaps::from_channels(planes).unwrap(), stride))
}

/// All scored grasps for one image. An empty list is a valid record.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord<T> {
    pub image_id: String,
    pub grasps: Vec<(DoubleDotGrasp<T>, T)>,
}

impl<T: Real> PredictionRecord<T> {
    pub fn top(&self) -> Option<&(DoubleDotGrasp<T>, T)> {
        self.grasps.first()
    }
}

/// Writes records in order; each image's grasps are sorted by descending
/// score (stable). An image without grasps is written as a bare id line.
pub fn write_predictions<T: Real>(records: &[PredictionRecord<T>]) -> String {
    let mut out = String::new();
    for r in records {
        if r.grasps.is_empty() {
            writeln!(out, "{}", r.image_id).unwrap();
            continue;
        }
        let mut sorted = r.grasps.clone();
        sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        for (g, s) in sorted {
            writeln!(
                out,
                "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
                r.image_id,
                g.c1.x.as_f64(),
                g.c1.y.as_f64(),
                g.c2.x.as_f64(),
                g.c2.y.as_f64(),
                s.as_f64()
            )
            .unwrap();
        }
    }
    out
}

/// Parses prediction lines. Lines of one image must be contiguous and in
/// non-increasing score order.
pub fn read_predictions<T: Real>(bytes: &[u8]) -> Result<Vec<PredictionRecord<T>>, FormatError> {
    let mut records: Vec<PredictionRecord<T>> = Vec::new();
    for (line, text) in content_lines(bytes)? {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let id = fields[0];
        let continuing = records.last().is_some_and(|r| r.image_id == id);
        if !continuing && records.iter().any(|r| r.image_id == id) {
            return Err(parse_err(line, format!("lines for image {id:?} are not contiguous")));
        }
        if !continuing {
            records.push(PredictionRecord { image_id: id.to_string(), grasps: Vec::new() });
        }
        let rec = records.last_mut().unwrap();
        match fields.len() {
            1 => {
                if continuing {
                    return Err(parse_err(line, "bare image id after grasp lines"));
                }
            }
            6 => {
                let mut v = [0.0; 5];
                for (slot, f) in v.iter_mut().zip(&fields[1..]) {
                    *slot = parse_float(f, line)?;
                    if slot.is_nan() {
                        return Err(parse_err(line, "NaN field"));
                    }
                }
                let g = DoubleDotGrasp::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3]))
                    .map_err(|e| parse_err(line, e.to_string()))?;
                if let Some(&(_, prev)) = rec.grasps.last() {
                    if T::lit(v[4]) > prev {
                        return Err(parse_err(line, "scores not sorted in descending order"));
                    }
                }
                rec.grasps.push((g.cast(), T::lit(v[4])));
            }
            n => return Err(parse_err(line, format!("expected 1 or 6 fields, found {n}"))),
        }
    }
    Ok(records)
}

pub fn write_scene<T: Real>(scene: &PolygonScene<T>) -> String {
    let mut out = format!("# scene seed {}\n", scene.seed);
    for p in scene.vertices() {
        writeln!(out, "{} {}", p.x.as_f64(), p.y.as_f64()).unwrap();
    }
    out
}

/// Vertex list; the polygon must be simple and counterclockwise.
pub fn read_scene<T: Real>(bytes: &[u8], seed: u64) -> Result<PolygonScene<T>, FormatError> {
    let mut vertices = Vec::new();
    for (line, text) in content_lines(bytes)? {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, found {}", fields.len())));
        }
        let (x, y) = (parse_float(fields[0], line)?, parse_float(fields[1], line)?);
        if x.is_nan() || y.is_nan() {
            return Err(parse_err(line, "NaN coordinate"));
        }
        vertices.push(Point2::new(T::lit(x), T::lit(y)));
    }
    Ok(PolygonScene::new(vertices, seed)?)
}
