//! Polylines, their decomposition into fixed-size curve segments, and the
//! on-disk line formats.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{angle_between, Aabb, Vec3};

pub const LINES_MAGIC: &[u8; 8] = b"CSNG-LN1";

/// Minimum separation between consecutive vertices.
pub const MIN_VERTEX_SEPARATION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("malformed lines file: {0}")]
    MalformedFile(String),
    #[error("dataset contains no line with at least two vertices")]
    EmptyDataset,
    #[error("non-finite coordinate in line {line} at vertex {vertex}")]
    NonFiniteCoordinate { line: usize, vertex: usize },
    #[error("line {line} repeats vertex {vertex} (separation <= 1e-9)")]
    DegenerateVertex { line: usize, vertex: usize },
    #[error("line {line} has {speeds} speeds for {vertices} vertices")]
    SpeedCountMismatch { line: usize, speeds: usize, vertices: usize },
    #[error("dataset has no lines loaded")]
    NotLoaded,
    #[error("segment span must be >= 1")]
    InvalidSpan,
    #[error("dataset has not been decomposed")]
    NotDecomposed,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub id: usize,
    pub vertices: Vec<Vec3>,
    /// Per-vertex field magnitude before step normalization, when known.
    pub step_speeds: Option<Vec<f64>>,
}

impl Polyline {
    /// Validates the polyline invariants and returns it.
    pub fn new(id: usize, vertices: Vec<Vec3>, step_speeds: Option<Vec<f64>>) -> Result<Self, CurveError> {
        let line = Self { id, vertices, step_speeds };
        line.validate()?;
        Ok(line)
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        let line = self.id;
        if self.vertices.len() < 2 {
            return Err(CurveError::EmptyDataset);
        }
        for (vertex, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(CurveError::NonFiniteCoordinate { line, vertex });
            }
        }
        for (i, w) in self.vertices.windows(2).enumerate() {
            if w[0].dist(w[1]) <= MIN_VERTEX_SEPARATION {
                return Err(CurveError::DegenerateVertex { line, vertex: i + 1 });
            }
        }
        if let Some(s) = &self.step_speeds {
            if s.len() != self.vertices.len() {
                return Err(CurveError::SpeedCountMismatch {
                    line,
                    speeds: s.len(),
                    vertices: self.vertices.len(),
                });
            }
            if let Some(vertex) = s.iter().position(|x| !x.is_finite()) {
                return Err(CurveError::NonFiniteCoordinate { line, vertex });
            }
        }
        Ok(())
    }

    pub fn line_segment_count(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// A run of at most `span` consecutive line segments of one polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment {
    pub id: usize,
    pub line_id: usize,
    pub start_index: usize,
    pub points: Vec<Vec3>,
    /// Unit vector from the first to the last point.
    pub chord_dir: Vec3,
    pub arc_length: f64,
    /// Sum of turning angles between consecutive line segments, in radians.
    pub total_curvature: f64,
    pub mean_speed: Option<f64>,
    pub bounds: Aabb,
}

impl CurveSegment {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn first(&self) -> Vec3 {
        self.points[0]
    }

    pub fn last(&self) -> Vec3 {
        self.points[self.points.len() - 1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentAttributes {
    pub arc_length: f64,
    pub total_curvature: f64,
    pub mean_speed: Option<f64>,
}

/// Arc length, total turning angle and mean speed of a point run.
pub fn segment_attributes(points: &[Vec3], speeds: Option<&[f64]>) -> SegmentAttributes {
    let arc_length = points.windows(2).map(|w| w[0].dist(w[1])).sum();
    let total_curvature = points
        .windows(3)
        .map(|w| angle_between(w[1] - w[0], w[2] - w[1]))
        .sum();
    let mean_speed = speeds
        .filter(|s| !s.is_empty())
        .map(|s| s.iter().sum::<f64>() / s.len() as f64);
    SegmentAttributes { arc_length, total_curvature, mean_speed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub lines: Vec<Polyline>,
    pub segments: Vec<CurveSegment>,
    /// Line segments per curve segment; `None` until decomposed.
    pub span: Option<usize>,
    pub bounds: Aabb,
    pub bounds_diagonal: f64,
}

impl Dataset {
    /// Builds a dataset from validated lines, reassigning dense line ids.
    pub fn from_lines(mut lines: Vec<Polyline>) -> Result<Self, CurveError> {
        if lines.is_empty() {
            return Err(CurveError::EmptyDataset);
        }
        for (i, l) in lines.iter_mut().enumerate() {
            l.id = i;
            l.validate()?;
        }
        let bounds = Aabb::from_points(lines.iter().flat_map(|l| l.vertices.iter()));
        Ok(Self {
            bounds_diagonal: bounds.diagonal(),
            bounds,
            lines,
            segments: Vec::new(),
            span: None,
        })
    }

    pub fn is_decomposed(&self) -> bool {
        self.span.is_some()
    }

    pub fn vertex_count(&self) -> usize {
        self.lines.iter().map(|l| l.vertices.len()).sum()
    }

    /// Splits every line into curve segments of `span` line segments; the last
    /// segment of a line takes the remainder.
    pub fn decompose(&mut self, span: usize) -> Result<(), CurveError> {
        if span == 0 {
            return Err(CurveError::InvalidSpan);
        }
        if self.lines.is_empty() {
            return Err(CurveError::NotLoaded);
        }
        let mut segments = Vec::with_capacity(expected_segment_count(&self.lines, span));
        for line in &self.lines {
            let n_line_segments = line.line_segment_count();
            let mut start = 0;
            while start < n_line_segments {
                let count = span.min(n_line_segments - start);
                let range = start..start + count + 1;
                let points = line.vertices[range.clone()].to_vec();
                let speeds = line.step_speeds.as_ref().map(|s| &s[range]);
                let attrs = segment_attributes(&points, speeds);
                let first = points[0];
                let last = points[points.len() - 1];
                // consecutive vertices are distinct, but a closed run could return to its start
                let chord_dir = (last - first)
                    .normalized()
                    .or_else(|| (points[1] - first).normalized())
                    .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
                segments.push(CurveSegment {
                    id: segments.len(),
                    line_id: line.id,
                    start_index: start,
                    bounds: Aabb::from_points(points.iter()),
                    points,
                    chord_dir,
                    arc_length: attrs.arc_length,
                    total_curvature: attrs.total_curvature,
                    mean_speed: attrs.mean_speed,
                });
                start += count;
            }
        }
        self.segments = segments;
        self.span = Some(span);
        Ok(())
    }

    /// Reassembles each line's vertex list from its segments.
    pub fn reconstruct_lines(&self) -> Vec<Vec<Vec3>> {
        let mut out: Vec<Vec<Vec3>> = vec![Vec::new(); self.lines.len()];
        for seg in &self.segments {
            let verts = &mut out[seg.line_id];
            let skip = usize::from(!verts.is_empty());
            verts.extend_from_slice(&seg.points[skip..]);
        }
        out
    }

    // ---- file formats ----

    pub fn load(path: impl AsRef<Path>, format: LinesFormat) -> Result<Self, CurveError> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, format)
    }

    pub fn from_bytes(bytes: &[u8], format: LinesFormat) -> Result<Self, CurveError> {
        let format = match format {
            LinesFormat::Auto if bytes.starts_with(LINES_MAGIC) => LinesFormat::Binary,
            LinesFormat::Auto => LinesFormat::Json,
            f => f,
        };
        let raw = match format {
            LinesFormat::Binary => read_binary(bytes)?,
            _ => read_json(bytes)?,
        };
        Self::from_raw_lines(raw)
    }

    /// Drops lines with fewer than two vertices, validates the rest.
    fn from_raw_lines(raw: Vec<(Vec<Vec3>, Option<Vec<f64>>)>) -> Result<Self, CurveError> {
        let lines = raw
            .into_iter()
            .filter(|(v, _)| v.len() >= 2)
            .enumerate()
            .map(|(id, (vertices, speeds))| Polyline::new(id, vertices, speeds))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_lines(lines)
    }

    pub fn save(&self, path: impl AsRef<Path>, format: LinesFormat) -> Result<(), CurveError> {
        let path = path.as_ref();
        let format = match format {
            LinesFormat::Auto => LinesFormat::from_path(path),
            f => f,
        };
        let mut file = io::BufWriter::new(fs::File::create(path)?);
        match format {
            LinesFormat::Binary => write_binary(&self.lines, &mut file)?,
            _ => serde_json::to_writer(&mut file, &self.to_json_lines())
                .map_err(|e| CurveError::Io(e.into()))?,
        }
        file.flush()?;
        Ok(())
    }

    pub fn to_json_lines(&self) -> JsonLines {
        JsonLines {
            lines: self
                .lines
                .iter()
                .map(|l| JsonLine {
                    vertices: l.vertices.iter().map(|v| (*v).into()).collect(),
                    speeds: l.step_speeds.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json_lines(doc: JsonLines) -> Result<Self, CurveError> {
        Self::from_raw_lines(
            doc.lines
                .into_iter()
                .map(|l| (l.vertices.into_iter().map(Vec3::from).collect(), l.speeds))
                .collect(),
        )
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_binary(&self.lines, &mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Decomposed dataset document: the source lines, the span and one summary
/// row per segment. Segment points are not repeated; they are recovered from
/// `lines` by re-running the decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentsJson {
    #[serde(rename = "L")]
    pub span: usize,
    pub bounds_diagonal: f64,
    pub lines: Vec<JsonLine>,
    pub segments: Vec<SegmentJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub id: usize,
    pub line_id: usize,
    pub start_index: usize,
    pub point_count: usize,
    pub chord_dir: [f64; 3],
    pub arc_length: f64,
    pub total_curvature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_speed: Option<f64>,
}

impl Dataset {
    pub fn to_segments_json(&self) -> Result<SegmentsJson, CurveError> {
        let span = self.span.ok_or(CurveError::NotDecomposed)?;
        Ok(SegmentsJson {
            span,
            bounds_diagonal: self.bounds_diagonal,
            lines: self.to_json_lines().lines,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentJson {
                    id: s.id,
                    line_id: s.line_id,
                    start_index: s.start_index,
                    point_count: s.point_count(),
                    chord_dir: s.chord_dir.into(),
                    arc_length: s.arc_length,
                    total_curvature: s.total_curvature,
                    mean_speed: s.mean_speed,
                })
                .collect(),
        })
    }

    /// Rebuilds the dataset and checks the segment table against it.
    pub fn from_segments_json(doc: SegmentsJson) -> Result<Self, CurveError> {
        let mut ds = Self::from_json_lines(JsonLines { lines: doc.lines })?;
        ds.decompose(doc.span)?;
        let consistent = ds.segments.len() == doc.segments.len()
            && ds.segments.iter().zip(&doc.segments).all(|(a, b)| {
                a.id == b.id && a.line_id == b.line_id && a.start_index == b.start_index && a.point_count() == b.point_count
            });
        if !consistent {
            return Err(CurveError::MalformedFile("segment table does not match the lines".into()));
        }
        Ok(ds)
    }

    pub fn load_segments(path: impl AsRef<Path>) -> Result<Self, CurveError> {
        let bytes = fs::read(path)?;
        let doc = serde_json::from_slice(&bytes).map_err(|e| CurveError::MalformedFile(e.to_string()))?;
        Self::from_segments_json(doc)
    }

    pub fn save_segments(&self, path: impl AsRef<Path>) -> Result<(), CurveError> {
        let mut file = io::BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(&mut file, &self.to_segments_json()?).map_err(|e| CurveError::Io(e.into()))?;
        file.flush()?;
        Ok(())
    }
}

pub fn expected_segment_count(lines: &[Polyline], span: usize) -> usize {
    lines.iter().map(|l| l.line_segment_count().div_ceil(span)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinesFormat {
    #[default]
    Auto,
    Json,
    Binary,
}

impl LinesFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => LinesFormat::Binary,
            _ => LinesFormat::Json,
        }
    }
}

/// JSON lines document: `{"lines":[{"vertices":[[x,y,z],...],"speeds":[...]?}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonLines {
    pub lines: Vec<JsonLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonLine {
    pub vertices: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speeds: Option<Vec<f64>>,
}

type RawLine = (Vec<Vec3>, Option<Vec<f64>>);

fn read_json(bytes: &[u8]) -> Result<Vec<RawLine>, CurveError> {
    let doc: JsonLines =
        serde_json::from_slice(bytes).map_err(|e| CurveError::MalformedFile(e.to_string()))?;
    Ok(doc
        .lines
        .into_iter()
        .map(|l| (l.vertices.into_iter().map(Vec3::from).collect(), l.speeds))
        .collect())
}

fn read_binary(bytes: &[u8]) -> Result<Vec<RawLine>, CurveError> {
    let mut r = bytes;
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic)?;
    if &magic != LINES_MAGIC {
        return Err(CurveError::MalformedFile("bad magic".into()));
    }
    let count = read_u32(&mut r)? as usize;
    let mut lines = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let n = read_u32(&mut r)? as usize;
        let mut vertices = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let x = read_f32(&mut r)? as f64;
            let y = read_f32(&mut r)? as f64;
            let z = read_f32(&mut r)? as f64;
            vertices.push(Vec3::new(x, y, z));
        }
        let mut flag = [0u8; 1];
        read_exact(&mut r, &mut flag)?;
        let speeds = match flag[0] {
            0 => None,
            1 => Some((0..n).map(|_| read_f32(&mut r).map(f64::from)).collect::<Result<Vec<_>, _>>()?),
            f => return Err(CurveError::MalformedFile(format!("bad speed flag {f}"))),
        };
        lines.push((vertices, speeds));
    }
    if !r.is_empty() {
        return Err(CurveError::MalformedFile(format!("{} trailing bytes", r.len())));
    }
    Ok(lines)
}

fn write_binary(lines: &[Polyline], w: &mut impl Write) -> io::Result<()> {
    w.write_all(LINES_MAGIC)?;
    w.write_all(&(lines.len() as u32).to_le_bytes())?;
    for l in lines {
        w.write_all(&(l.vertices.len() as u32).to_le_bytes())?;
        for v in &l.vertices {
            for c in [v.x, v.y, v.z] {
                w.write_all(&(c as f32).to_le_bytes())?;
            }
        }
        match &l.step_speeds {
            Some(s) => {
                w.write_all(&[1])?;
                for x in s {
                    w.write_all(&(*x as f32).to_le_bytes())?;
                }
            }
            None => w.write_all(&[0])?,
        }
    }
    Ok(())
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), CurveError> {
    r.read_exact(buf)
        .map_err(|_| CurveError::MalformedFile("unexpected end of file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32, CurveError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut &[u8]) -> Result<f32, CurveError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}
