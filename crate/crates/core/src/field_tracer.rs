//! Streamline generation: analytic and gridded vector fields, seeding, and
//! fixed-step RK4 integration.
//!
//! Defaults: tracing runs forward only and stops after `max_steps`, when a
//! grid field is left, or at a critical point (`|v| < 1e-9`). With
//! `normalize_steps` RK4 integrates the unit tangent field and each
//! displacement is rescaled to exactly `step_size`. The field magnitude at
//! each vertex is kept as its speed.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve_model::{CurveError, Dataset, Polyline};
use crate::geom::{Aabb, Vec3};

/// Speeds below this are treated as critical points.
pub const CRITICAL_SPEED: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("sample point {0:?} lies outside the grid bounds")]
    OutOfBounds(Vec3),
    #[error("no seed produced a trace with at least two vertices")]
    NoValidSeeds,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid trace config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Anything that can be sampled along a streamline.
pub trait Field: Sync {
    fn sample(&self, p: Vec3) -> Result<Vec3, TraceError>;

    /// Box used for seeding; for grid fields also the tracing domain.
    fn domain(&self) -> Aabb;

    /// Whether leaving [`Field::domain`] ends a trace.
    fn bounded(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticKind {
    Uniform { v: Vec3 },
    /// `v = (-y, x, 0)`
    Circular,
    /// `v = (x, -y, 0)`
    Saddle,
    /// Arnold–Beltrami–Childress flow.
    Abc { a: f64, b: f64, c: f64 },
}

impl AnalyticKind {
    pub fn abc_default() -> Self {
        AnalyticKind::Abc { a: 3f64.sqrt(), b: 2f64.sqrt(), c: 1.0 }
    }

    pub fn eval(&self, p: Vec3) -> Vec3 {
        match *self {
            AnalyticKind::Uniform { v } => v,
            AnalyticKind::Circular => Vec3::new(-p.y, p.x, 0.0),
            AnalyticKind::Saddle => Vec3::new(p.x, -p.y, 0.0),
            AnalyticKind::Abc { a, b, c } => Vec3::new(
                a * p.z.sin() + c * p.y.cos(),
                b * p.x.sin() + a * p.z.cos(),
                c * p.y.sin() + b * p.x.cos(),
            ),
        }
    }
}

/// Regular grid of 3-vectors, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub dims: [usize; 3],
    pub bounds: Aabb,
    pub values: Vec<Vec3>,
}

impl GridField {
    pub fn new(dims: [usize; 3], bounds: Aabb, values: Vec<Vec3>) -> Result<Self, TraceError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(TraceError::InvalidField("grid dims must be positive".into()));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(TraceError::InvalidField(format!(
                "expected {expected} voxels, got {}",
                values.len()
            )));
        }
        let (lo, hi) = (bounds.min, bounds.max);
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return Err(TraceError::InvalidField("bounds min must be < max per axis".into()));
        }
        Ok(Self { dims, bounds, values })
    }

    fn at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Trilinear interpolation; voxel values sit on the lattice spanning the bounds.
    pub fn interpolate(&self, p: Vec3) -> Result<Vec3, TraceError> {
        if !self.bounds.contains(p) {
            return Err(TraceError::OutOfBounds(p));
        }
        let mut idx = [0usize; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let n = self.dims[axis];
            if n == 1 {
                continue;
            }
            let lo = self.bounds.min.axis(axis);
            let hi = self.bounds.max.axis(axis);
            let g = (p.axis(axis) - lo) / (hi - lo) * (n - 1) as f64;
            let i = (g.floor() as usize).min(n - 2);
            idx[axis] = i;
            frac[axis] = g - i as f64;
        }
        let step = |axis: usize| usize::from(self.dims[axis] > 1);
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let (di, dj, dk) = (step(0), step(1), step(2));
        let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
        let c00 = self.at(i, j, k).lerp(self.at(i + di, j, k), fx);
        let c10 = self.at(i, j + dj, k).lerp(self.at(i + di, j + dj, k), fx);
        let c01 = self.at(i, j, k + dk).lerp(self.at(i + di, j, k + dk), fx);
        let c11 = self.at(i, j + dj, k + dk).lerp(self.at(i + di, j + dj, k + dk), fx);
        Ok(c00.lerp(c10, fy).lerp(c01.lerp(c11, fy), fz))
    }

    /// Reads a `.vf.json` header and its raw little-endian f32 payload.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let header: GridHeader = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| TraceError::InvalidField(e.to_string()))?;
        let data_path = path.parent().unwrap_or(Path::new(".")).join(&header.data);
        let raw = fs::read(data_path)?;
        if raw.len() % 12 != 0 {
            return Err(TraceError::InvalidField("raw payload is not a multiple of 12 bytes".into()));
        }
        let values = raw
            .chunks_exact(12)
            .map(|c| {
                let f = |o: usize| f32::from_le_bytes([c[o], c[o + 1], c[o + 2], c[o + 3]]) as f64;
                Vec3::new(f(0), f(4), f(8))
            })
            .collect();
        Self::new(header.dims, Aabb::new(header.bounds.min, header.bounds.max), values)
    }

    /// Writes `<path>` (JSON header) and `<path stem>.raw` next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("field.vf.json");
        let raw_name = format!("{}.raw", name.trim_end_matches(".json").trim_end_matches(".vf"));
        let header = GridHeader {
            dims: self.dims,
            bounds: BoundsJson { min: self.bounds.min, max: self.bounds.max },
            data: PathBuf::from(&raw_name),
        };
        let mut raw = Vec::with_capacity(self.values.len() * 12);
        for v in &self.values {
            for c in [v.x, v.y, v.z] {
                raw.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        fs::write(path.with_file_name(&raw_name), raw)?;
        fs::write(path, serde_json::to_vec(&header).expect("header serializes"))?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridHeader {
    dims: [usize; 3],
    bounds: BoundsJson,
    data: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsJson {
    min: Vec3,
    max: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VectorField {
    /// Analytic field; `domain` only bounds seeding.
    Analytic { kind: AnalyticKind, domain: Aabb },
    Grid(GridField),
}

impl VectorField {
    pub fn analytic(kind: AnalyticKind, domain: Aabb) -> Self {
        VectorField::Analytic { kind, domain }
    }
}

impl Field for VectorField {
    fn sample(&self, p: Vec3) -> Result<Vec3, TraceError> {
        match self {
            VectorField::Analytic { kind, .. } => Ok(kind.eval(p)),
            VectorField::Grid(g) => g.interpolate(p),
        }
    }

    fn domain(&self) -> Aabb {
        match self {
            VectorField::Analytic { domain, .. } => *domain,
            VectorField::Grid(g) => g.bounds,
        }
    }

    fn bounded(&self) -> bool {
        matches!(self, VectorField::Grid(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seeding {
    UniformGrid { nx: usize, ny: usize, nz: usize },
    Random { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub seeding: Seeding,
    pub step_size: f64,
    pub max_steps: usize,
    #[serde(default = "default_true")]
    pub normalize_steps: bool,
    /// Also integrate backwards from each seed and prepend that half.
    #[serde(default)]
    pub bidirectional: bool,
}

fn default_true() -> bool {
    true
}

impl TraceConfig {
    pub fn new(seeding: Seeding, step_size: f64, max_steps: usize) -> Self {
        Self { seeding, step_size, max_steps, normalize_steps: true, bidirectional: false }
    }

    fn validate(&self) -> Result<(), TraceError> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(TraceError::InvalidConfig("step_size must be > 0".into()));
        }
        if self.max_steps == 0 {
            return Err(TraceError::InvalidConfig("max_steps must be >= 1".into()));
        }
        match self.seeding {
            Seeding::UniformGrid { nx, ny, nz } if nx == 0 || ny == 0 || nz == 0 => {
                Err(TraceError::InvalidConfig("grid seeding needs >= 1 per axis".into()))
            }
            Seeding::Random { count: 0, .. } => Err(TraceError::InvalidConfig("random seeding needs count >= 1".into())),
            _ => Ok(()),
        }
    }
}

/// Seed positions: cell centers of a regular partition, or i.i.d. uniform draws.
pub fn seed_points(bounds: &Aabb, seeding: &Seeding) -> Vec<Vec3> {
    let ext = bounds.extent();
    match *seeding {
        Seeding::UniformGrid { nx, ny, nz } => {
            let mut out = Vec::with_capacity(nx * ny * nz);
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(Vec3::new(
                            bounds.min.x + ext.x * (i as f64 + 0.5) / nx as f64,
                            bounds.min.y + ext.y * (j as f64 + 0.5) / ny as f64,
                            bounds.min.z + ext.z * (k as f64 + 0.5) / nz as f64,
                        ));
                    }
                }
            }
            out
        }
        Seeding::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    Vec3::new(
                        bounds.min.x + ext.x * rng.random::<f64>(),
                        bounds.min.y + ext.y * rng.random::<f64>(),
                        bounds.min.z + ext.z * rng.random::<f64>(),
                    )
                })
                .collect()
        }
    }
}

/// One classical RK4 displacement of length-scale `h` from `p`.
pub fn rk4_step<F: Field + ?Sized>(field: &F, p: Vec3, h: f64) -> Result<Vec3, TraceError> {
    let k1 = field.sample(p)?;
    let k2 = field.sample(p + k1 * (h * 0.5))?;
    let k3 = field.sample(p + k2 * (h * 0.5))?;
    let k4 = field.sample(p + k3 * h)?;
    Ok((k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

/// Unit-speed view of a field, so RK4 advances by arc length.
struct UnitSpeed<'a, F: ?Sized>(&'a F);

impl<F: Field + ?Sized> Field for UnitSpeed<'_, F> {
    fn sample(&self, p: Vec3) -> Result<Vec3, TraceError> {
        let v = self.0.sample(p)?;
        let n = v.norm();
        if n < CRITICAL_SPEED {
            return Err(TraceError::InvalidField(format!("critical point near {p:?}")));
        }
        Ok(v / n)
    }

    fn domain(&self) -> Aabb {
        self.0.domain()
    }
}

/// Integrates one streamline; returns vertices and the field magnitude at each.
pub fn trace_from<F: Field + ?Sized>(field: &F, seed: Vec3, cfg: &TraceConfig, direction: f64) -> (Vec<Vec3>, Vec<f64>) {
    let h = cfg.step_size * direction;
    let domain = field.domain();
    let seed_speed = match field.sample(seed) {
        Ok(v) => v.norm(),
        Err(_) => return (Vec::new(), Vec::new()),
    };
    let mut vertices = vec![seed];
    let mut speeds = vec![seed_speed];
    if seed_speed < CRITICAL_SPEED {
        return (vertices, speeds);
    }
    let unit = UnitSpeed(field);
    let mut p = seed;
    for _ in 0..cfg.max_steps {
        let delta = if cfg.normalize_steps { rk4_step(&unit, p, h) } else { rk4_step(field, p, h) };
        let Ok(delta) = delta else { break };
        let len = delta.norm();
        if !(len > 1e-9 && len.is_finite()) {
            break;
        }
        // arc-length RK4 is already within O(h^5) of the step size; rescale to make it exact
        let step = if cfg.normalize_steps { delta * (cfg.step_size / len) } else { delta };
        let next = p + step;
        if field.bounded() && !domain.contains(next) {
            break;
        }
        let speed = match field.sample(next) {
            Ok(v) if v.norm() >= CRITICAL_SPEED => v.norm(),
            _ => break,
        };
        vertices.push(next);
        speeds.push(speed);
        p = next;
    }
    (vertices, speeds)
}

/// Traces one streamline per seed and returns them as an undecomposed dataset.
pub fn trace<F: Field + ?Sized>(field: &F, cfg: &TraceConfig) -> Result<Dataset, TraceError> {
    cfg.validate()?;
    let seeds = seed_points(&field.domain(), &cfg.seeding);
    let traced: Vec<(Vec<Vec3>, Vec<f64>)> = seeds
        .par_iter()
        .map(|&s| {
            let (mut verts, mut speeds) = trace_from(field, s, cfg, 1.0);
            if cfg.bidirectional {
                let (back_v, back_s) = trace_from(field, s, cfg, -1.0);
                if back_v.len() > 1 {
                    let mut v: Vec<Vec3> = back_v.into_iter().rev().collect();
                    let mut sp: Vec<f64> = back_s.into_iter().rev().collect();
                    v.pop();
                    sp.pop();
                    v.append(&mut verts);
                    sp.append(&mut speeds);
                    return (v, sp);
                }
            }
            (verts, speeds)
        })
        .collect();
    let lines: Vec<Polyline> = traced
        .into_iter()
        .filter(|(v, _)| v.len() >= 2)
        .enumerate()
        .map(|(id, (vertices, speeds))| Polyline { id, vertices, step_speeds: Some(speeds) })
        .collect();
    if lines.is_empty() {
        return Err(TraceError::NoValidSeeds);
    }
    Ok(Dataset::from_lines(lines)?)
}
