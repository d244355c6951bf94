//! Seeded synthetic datasets with known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve_model::{CurveError, Dataset, Polyline};
use crate::field_tracer::{trace, Field, Seeding, TraceConfig, TraceError};
use crate::geom::{Aabb, Vec3};

/// A dataset together with the planted group of every line.
#[derive(Clone, Debug)]
pub struct Labelled {
    pub dataset: Dataset,
    pub line_labels: Vec<usize>,
}

impl Labelled {
    /// Planted group of every segment (dataset must be decomposed).
    pub fn segment_labels(&self) -> Vec<usize> {
        self.dataset.segments.iter().map(|s| self.line_labels[s.line_id]).collect()
    }

    pub fn decomposed(mut self, span: usize) -> Result<Self, CurveError> {
        self.dataset.decompose(span)?;
        Ok(self)
    }
}

/// Random-walk polylines inside a cube of side `extent`.
pub fn random_walks(lines: usize, vertices: usize, extent: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = extent / 40.0;
    let out = (0..lines)
        .map(|id| {
            let mut p = Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()) * extent;
            let mut dir = random_unit(&mut rng);
            let mut pts = vec![p];
            while pts.len() < vertices {
                dir = (dir + random_unit(&mut rng) * 0.5).normalized().unwrap_or(dir);
                p = p + dir * (step * (0.5 + rng.random::<f64>()));
                pts.push(p);
            }
            Polyline::new(id, pts, None).expect("random walk steps are never degenerate")
        })
        .collect();
    Dataset::from_lines(out).expect("non-empty")
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        if let Some(u) = v.normalized().filter(|_| v.norm() <= 0.5) {
            return u;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Bundle {
    pub start: Vec3,
    pub direction: Vec3,
    pub length: f64,
    pub lines: usize,
    /// Lines start within this distance of the bundle axis.
    pub radius: f64,
    pub vertices: usize,
}

fn bundle_lines(b: &Bundle, rng: &mut ChaCha8Rng, first_id: usize) -> Vec<Polyline> {
    let dir = b.direction.normalized().expect("non-zero bundle direction");
    let helper = if dir.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let u = dir.cross(helper).normalized().expect("independent helper");
    let w = dir.cross(u);
    (0..b.lines)
        .map(|i| {
            let r = b.radius * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            let offset = u * (r * t.cos()) + w * (r * t.sin());
            let pts = (0..b.vertices)
                .map(|j| {
                    let s = j as f64 / (b.vertices - 1) as f64;
                    // gentle wiggle keeps segments from being perfectly collinear
                    let wiggle = u * (0.05 * b.radius * (phase + 6.0 * s).sin());
                    b.start + dir * (s * b.length) + offset + wiggle
                })
                .collect();
            Polyline::new(first_id + i, pts, None).expect("bundle vertices are distinct")
        })
        .collect()
}

pub fn bundles(specs: &[Bundle], seed: u64) -> Labelled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut line_labels = Vec::new();
    for (label, b) in specs.iter().enumerate() {
        let ls = bundle_lines(b, &mut rng, lines.len());
        line_labels.extend(std::iter::repeat_n(label, ls.len()));
        lines.extend(ls);
    }
    Labelled { dataset: Dataset::from_lines(lines).expect("non-empty"), line_labels }
}

/// Two parallel bundles along x, far apart in y.
pub fn two_bundles(lines_per_bundle: usize, seed: u64) -> Labelled {
    let b = |y: f64| Bundle {
        start: Vec3::new(0.0, y, 0.0),
        direction: Vec3::new(1.0, 0.0, 0.0),
        length: 10.0,
        lines: lines_per_bundle,
        radius: 0.5,
        vertices: 41,
    };
    bundles(&[b(0.0), b(20.0)], seed)
}

/// Three compact bundles with different orientations, well separated.
pub fn three_bundles(lines_per_bundle: usize, seed: u64) -> Labelled {
    let mk = |start: Vec3, direction: Vec3| Bundle {
        start,
        direction,
        length: 8.0,
        lines: lines_per_bundle,
        radius: 0.6,
        vertices: 33,
    };
    bundles(
        &[
            mk(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)),
            mk(Vec3::new(0.0, 15.0, 0.0), Vec3::new(1.0, 1.0, 0.0)),
            mk(Vec3::new(15.0, 0.0, 10.0), Vec3::new(0.0, 0.0, 1.0)),
        ],
        seed,
    )
}

/// Helices winding around the z axis through `center`.
pub fn vortex(center: Vec3, lines: usize, turns: f64, first_id: usize, rng: &mut ChaCha8Rng) -> Vec<Polyline> {
    (0..lines)
        .map(|i| {
            let radius = 1.0 + 2.0 * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            let n = 81;
            let pts = (0..n)
                .map(|j| {
                    let t = phase + turns * std::f64::consts::TAU * j as f64 / (n - 1) as f64;
                    center + Vec3::new(radius * t.cos(), radius * t.sin(), 0.6 * (t - phase))
                })
                .collect();
            Polyline::new(first_id + i, pts, None).expect("helix vertices are distinct")
        })
        .collect()
}

/// Two parallel bundles plus a vortex; labels 0, 1 (bundles) and 2 (vortex).
pub fn two_bundles_and_vortex(lines_per_group: usize, seed: u64) -> Labelled {
    let base = two_bundles(lines_per_group, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut lines = base.dataset.lines;
    let mut line_labels = base.line_labels;
    let v = vortex(Vec3::new(5.0, 45.0, 0.0), lines_per_group, 2.0, lines.len(), &mut rng);
    line_labels.extend(std::iter::repeat_n(2, v.len()));
    lines.extend(v);
    Labelled { dataset: Dataset::from_lines(lines).expect("non-empty"), line_labels }
}

/// Potential flow past a cylinder of radius `radius` aligned with z, with a
/// weak uniform drift along z. Undefined inside the cylinder.
#[derive(Clone, Copy, Debug)]
pub struct CylinderFlow {
    pub radius: f64,
    pub speed: f64,
    pub drift: f64,
    pub domain: Aabb,
}

impl Default for CylinderFlow {
    fn default() -> Self {
        Self {
            radius: 1.0,
            speed: 1.0,
            drift: 0.05,
            domain: Aabb::new(Vec3::new(-6.0, -3.0, 0.0), Vec3::new(6.0, 3.0, 2.0)),
        }
    }
}

impl Field for CylinderFlow {
    fn sample(&self, p: Vec3) -> Result<Vec3, TraceError> {
        if !self.domain.contains(p) {
            return Err(TraceError::OutOfBounds(p));
        }
        let r2 = p.x * p.x + p.y * p.y;
        if r2 < self.radius * self.radius {
            return Err(TraceError::OutOfBounds(p));
        }
        let a = self.radius * self.radius / (r2 * r2);
        Ok(Vec3::new(
            self.speed * (1.0 - a * (p.x * p.x - p.y * p.y)),
            -self.speed * 2.0 * a * p.x * p.y,
            self.drift,
        ))
    }

    fn domain(&self) -> Aabb {
        self.domain
    }

    fn bounded(&self) -> bool {
        true
    }
}

/// Streamlines of [`CylinderFlow`] seeded on the inflow plane.
pub fn cylinder_like(seeds_y: usize, seeds_z: usize) -> Result<Dataset, TraceError> {
    let flow = CylinderFlow::default();
    let d = flow.domain;
    let seeds = Aabb::new(Vec3::new(d.min.x + 0.01, d.min.y + 0.1, d.min.z + 0.1), Vec3::new(d.min.x + 0.02, d.max.y - 0.1, d.min.z + 0.6));
    let field = SeededRegion { inner: flow, seeds };
    let cfg = TraceConfig::new(Seeding::UniformGrid { nx: 1, ny: seeds_y, nz: seeds_z }, 0.05, 400);
    trace(&field, &cfg)
}

/// Restricts seeding to a sub-box while sampling the wrapped field.
struct SeededRegion<F> {
    inner: F,
    seeds: Aabb,
}

impl<F: Field> Field for SeededRegion<F> {
    fn sample(&self, p: Vec3) -> Result<Vec3, TraceError> {
        self.inner.sample(p)
    }

    fn domain(&self) -> Aabb {
        self.seeds
    }

    fn bounded(&self) -> bool {
        false
    }
}
