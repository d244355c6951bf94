//! Text and JSON forms of fields, seedings and graph parameters, shared by
//! the command line and the HTTP API.

use std::f64::consts::TAU;
use std::path::Path;

use csng::csng_graph::BuildOptions;
use csng::field_tracer::{AnalyticKind, GridField, Seeding, VectorField};
use csng::geom::{Aabb, Vec3};
use csng::segment_index::{Radius, SegmentDistanceMetric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct InputError(pub String);

fn bad(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

fn numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>, InputError> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("{what}: {x:?} is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{what}: expected {n} finite numbers, got {s:?}")));
    }
    Ok(v)
}

/// `xmin,ymin,zmin,xmax,ymax,zmax`
pub fn parse_domain(s: &str) -> Result<Aabb, InputError> {
    let v = numbers(s, 6, "domain")?;
    let b = Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]));
    if !(b.min.x <= b.max.x && b.min.y <= b.max.y && b.min.z <= b.max.z) {
        return Err(bad("domain: min must not exceed max"));
    }
    Ok(b)
}

/// Seeding box used when none is given.
pub fn default_domain(kind: &AnalyticKind) -> Aabb {
    let cube = |lo: f64, hi: f64| Aabb::new(Vec3::new(lo, lo, lo), Vec3::new(hi, hi, hi));
    match kind {
        AnalyticKind::Uniform { .. } => cube(0.0, 1.0),
        AnalyticKind::Circular => Aabb::new(Vec3::new(-2.0, -2.0, -1.0), Vec3::new(2.0, 2.0, 1.0)),
        AnalyticKind::Saddle => cube(-1.0, 1.0),
        AnalyticKind::Abc { .. } => cube(0.0, TAU),
    }
}

/// Analytic kinds by name (`uniform:1,0,0`, `circular`, `saddle`, `abc`,
/// `abc:a,b,c`); anything else is read as a `.vf.json` grid file.
pub fn parse_field(spec: &str, domain: Option<Aabb>) -> Result<VectorField, InputError> {
    let (name, args) = spec.split_once(':').map_or((spec, None), |(n, a)| (n, Some(a)));
    let kind = match (name, args) {
        ("uniform", None) => Some(AnalyticKind::Uniform { v: Vec3::new(1.0, 0.0, 0.0) }),
        ("uniform", Some(a)) => {
            let v = numbers(a, 3, "uniform")?;
            Some(AnalyticKind::Uniform { v: Vec3::new(v[0], v[1], v[2]) })
        }
        ("circular", None) => Some(AnalyticKind::Circular),
        ("saddle", None) => Some(AnalyticKind::Saddle),
        ("abc", None) => Some(AnalyticKind::abc_default()),
        ("abc", Some(a)) => {
            let v = numbers(a, 3, "abc")?;
            Some(AnalyticKind::Abc { a: v[0], b: v[1], c: v[2] })
        }
        ("circular" | "saddle", Some(_)) => return Err(bad(format!("field {name} takes no parameters"))),
        _ => None,
    };
    match kind {
        Some(kind) => {
            let domain = domain.unwrap_or_else(|| default_domain(&kind));
            Ok(VectorField::analytic(kind, domain))
        }
        None if Path::new(spec).extension().is_some_and(|e| e == "json") => {
            if domain.is_some() {
                return Err(bad("grid fields take their domain from the file"));
            }
            GridField::load(spec).map(VectorField::Grid).map_err(|e| bad(format!("field {spec}: {e}")))
        }
        None => Err(bad(format!("unknown field {spec:?}; expected uniform, circular, saddle, abc or a .vf.json file"))),
    }
}

/// `uniform:8x8x8`, `random:216` or `random:216:seed=7`.
pub fn parse_seeding(s: &str) -> Result<Seeding, InputError> {
    let mut parts = s.split(':');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("uniform"), Some(dims), None, None) => {
            let d: Vec<usize> = dims
                .split('x')
                .map(|x| x.parse().map_err(|_| bad(format!("seeding: bad grid size {dims:?}"))))
                .collect::<Result<_, _>>()?;
            match d[..] {
                [nx, ny, nz] if nx > 0 && ny > 0 && nz > 0 => Ok(Seeding::UniformGrid { nx, ny, nz }),
                _ => Err(bad(format!("seeding: expected NXxNYxNZ with positive sizes, got {dims:?}"))),
            }
        }
        (Some("random"), Some(count), seed, None) => {
            let count: usize = count.parse().map_err(|_| bad(format!("seeding: bad count {count:?}")))?;
            if count == 0 {
                return Err(bad("seeding: count must be >= 1"));
            }
            let seed = match seed {
                None => 0,
                Some(s) => s
                    .strip_prefix("seed=")
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| bad(format!("seeding: expected seed=N, got {s:?}")))?,
            };
            Ok(Seeding::Random { count, seed })
        }
        _ => Err(bad(format!("unknown seeding {s:?}; expected uniform:NXxNYxNZ or random:N[:seed=S]"))),
    }
}

pub fn parse_id_list(s: &str) -> Result<Vec<usize>, InputError> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| bad(format!("{x:?} is not a node id"))))
        .collect()
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, InputError> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| bad(format!("{x:?} is not a number"))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    Rbn,
}

/// Neighbor graph parameters as they appear in requests and on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRequest {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// RBN radius as a fraction of the bounds diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_frac: Option<f64>,
    /// RBN radius in world units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default)]
    pub metric: SegmentDistanceMetric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl GraphRequest {
    pub fn to_options(&self) -> Result<BuildOptions, InputError> {
        let mut opts = match self.method {
            Method::Knn => {
                if self.radius.is_some() || self.radius_frac.is_some() {
                    return Err(bad("knn takes k, not a radius"));
                }
                BuildOptions::knn(self.k.ok_or_else(|| bad("knn needs k"))?)
            }
            Method::Rbn => {
                if self.k.is_some() {
                    return Err(bad("rbn takes a radius, not k"));
                }
                match (self.radius_frac, self.radius) {
                    (Some(f), None) => BuildOptions::rbn(Radius::Fraction(f)),
                    (None, Some(r)) => BuildOptions::rbn(Radius::Absolute(r)),
                    _ => return Err(bad("rbn needs exactly one of radius_frac or radius")),
                }
            }
        };
        opts.metric = self.metric;
        opts.d_scale = self.d_scale;
        opts.threads = self.threads;
        Ok(opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeding_forms() {
        assert_eq!(parse_seeding("uniform:8x8x8").unwrap(), Seeding::UniformGrid { nx: 8, ny: 8, nz: 8 });
        assert_eq!(parse_seeding("random:216:seed=7").unwrap(), Seeding::Random { count: 216, seed: 7 });
        assert_eq!(parse_seeding("random:5").unwrap(), Seeding::Random { count: 5, seed: 0 });
        for s in ["uniform:8x8", "uniform:0x1x1", "random:0", "random:3:7", "grid:2x2x2"] {
            assert!(parse_seeding(s).is_err(), "{s}");
        }
    }

    #[test]
    fn field_forms() {
        assert!(matches!(parse_field("abc", None).unwrap(), VectorField::Analytic { kind: AnalyticKind::Abc { .. }, .. }));
        let d = parse_domain("0,0,0,1,2,3").unwrap();
        match parse_field("uniform:0,1,0", Some(d)).unwrap() {
            VectorField::Analytic { kind: AnalyticKind::Uniform { v }, domain } => {
                assert_eq!(v, Vec3::new(0.0, 1.0, 0.0));
                assert_eq!(domain, d);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_field("circular:1", None).is_err());
        assert!(parse_field("vortex", None).is_err());
        assert!(parse_field("missing.vf.json", None).is_err());
        assert!(parse_domain("1,0,0,0,1,1").is_err());
    }

    #[test]
    fn graph_requests() {
        let knn = GraphRequest {
            method: Method::Knn,
            k: Some(5),
            radius_frac: None,
            radius: None,
            metric: SegmentDistanceMetric::Average,
            d_scale: None,
            threads: Some(2),
        };
        let o = knn.to_options().unwrap();
        assert_eq!(o.metric, SegmentDistanceMetric::Average);
        assert_eq!(o.threads, Some(2));
        let both = GraphRequest { method: Method::Rbn, k: None, radius_frac: Some(0.1), radius: Some(1.0), ..knn.clone() };
        assert!(both.to_options().is_err());
        let rbn = GraphRequest { radius: None, ..both };
        assert!(rbn.to_options().is_ok());
        let parsed: GraphRequest = serde_json::from_str(r#"{"method":"rbn","radius_frac":0.01}"#).unwrap();
        assert_eq!(parsed.metric, SegmentDistanceMetric::Longest);
    }
}
