//! Curve sets: loading, synthetic generation and normalization into the
//! grid-local frame where every voxel is a unit cube.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use glam::{DVec3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::splat(f32::INFINITY), max: Vec3::splat(f32::NEG_INFINITY) }
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.cmpge(self.min).all() && p.cmple(self.max).all()
    }
}

/// One polyline with a scalar attribute in `[0, 1]` per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<Vec3>,
    pub attrs: Vec<f32>,
}

impl Curve {
    pub fn new(points: Vec<Vec3>, attrs: Vec<f32>) -> Self {
        assert_eq!(points.len(), attrs.len(), "one attribute per vertex");
        Self { points, attrs }
    }

    /// Curve with every attribute set to zero.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let attrs = vec![0.0; points.len()];
        Self { points, attrs }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Set of curves plus their tight bounding box.
///
/// Every curve holds at least two vertices and no zero-length edges; the
/// constructor drops offending vertices and records how many edges went away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub curves: Vec<Curve>,
    pub bbox: Aabb,
    /// Zero-length edges removed while building the set.
    pub dropped_degenerate: usize,
}

impl CurveSet {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        let mut dropped = 0;
        let mut kept = Vec::with_capacity(curves.len());
        for curve in curves {
            let mut points = Vec::with_capacity(curve.points.len());
            let mut attrs = Vec::with_capacity(curve.points.len());
            for (&p, &a) in curve.points.iter().zip(&curve.attrs) {
                if points.last() == Some(&p) {
                    dropped += 1;
                    continue;
                }
                points.push(p);
                attrs.push(a.clamp(0.0, 1.0));
            }
            if points.len() >= 2 {
                kept.push(Curve { points, attrs });
            }
        }
        if kept.is_empty() {
            return Err(Error::NoCurves);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} zero-length segments");
        }
        let mut bbox = Aabb::empty();
        for p in kept.iter().flat_map(|c| &c.points) {
            bbox.grow(*p);
        }
        Ok(Self { curves: kept, bbox, dropped_degenerate: dropped })
    }

    pub fn vertex_count(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }
}

/// Macro grid resolution and per-face bin count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [u32; 3],
    pub bins: u32,
}

pub const MIN_BINS: u32 = 2;
pub const MAX_BINS: u32 = 256;

impl GridSpec {
    pub fn new(dims: [u32; 3], bins: u32) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dims must be positive, got {dims:?}")));
        }
        if !bins.is_power_of_two() || !(MIN_BINS..=MAX_BINS).contains(&bins) {
            return Err(Error::InvalidArgument(format!("bins per axis must be a power of two in [{MIN_BINS}, {MAX_BINS}], got {bins}")));
        }
        Ok(Self { dims, bins })
    }

    /// Grid whose longest axis has `resolution` voxels and whose other axes
    /// follow the aspect ratio of `bbox`.
    pub fn fit(bbox: &Aabb, resolution: u32, bins: u32) -> Result<Self> {
        let ext = bbox.extent().as_dvec3();
        let longest = ext.max_element();
        if !(longest > 0.0) {
            return Err(Error::DegenerateBounds);
        }
        let dims = ext.to_array().map(|e| ((e / longest * resolution as f64).round() as u32).max(1));
        Self::new(dims, bins)
    }

    pub fn cube(resolution: u32, bins: u32) -> Result<Self> {
        Self::new([resolution; 3], bins)
    }

    pub fn log2_bins(&self) -> u32 {
        self.bins.trailing_zeros()
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }

    /// Linear voxel id `x + r_x * (y + r_y * z)`.
    #[inline]
    pub fn linear(&self, v: [u32; 3]) -> usize {
        v[0] as usize + self.dims[0] as usize * (v[1] as usize + self.dims[1] as usize * v[2] as usize)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [u32; 3] {
        let rx = self.dims[0] as usize;
        let ry = self.dims[1] as usize;
        [(index % rx) as u32, ((index / rx) % ry) as u32, (index / (rx * ry)) as u32]
    }

    pub fn contains(&self, v: [i64; 3]) -> bool {
        (0..3).all(|a| v[a] >= 0 && v[a] < self.dims[a] as i64)
    }

    pub fn extent(&self) -> DVec3 {
        DVec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64)
    }
}

/// Maps every vertex uniformly into `[0, r_x] x [0, r_y] x [0, r_z]`,
/// centering the leftover slack on axes that do not fill the grid.
pub fn normalize_to_grid(set: &CurveSet, spec: &GridSpec) -> Result<CurveSet> {
    let min = set.bbox.min.as_dvec3();
    let ext = set.bbox.extent().as_dvec3();
    let dims = spec.extent();
    let scale = (0..3).filter(|&a| ext[a] > 0.0).map(|a| dims[a] / ext[a]).fold(f64::INFINITY, f64::min);
    if !scale.is_finite() {
        return Err(Error::DegenerateBounds);
    }
    let slack = (dims - ext * scale) * 0.5;
    let map = |p: Vec3| -> Vec3 {
        let q = (p.as_dvec3() - min) * scale + slack;
        q.clamp(DVec3::ZERO, dims).as_vec3()
    };
    let curves = set.curves.iter().map(|c| Curve { points: c.points.iter().map(|&p| map(p)).collect(), attrs: c.attrs.clone() }).collect();
    let mut out = CurveSet::new(curves)?;
    out.dropped_degenerate += set.dropped_degenerate;
    Ok(out)
}

/// Reads the polyline subset of Wavefront OBJ: `v x y z` and `l i j ...`
/// records. A comment `# attr a [b ...]` queues attributes for the vertices
/// that follow it; vertices without one get 0.
pub fn load_obj_lines(path: impl AsRef<Path>) -> Result<CurveSet> {
    let file = File::open(path)?;
    parse_obj_lines(BufReader::new(file))
}

pub fn parse_obj_lines(reader: impl BufRead) -> Result<CurveSet> {
    let mut verts: Vec<Vec3> = Vec::new();
    let mut attrs: Vec<f32> = Vec::new();
    let mut queued: std::collections::VecDeque<f32> = Default::default();
    let mut curves = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("attr") {
                for tok in it {
                    let a: f32 = tok.parse().map_err(|_| parse_err(format!("bad attribute {tok:?}")))?;
                    queued.push_back(a);
                }
            }
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut xyz = [0f32; 3];
                for c in &mut xyz {
                    let tok = it.next().ok_or_else(|| parse_err("vertex needs 3 coordinates".into()))?;
                    *c = tok.parse().map_err(|_| parse_err(format!("bad coordinate {tok:?}")))?;
                }
                verts.push(Vec3::from(xyz));
                attrs.push(queued.pop_front().unwrap_or(0.0).clamp(0.0, 1.0));
            }
            Some("l") => {
                let mut points = Vec::new();
                let mut pattrs = Vec::new();
                for tok in it {
                    let head = tok.split('/').next().unwrap_or(tok);
                    let idx: i64 = head.parse().map_err(|_| parse_err(format!("bad index {tok:?}")))?;
                    let resolved = if idx > 0 { idx - 1 } else { verts.len() as i64 + idx };
                    if idx == 0 || resolved < 0 || resolved >= verts.len() as i64 {
                        return Err(Error::IndexOutOfRange { line: lineno, index: idx, count: verts.len() });
                    }
                    points.push(verts[resolved as usize]);
                    pattrs.push(attrs[resolved as usize]);
                }
                if points.len() < 2 {
                    return Err(parse_err("line record needs at least 2 indices".into()));
                }
                curves.push(Curve { points, attrs: pattrs });
            }
            // Faces, normals, groups and friends are not part of a line set.
            _ => {}
        }
    }
    CurveSet::new(curves)
}

const LINES_MAGIC: &[u8; 4] = b"LNS1";

pub fn save_lines_binary(set: &CurveSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_lines_binary(set, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_lines_binary(set: &CurveSet, w: &mut impl Write) -> Result<()> {
    w.write_all(LINES_MAGIC)?;
    w.write_all(&(set.curves.len() as u32).to_le_bytes())?;
    for c in &set.curves {
        w.write_all(&(c.points.len() as u32).to_le_bytes())?;
        for (p, a) in c.points.iter().zip(&c.attrs) {
            for v in [p.x, p.y, p.z, *a] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn load_lines_binary(path: impl AsRef<Path>) -> Result<CurveSet> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_lines_binary(&bytes)
}

pub fn read_lines_binary(bytes: &[u8]) -> Result<CurveSet> {
    let mut r = crate::bytes::Reader::new(bytes);
    let magic = r.array::<4>("magic")?;
    if &magic != LINES_MAGIC {
        return Err(Error::BadMagic { expected: "LNS1", found: magic });
    }
    let count = r.u32("curve count")? as usize;
    let mut curves = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let n = r.u32("vertex count")? as usize;
        let mut points = Vec::with_capacity(n.min(1 << 20));
        let mut attrs = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let x = r.f32("vertex")?;
            let y = r.f32("vertex")?;
            let z = r.f32("vertex")?;
            points.push(Vec3::new(x, y, z));
            attrs.push(r.f32("attribute")?);
        }
        curves.push(Curve { points, attrs });
    }
    CurveSet::new(curves)
}

/// Loads `.obj` or `.lines` by extension.
pub fn load_curves(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => load_obj_lines(path),
        _ => load_lines_binary(path),
    }
}

/// Parameters of the synthetic tornado flow.
///
/// Velocity at `(x, y, z)` with `r = |(x, y)|`:
/// `omega(r) * (-y, x, 0) + (k x, k y, w)` with `omega(r) = Omega / (1 + (r / r_c)^2)`,
/// so swirl and curvature grow toward the axis. Seeds cluster near the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TornadoField {
    pub swirl: f64,
    pub core_radius: f64,
    pub expansion: f64,
    pub updraft: f64,
    pub dt: f64,
    pub seed_radius: (f64, f64),
    pub seed_height: f64,
}

impl Default for TornadoField {
    fn default() -> Self {
        Self { swirl: 8.0, core_radius: 0.2, expansion: 0.1, updraft: 0.25, dt: 0.012, seed_radius: (0.05, 1.0), seed_height: 0.5 }
    }
}

impl TornadoField {
    pub fn angular_velocity(&self, r: f64) -> f64 {
        let q = r / self.core_radius;
        self.swirl / (1.0 + q * q)
    }

    pub fn velocity(&self, p: DVec3) -> DVec3 {
        let r = p.x.hypot(p.y);
        let w = self.angular_velocity(r);
        DVec3::new(-w * p.y + self.expansion * p.x, w * p.x + self.expansion * p.y, self.updraft)
    }

    /// Box guaranteed to contain every vertex of a `steps`-vertex curve.
    ///
    /// One Euler step maps radius `r` to `g(r) = r * sqrt((1 + k dt)^2 + (omega(r) dt)^2)`,
    /// which is increasing in `r` for these parameters, so iterating `g` from
    /// the largest seed radius bounds every radius reached.
    pub fn bounds(&self, steps: usize) -> Aabb {
        let mut r = self.seed_radius.1;
        for _ in 1..steps {
            let a = 1.0 + self.expansion * self.dt;
            let b = self.angular_velocity(r) * self.dt;
            r *= (a * a + b * b).sqrt();
        }
        let top = self.seed_height + self.updraft * self.dt * steps.saturating_sub(1) as f64;
        Aabb { min: DVec3::new(-r, -r, 0.0).as_vec3(), max: DVec3::new(r, r, top).as_vec3() }
    }
}

/// `n_curves` streamlines of [`TornadoField`] integrated with fixed-step Euler.
pub fn generate_tornado(n_curves: usize, steps: usize, seed: u64) -> Result<CurveSet> {
    generate_tornado_with(&TornadoField::default(), n_curves, steps, seed)
}

pub fn generate_tornado_with(field: &TornadoField, n_curves: usize, steps: usize, seed: u64) -> Result<CurveSet> {
    if n_curves == 0 || steps < 2 {
        return Err(Error::InvalidArgument(format!("tornado needs n_curves >= 1 and steps >= 2, got {n_curves} and {steps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = field.bounds(steps).max.z as f64;
    let (r_lo, r_hi) = field.seed_radius;
    let mut curves = Vec::with_capacity(n_curves);
    for _ in 0..n_curves {
        let u: f64 = rng.gen();
        let r0 = r_lo + (r_hi - r_lo) * u * u;
        let theta: f64 = rng.gen::<f64>() * TAU;
        let z0: f64 = rng.gen::<f64>() * field.seed_height;
        let mut p = DVec3::new(r0 * theta.cos(), r0 * theta.sin(), z0);
        let mut points = Vec::with_capacity(steps);
        let mut attrs = Vec::with_capacity(steps);
        for _ in 0..steps {
            points.push(p.as_vec3());
            attrs.push((p.z / top).clamp(0.0, 1.0) as f32);
            p += field.velocity(p) * field.dt;
        }
        curves.push(Curve { points, attrs });
    }
    CurveSet::new(curves)
}
