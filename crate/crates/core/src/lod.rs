//! Level-of-detail structures: a line density octree and per-voxel
//! representative lines on every coarser level.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::model::VoxelModel;
use crate::par;
use crate::voxelizer::{bin_center, face_of_local, quantize_point_on_face, Face, QuantizedSegment};

/// Dense scalar field with values at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field3 {
    pub dims: [u32; 3],
    pub values: Vec<f32>,
}

impl Field3 {
    pub fn zeros(dims: [u32; 3]) -> Self {
        Self { dims, values: vec![0.0; dims.iter().map(|&d| d as usize).product()] }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, z: u32) -> usize {
        x as usize + self.dims[0] as usize * (y as usize + self.dims[1] as usize * z as usize)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, z: u32) -> f32 {
        self.values[self.index(x, y, z)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Trilinear interpolation at `p`, given in cell units (cell `i` spans
    /// `[i, i + 1)` with its value at `i + 0.5`). Clamps to the edge cells.
    pub fn sample(&self, p: DVec3) -> f64 {
        let mut i0 = [0u32; 3];
        let mut i1 = [0u32; 3];
        let mut t = [0f64; 3];
        for a in 0..3 {
            let max = self.dims[a] as f64 - 1.0;
            let c = (p[a] - 0.5).clamp(0.0, max);
            let f = c.floor();
            i0[a] = f as u32;
            i1[a] = (f as u32 + 1).min(self.dims[a] - 1);
            t[a] = c - f;
        }
        let v = |x: u32, y: u32, z: u32| self.get(x, y, z) as f64;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(v(i0[0], i0[1], i0[2]), v(i1[0], i0[1], i0[2]), t[0]);
        let c10 = lerp(v(i0[0], i1[1], i0[2]), v(i1[0], i1[1], i0[2]), t[0]);
        let c01 = lerp(v(i0[0], i0[1], i1[2]), v(i1[0], i0[1], i1[2]), t[0]);
        let c11 = lerp(v(i0[0], i1[1], i1[2]), v(i1[0], i1[1], i1[2]), t[0]);
        lerp(lerp(c00, c10, t[1]), lerp(c01, c11, t[1]), t[2])
    }
}

/// Per-voxel line density: sum of segment length times opacity.
pub fn compute_density_level0(model: &VoxelModel) -> Field3 {
    let spec = model.spec();
    let transfer = model.transfer();
    let values = par::map_indexed(spec.voxel_count(), |v| {
        model
            .voxel_segments(v)
            .iter()
            .map(|s| {
                let (a, b) = s.endpoints_local(spec.bins);
                a.distance(b) * transfer.opacity(s.attr_index) as f64
            })
            .sum::<f64>() as f32
    });
    Field3 { dims: spec.dims, values }
}

/// Density fields from the grid resolution down to a single cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOctree {
    pub levels: Vec<Field3>,
}

/// Half resolution per axis, rounded up.
pub fn coarser_dims(dims: [u32; 3]) -> [u32; 3] {
    dims.map(|d| d.div_ceil(2))
}

/// Mean of the existing children of parent cell `(x, y, z)`.
pub fn parent_mean(child: &Field3, x: u32, y: u32, z: u32) -> f32 {
    let mut sum = 0f64;
    let mut n = 0u32;
    for cz in 2 * z..(2 * z + 2).min(child.dims[2]) {
        for cy in 2 * y..(2 * y + 2).min(child.dims[1]) {
            for cx in 2 * x..(2 * x + 2).min(child.dims[0]) {
                sum += child.get(cx, cy, cz) as f64;
                n += 1;
            }
        }
    }
    (sum / n as f64) as f32
}

pub fn build_octree(level0: Field3) -> DensityOctree {
    assert!(!level0.is_empty(), "octree needs a non-empty field");
    let mut levels = vec![level0];
    while levels.last().unwrap().dims.iter().any(|&d| d > 1) {
        let child = levels.last().unwrap();
        let dims = coarser_dims(child.dims);
        let (dx, dy) = (dims[0] as usize, dims[1] as usize);
        let values = par::map_indexed(dims.iter().map(|&d| d as usize).product(), |i| {
            parent_mean(child, (i % dx) as u32, ((i / dx) % dy) as u32, (i / (dx * dy)) as u32)
        });
        levels.push(Field3 { dims, values });
    }
    DensityOctree { levels }
}

impl DensityOctree {
    pub fn from_model(model: &VoxelModel) -> Self {
        build_octree(compute_density_level0(model))
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Trilinear sample of `level` at `p` in grid (level 0) coordinates.
    pub fn sample(&self, level: usize, p: DVec3) -> f64 {
        let scale = 1.0 / (1u64 << level) as f64;
        self.levels[level].sample(p * scale)
    }

    /// Sample at a fractional level, blending the two neighboring levels.
    pub fn sample_lod(&self, level: f64, p: DVec3) -> f64 {
        let max = (self.levels.len() - 1) as f64;
        let l = level.clamp(0.0, max);
        let lo = l.floor() as usize;
        let hi = (lo + 1).min(self.levels.len() - 1);
        let t = l - lo as f64;
        let a = self.sample(lo, p);
        if t == 0.0 || hi == lo {
            a
        } else {
            a + (self.sample(hi, p) - a) * t
        }
    }

    /// Every value multiplied by `k`; used by monotonicity checks.
    pub fn scaled(&self, k: f32) -> Self {
        let levels = self.levels.iter().map(|f| Field3 { dims: f.dims, values: f.values.iter().map(|v| v * k).collect() }).collect();
        Self { levels }
    }
}

/// Endpoint code on a voxel face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FacePoint {
    pub face: u8,
    pub bin: u32,
}

impl FacePoint {
    pub fn local(&self, bins: u32) -> DVec3 {
        bin_center(Face::new(self.face).expect("valid face"), self.bin, bins)
    }
}

/// Representative line of one coarse voxel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepLine {
    pub start: FacePoint,
    pub end: FacePoint,
    /// Total length of the represented lines, in units of this level's voxel size.
    pub weight: f32,
}

const ON_FACE_EPS: f64 = 1e-9;

fn on_some_face(p: DVec3) -> bool {
    (0..3).any(|a| p[a].abs() <= ON_FACE_EPS || (1.0 - p[a]).abs() <= ON_FACE_EPS)
}

fn snap_to_face(p: DVec3, face: Face, bins: u32) -> FacePoint {
    let mut q = p.clamp(DVec3::ZERO, DVec3::ONE);
    q[face.axis()] = face.side() as f64;
    let (bin, _) = quantize_point_on_face(q, face, bins).expect("point was projected onto the face");
    FacePoint { face: face.id(), bin }
}

fn snap_nearest(p: DVec3, bins: u32) -> FacePoint {
    snap_to_face(p, face_of_local(p.clamp(DVec3::ZERO, DVec3::ONE)), bins)
}

/// Continues the ray from `from` through `to` past `to` until it leaves
/// the unit cube.
fn extend_to_boundary(from: DVec3, to: DVec3) -> DVec3 {
    let d = to - from;
    let mut t = f64::INFINITY;
    for a in 0..3 {
        if d[a] > 1e-300 {
            t = t.min((1.0 - to[a]) / d[a]);
        } else if d[a] < -1e-300 {
            t = t.min((0.0 - to[a]) / d[a]);
        }
    }
    to + d * t.max(0.0)
}

/// Averages start and end points of `segments` (unit-cube local
/// coordinates, stored order), flipping any segment that points more than
/// 90 degrees away from the running average direction.
///
/// Returns the two averaged points before snapping.
pub fn average_segments(segments: &[(DVec3, DVec3)]) -> Option<(DVec3, DVec3)> {
    let (&(a0, b0), rest) = segments.split_first()?;
    let mut sum_s = a0;
    let mut sum_e = b0;
    for &(a, b) in rest {
        let running = sum_e - sum_s;
        let (a, b) = if (b - a).dot(running) < 0.0 { (b, a) } else { (a, b) };
        sum_s += a;
        sum_e += b;
    }
    let k = segments.len() as f64;
    Some((sum_s / k, sum_e / k))
}

/// Representative of the segments of one voxel, snapped to face bins.
///
/// Averages that already lie on a face snap in place; interior averages are
/// pushed along the averaged line onto the voxel boundary so that chains of
/// lines stay collinear across levels.
pub fn representative_line(segments: &[(DVec3, DVec3)], bins: u32) -> Option<(FacePoint, FacePoint)> {
    let (s, e) = average_segments(segments)?;
    let d = e - s;
    if d.length_squared() < 1e-18 {
        return Some((snap_nearest(s, bins), snap_nearest(e, bins)));
    }
    let s_out = if on_some_face(s) { s } else { extend_to_boundary(e, s) };
    let e_out = if on_some_face(e) { e } else { extend_to_boundary(s, e) };
    Some((snap_nearest(s_out, bins), snap_nearest(e_out, bins)))
}

/// One level of representatives. Level `l` voxels have side `2^l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepLevel {
    pub level: u32,
    pub dims: [u32; 3],
    pub lines: Vec<Option<RepLine>>,
}

impl RepLevel {
    pub fn voxel_size(&self) -> f64 {
        (1u64 << self.level) as f64
    }

    #[inline]
    pub fn index(&self, v: [u32; 3]) -> usize {
        v[0] as usize + self.dims[0] as usize * (v[1] as usize + self.dims[1] as usize * v[2] as usize)
    }

    pub fn coords(&self, i: usize) -> [u32; 3] {
        let (dx, dy) = (self.dims[0] as usize, self.dims[1] as usize);
        [(i % dx) as u32, ((i / dx) % dy) as u32, (i / (dx * dy)) as u32]
    }

    /// Endpoints of the representative in voxel `i`, in grid coordinates.
    pub fn endpoints(&self, i: usize, line: &RepLine, bins: u32) -> (DVec3, DVec3) {
        let c = self.coords(i);
        let size = self.voxel_size();
        let origin = DVec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * size;
        (origin + line.start.local(bins) * size, origin + line.end.local(bins) * size)
    }

    pub fn count(&self) -> usize {
        self.lines.iter().filter(|l| l.is_some()).count()
    }
}

/// Representatives for octree levels `1..`; `levels[k]` is octree level `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepLineField {
    pub bins: u32,
    pub levels: Vec<RepLevel>,
}

impl RepLineField {
    /// Representatives at octree level `level` (>= 1).
    pub fn level(&self, level: usize) -> Option<&RepLevel> {
        level.checked_sub(1).and_then(|k| self.levels.get(k))
    }
}

struct Member {
    a: DVec3,
    b: DVec3,
    /// Length in level-0 units (or the child's weight times its voxel size).
    mass: f64,
}

fn coarse_level(dims: [u32; 3], level: u32, bins: u32, members_of: impl Fn([u32; 3]) -> Vec<Member> + Sync) -> RepLevel {
    let (dx, dy) = (dims[0] as usize, dims[1] as usize);
    let size = (1u64 << level) as f64;
    let lines = par::map_indexed(dims.iter().map(|&d| d as usize).product(), |i| {
        let c = [(i % dx) as u32, ((i / dx) % dy) as u32, (i / (dx * dy)) as u32];
        let members = members_of(c);
        if members.is_empty() {
            return None;
        }
        let origin = DVec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * size;
        let local: Vec<(DVec3, DVec3)> = members.iter().map(|m| ((m.a - origin) / size, (m.b - origin) / size)).collect();
        let (start, end) = representative_line(&local, bins)?;
        let weight = (members.iter().map(|m| m.mass).sum::<f64>() / size) as f32;
        Some(RepLine { start, end, weight })
    });
    let mut out = RepLevel { level, dims, lines };
    connect_neighbors(&mut out, bins);
    out
}

/// Where two face-adjacent representatives both end on their shared face,
/// move both endpoints to the bin holding the average of the two points.
fn connect_neighbors(level: &mut RepLevel, bins: u32) {
    for i in 0..level.lines.len() {
        let c = level.coords(i);
        for axis in 0..3 {
            if c[axis] + 1 >= level.dims[axis] {
                continue;
            }
            let mut nc = c;
            nc[axis] += 1;
            let j = level.index(nc);
            let (Some(a), Some(b)) = (level.lines[i], level.lines[j]) else { continue };
            let hi = Face::from_axis_side(axis, 1).id();
            let lo = Face::from_axis_side(axis, 0).id();
            let pick = |l: &RepLine, f: u8| {
                if l.start.face == f {
                    Some(true)
                } else if l.end.face == f {
                    Some(false)
                } else {
                    None
                }
            };
            let (Some(a_start), Some(b_start)) = (pick(&a, hi), pick(&b, lo)) else { continue };
            let pa = if a_start { a.start } else { a.end };
            let pb = if b_start { b.start } else { b.end };
            // Both points share in-face coordinates; average them on B's face.
            let mut qa = pa.local(bins);
            qa[axis] = 0.0;
            let mid = (qa + pb.local(bins)) * 0.5;
            let (bin, _) = quantize_point_on_face(mid, Face::from_axis_side(axis, 0), bins).expect("on face");
            let set = |l: &mut RepLine, start: bool, face: u8| {
                let fp = FacePoint { face, bin };
                if start {
                    l.start = fp;
                } else {
                    l.end = fp;
                }
            };
            if let Some(l) = level.lines[i].as_mut() {
                set(l, a_start, hi);
            }
            if let Some(l) = level.lines[j].as_mut() {
                set(l, b_start, lo);
            }
        }
    }
}

/// Representatives for every octree level above 0.
pub fn build_rep_lines(model: &VoxelModel, octree: &DensityOctree) -> RepLineField {
    let spec = model.spec();
    let bins = spec.bins;
    let mut levels: Vec<RepLevel> = Vec::new();
    for level in 1..octree.level_count() {
        let dims = octree.levels[level].dims;
        let rep = if level == 1 {
            coarse_level(dims, 1, bins, |c| {
                let mut members = Vec::new();
                for z in 2 * c[2]..(2 * c[2] + 2).min(spec.dims[2]) {
                    for y in 2 * c[1]..(2 * c[1] + 2).min(spec.dims[1]) {
                        for x in 2 * c[0]..(2 * c[0] + 2).min(spec.dims[0]) {
                            let v = spec.linear([x, y, z]);
                            for s in model.voxel_segments(v) {
                                let (a, b) = model.endpoints(v, s);
                                members.push(Member { a, b, mass: a.distance(b) });
                            }
                        }
                    }
                }
                members
            })
        } else {
            let child = levels.last().unwrap();
            let child_size = child.voxel_size();
            coarse_level(dims, level as u32, bins, |c| {
                let mut members = Vec::new();
                for z in 2 * c[2]..(2 * c[2] + 2).min(child.dims[2]) {
                    for y in 2 * c[1]..(2 * c[1] + 2).min(child.dims[1]) {
                        for x in 2 * c[0]..(2 * c[0] + 2).min(child.dims[0]) {
                            let i = child.index([x, y, z]);
                            if let Some(l) = &child.lines[i] {
                                let (a, b) = child.endpoints(i, l, bins);
                                members.push(Member { a, b, mass: l.weight as f64 * child_size });
                            }
                        }
                    }
                }
                members
            })
        };
        levels.push(rep);
    }
    RepLineField { bins, levels }
}

/// Endpoints of a stored segment as unit-cube local points.
pub fn segment_local(seg: &QuantizedSegment, bins: u32) -> (DVec3, DVec3) {
    seg.endpoints_local(bins)
}
