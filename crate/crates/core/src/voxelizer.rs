//! Curve clipping against the macro grid, face quantization, bit packing and
//! compaction into the header + flat segment array layout.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SegmentOrigin, TransferTable, VoxelModel};
use crate::par;
use crate::scene::{Curve, CurveSet, GridSpec};

/// Voxel face id: `2 * axis + side`, where side 0 is the face at local
/// coordinate 0 and side 1 the face at coordinate 1.
///
/// Ids: 0 = -x, 1 = +x, 2 = -y, 3 = +y, 4 = -z, 5 = +z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Face(u8);

impl Face {
    pub const ALL: [Face; 6] = [Face(0), Face(1), Face(2), Face(3), Face(4), Face(5)];

    pub fn new(id: u8) -> Option<Self> {
        (id < 6).then_some(Face(id))
    }

    pub fn from_axis_side(axis: usize, side: usize) -> Self {
        debug_assert!(axis < 3 && side < 2);
        Face((2 * axis + side) as u8)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn axis(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn side(self) -> usize {
        (self.0 % 2) as usize
    }

    /// The two in-face axes in increasing order.
    pub fn in_face_axes(self) -> (usize, usize) {
        match self.axis() {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }
}

/// Smallest face id among the faces of the unit cube that `local` lies on,
/// or the nearest face when it lies on none.
pub fn face_of_local(local: DVec3) -> Face {
    let mut best = Face(0);
    let mut best_d = f64::INFINITY;
    for f in Face::ALL {
        let c = local[f.axis()];
        let d = if f.side() == 0 { c.abs() } else { (1.0 - c).abs() };
        if d < best_d {
            best_d = d;
            best = f;
        }
    }
    best
}

/// A curve piece between two consecutive face crossings, before quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedSegment {
    pub voxel: [u32; 3],
    /// Entry point in grid coordinates.
    pub entry: DVec3,
    pub exit: DVec3,
    pub attr_in: f64,
    pub attr_out: f64,
    /// Index of the first curve edge this piece overlaps.
    pub edge: usize,
}

impl ClippedSegment {
    pub fn origin(&self) -> DVec3 {
        DVec3::new(self.voxel[0] as f64, self.voxel[1] as f64, self.voxel[2] as f64)
    }

    pub fn local_entry(&self) -> DVec3 {
        self.entry - self.origin()
    }

    pub fn local_exit(&self) -> DVec3 {
        self.exit - self.origin()
    }
}

#[inline]
fn voxel_of(p: DVec3, spec: &GridSpec) -> [i64; 3] {
    let mut v = [0i64; 3];
    for a in 0..3 {
        v[a] = (p[a].floor() as i64).clamp(0, spec.dims[a] as i64 - 1);
    }
    v
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    point: DVec3,
    attr: f64,
    voxel_after: [i64; 3],
    edge: usize,
}

/// Splits a grid-normalized curve at every voxel face crossing.
///
/// Consecutive items chain exactly (`exit` of one is `entry` of the next);
/// the pieces before the first and after the last crossing are dropped.
pub fn clip_curve_to_voxels(curve: &Curve, spec: &GridSpec) -> Vec<ClippedSegment> {
    let pts: Vec<DVec3> = curve.points.iter().map(|p| p.as_dvec3()).collect();
    if pts.len() < 2 {
        return Vec::new();
    }
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut cur = voxel_of(pts[0], spec);
    for (i, w) in pts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let (attr_a, attr_b) = (curve.attrs[i] as f64, curve.attrs[i + 1] as f64);
        let target = voxel_of(b, spec);
        let d = b - a;
        while cur != target {
            let mut s_min = f64::INFINITY;
            let mut planes = [None; 3];
            for ax in 0..3 {
                if cur[ax] == target[ax] {
                    continue;
                }
                let plane = if target[ax] > cur[ax] { cur[ax] + 1 } else { cur[ax] } as f64;
                let s = ((plane - a[ax]) / d[ax]).clamp(0.0, 1.0);
                planes[ax] = Some((plane, s));
                s_min = s_min.min(s);
            }
            let mut point = a + d * s_min;
            for ax in 0..3 {
                if let Some((plane, s)) = planes[ax] {
                    if s == s_min {
                        point[ax] = plane;
                        cur[ax] += if target[ax] > cur[ax] { 1 } else { -1 };
                    }
                }
            }
            crossings.push(Crossing { point, attr: attr_a + (attr_b - attr_a) * s_min, voxel_after: cur, edge: i });
        }
    }
    crossings
        .windows(2)
        .map(|w| {
            let v = w[0].voxel_after;
            ClippedSegment {
                voxel: [v[0] as u32, v[1] as u32, v[2] as u32],
                entry: w[0].point,
                exit: w[1].point,
                attr_in: w[0].attr,
                attr_out: w[1].attr,
                edge: w[0].edge,
            }
        })
        .collect()
}

/// Tolerance, in voxel units, for a point to count as lying on a face.
pub const ON_FACE_TOLERANCE: f64 = 1e-6;

/// Snaps a point on `face` (voxel-local coordinates) to the center of its
/// bin, returning the bin index `u + N * v` and the bin center.
pub fn quantize_point_on_face(local: DVec3, face: Face, bins: u32) -> Result<(u32, DVec3)> {
    let target = face.side() as f64;
    let distance = (local[face.axis()] - target).abs();
    if distance > ON_FACE_TOLERANCE {
        return Err(Error::OffFace { face: face.id(), distance });
    }
    Ok(quantize_unchecked(local, face, bins))
}

fn quantize_unchecked(local: DVec3, face: Face, bins: u32) -> (u32, DVec3) {
    let (u, v) = face.in_face_axes();
    let cell = |c: f64| ((c * bins as f64).floor().max(0.0) as u32).min(bins - 1);
    let (bu, bv) = (cell(local[u]), cell(local[v]));
    let bin = bu + bins * bv;
    (bin, bin_center(face, bin, bins))
}

/// Bin center in voxel-local coordinates.
pub fn bin_center(face: Face, bin: u32, bins: u32) -> DVec3 {
    let (u, v) = face.in_face_axes();
    let mut p = DVec3::ZERO;
    p[face.axis()] = face.side() as f64;
    p[u] = ((bin % bins) as f64 + 0.5) / bins as f64;
    p[v] = ((bin / bins) as f64 + 0.5) / bins as f64;
    p
}

/// Number of bits for a segment record with `bins` per axis:
/// two endpoints of (3 face bits + 2 log2 N bin bits), an 8-bit attribute
/// index and a 5-bit local line id.
pub fn record_bits(bins: u32) -> u32 {
    2 * (3 + 2 * bins.trailing_zeros()) + 8 + LOCAL_ID_BITS
}

/// Minimal whole number of bytes holding [`record_bits`].
pub fn record_width(bins: u32) -> usize {
    record_bits(bins).div_ceil(8) as usize
}

pub const LOCAL_ID_BITS: u32 = 5;
pub const LOCAL_ID_COUNT: u32 = 1 << LOCAL_ID_BITS;
/// Header line counts are one byte.
pub const MAX_SEGMENTS_PER_VOXEL: usize = 255;

/// One per-voxel line piece: two (face, bin) endpoint codes, a transfer
/// table index and a small per-voxel id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedSegment {
    pub face_in: u8,
    pub face_out: u8,
    pub bin_in: u32,
    pub bin_out: u32,
    pub attr_index: u8,
    pub local_id: u8,
}

impl QuantizedSegment {
    pub fn endpoints_local(&self, bins: u32) -> (DVec3, DVec3) {
        (bin_center(Face(self.face_in), self.bin_in, bins), bin_center(Face(self.face_out), self.bin_out, bins))
    }

    /// Endpoint codes with the smaller one first, for orientation-free comparison.
    pub fn undirected_key(&self) -> ((u8, u32), (u8, u32)) {
        let a = (self.face_in, self.bin_in);
        let b = (self.face_out, self.bin_out);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

pub fn pack_segment(seg: &QuantizedSegment, bins: u32) -> Result<Vec<u8>> {
    let mut out = vec![0u8; record_width(bins)];
    pack_segment_into(seg, bins, &mut out)?;
    Ok(out)
}

pub fn pack_segment_into(seg: &QuantizedSegment, bins: u32, out: &mut [u8]) -> Result<()> {
    let bin_bits = 2 * bins.trailing_zeros();
    let fields: [(&'static str, u64, u32); 6] = [
        ("face_in", seg.face_in as u64, 3),
        ("face_out", seg.face_out as u64, 3),
        ("bin_in", seg.bin_in as u64, bin_bits),
        ("bin_out", seg.bin_out as u64, bin_bits),
        ("attr_index", seg.attr_index as u64, 8),
        ("local_id", seg.local_id as u64, LOCAL_ID_BITS),
    ];
    let mut word = 0u64;
    let mut shift = 0;
    for (field, value, bits) in fields {
        let limit = if field.starts_with("face") {
            6
        } else if field.starts_with("bin") {
            (bins as u64) * (bins as u64)
        } else {
            1 << bits
        };
        if value >= limit {
            return Err(Error::FieldOverflow { field, value, bits });
        }
        word |= value << shift;
        shift += bits;
    }
    let width = record_width(bins);
    out[..width].copy_from_slice(&word.to_le_bytes()[..width]);
    Ok(())
}

pub fn unpack_segment(bytes: &[u8], bins: u32) -> Result<QuantizedSegment> {
    let width = record_width(bins);
    if bytes.len() < width {
        return Err(Error::Truncated(format!("segment record needs {width} bytes, got {}", bytes.len())));
    }
    let mut raw = [0u8; 8];
    raw[..width].copy_from_slice(&bytes[..width]);
    let mut word = u64::from_le_bytes(raw);
    let mut take = |bits: u32| {
        let v = word & ((1u64 << bits) - 1);
        word >>= bits;
        v
    };
    let bin_bits = 2 * bins.trailing_zeros();
    let seg = QuantizedSegment {
        face_in: take(3) as u8,
        face_out: take(3) as u8,
        bin_in: take(bin_bits) as u32,
        bin_out: take(bin_bits) as u32,
        attr_index: take(8) as u8,
        local_id: take(LOCAL_ID_BITS) as u8,
    };
    if seg.face_in > 5 || seg.face_out > 5 {
        return Err(Error::Format(format!("face id out of range in record {:?}", &bytes[..width])));
    }
    Ok(seg)
}

/// Quantizes one clipped piece. The local id is assigned during compaction.
pub fn quantize_segment(clip: &ClippedSegment, bins: u32) -> QuantizedSegment {
    let li = clip.local_entry();
    let lo = clip.local_exit();
    let face_in = face_of_local(li);
    let face_out = face_of_local(lo);
    let (bin_in, _) = quantize_unchecked(li.clamp(DVec3::ZERO, DVec3::ONE), face_in, bins);
    let (bin_out, _) = quantize_unchecked(lo.clamp(DVec3::ZERO, DVec3::ONE), face_out, bins);
    let attr = (0.5 * (clip.attr_in + clip.attr_out)).clamp(0.0, 1.0);
    QuantizedSegment { face_in: face_in.id(), face_out: face_out.id(), bin_in, bin_out, attr_index: (attr * 255.0).round() as u8, local_id: 0 }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Refuse to build models whose reported size exceeds this many bytes.
    pub memory_budget: Option<u64>,
    pub transfer: TransferTable,
}

/// Counters collected while building a model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub clipped_segments: usize,
    /// Segments beyond the per-voxel cap of 255.
    pub dropped_overflow: usize,
    /// Voxels holding more lines than distinct local ids.
    pub id_collision_voxels: usize,
}

pub fn build_voxel_model(set: &CurveSet, spec: &GridSpec) -> Result<VoxelModel> {
    build_voxel_model_with(set, spec, &BuildOptions::default())
}

/// Clip every curve, quantize, sort by voxel id and prefix-sum the counts
/// into per-voxel headers.
pub fn build_voxel_model_with(set: &CurveSet, spec: &GridSpec, opts: &BuildOptions) -> Result<VoxelModel> {
    let spec = GridSpec::new(spec.dims, spec.bins)?;
    let voxel_count = spec.voxel_count();
    let header_bytes = crate::model::HEADER_BYTES as u64 * voxel_count as u64;
    if let Some(budget) = opts.memory_budget {
        if header_bytes > budget {
            return Err(Error::MemoryBudget { needed: header_bytes, budget });
        }
    }

    // Per-curve buffers, concatenated in curve order.
    let per_curve: Vec<Vec<(u32, QuantizedSegment, SegmentOrigin)>> = par::map_indexed(set.curves.len(), |ci| {
        clip_curve_to_voxels(&set.curves[ci], &spec)
            .iter()
            .enumerate()
            .map(|(seq, clip)| {
                let id = spec.linear(clip.voxel) as u32;
                (id, quantize_segment(clip, spec.bins), SegmentOrigin { curve: ci as u32, seq: seq as u32 })
            })
            .collect()
    });
    let mut raw: Vec<(u32, QuantizedSegment, SegmentOrigin)> = per_curve.into_iter().flatten().collect();
    let clipped = raw.len();
    raw.sort_by_key(|r| r.0);

    let mut counts = vec![0u8; voxel_count];
    let mut offsets = vec![0u32; voxel_count];
    let mut segments = Vec::with_capacity(raw.len());
    let mut origins = Vec::with_capacity(raw.len());
    let mut stats = BuildStats { clipped_segments: clipped, ..Default::default() };

    let mut i = 0;
    while i < raw.len() {
        let voxel = raw[i].0 as usize;
        let end = i + raw[i..].iter().take_while(|r| r.0 as usize == voxel).count();
        let run = end - i;
        let kept = run.min(MAX_SEGMENTS_PER_VOXEL);
        stats.dropped_overflow += run - kept;
        if kept > LOCAL_ID_COUNT as usize {
            stats.id_collision_voxels += 1;
        }
        counts[voxel] = kept as u8;
        for (k, (_, mut seg, origin)) in raw[i..i + kept].iter().copied().enumerate() {
            seg.local_id = (k as u32 % LOCAL_ID_COUNT) as u8;
            segments.push(seg);
            origins.push(origin);
        }
        i = end;
    }
    // Exclusive prefix sum; empty voxels point at the next occupied run.
    let mut acc = 0u32;
    for (c, o) in counts.iter().zip(offsets.iter_mut()) {
        *o = acc;
        acc += *c as u32;
    }
    if stats.dropped_overflow > 0 {
        log::warn!("{} segments dropped by the per-voxel cap of {MAX_SEGMENTS_PER_VOXEL}", stats.dropped_overflow);
    }

    let model = VoxelModel::from_parts(spec, counts, offsets, segments, opts.transfer.clone())?.with_origins(origins).with_stats(stats);
    if let Some(budget) = opts.memory_budget {
        let needed = model.memory_bytes();
        if needed > budget {
            return Err(Error::MemoryBudget { needed, budget });
        }
    }
    Ok(model)
}

/// Fraction of segments that coincide (same voxel and the same pair of
/// face/bin endpoint codes, in either orientation) with an earlier one.
pub fn count_duplicates(model: &VoxelModel) -> f64 {
    let total = model.segment_count();
    if total == 0 {
        return 0.0;
    }
    let mut dups = 0usize;
    let mut keys = Vec::new();
    for v in 0..model.spec().voxel_count() {
        let segs = model.voxel_segments(v);
        if segs.len() < 2 {
            continue;
        }
        keys.clear();
        keys.extend(segs.iter().map(QuantizedSegment::undirected_key));
        keys.sort_unstable();
        dups += keys.windows(2).filter(|w| w[0] == w[1]).count();
    }
    dups as f64 / total as f64
}
