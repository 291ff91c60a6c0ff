//! Reconstruction quality, memory accounting and image comparison.

use std::collections::HashMap;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::model::{VoxelModel, HEADER_BYTES};
use crate::scene::CurveSet;

/// Maximum arc-length spacing between samples, in voxels.
pub const SAMPLE_SPACING: f64 = 0.1;

pub fn point_segment_distance(p: DVec3, a: DVec3, b: DVec3) -> f64 {
    let ab = b - a;
    let len2 = ab.length_squared();
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

fn sample_segments(segs: &[(DVec3, DVec3)]) -> Vec<DVec3> {
    let mut out = Vec::new();
    for &(a, b) in segs {
        let n = (a.distance(b) / SAMPLE_SPACING).ceil().max(1.0) as usize;
        out.extend((0..=n).map(|i| a.lerp(b, i as f64 / n as f64)));
    }
    out
}

/// Buckets segments by the unit cells their bounding boxes overlap.
struct SegmentIndex<'a> {
    segs: &'a [(DVec3, DVec3)],
    cells: HashMap<[i32; 3], Vec<u32>>,
    lo: [i32; 3],
    hi: [i32; 3],
}

impl<'a> SegmentIndex<'a> {
    fn new(segs: &'a [(DVec3, DVec3)]) -> Self {
        let mut cells: HashMap<[i32; 3], Vec<u32>> = HashMap::new();
        let (mut lo, mut hi) = ([i32::MAX; 3], [i32::MIN; 3]);
        for (i, &(a, b)) in segs.iter().enumerate() {
            let mn = a.min(b).floor().as_ivec3();
            let mx = a.max(b).floor().as_ivec3();
            for z in mn.z..=mx.z {
                for y in mn.y..=mx.y {
                    for x in mn.x..=mx.x {
                        cells.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
            for k in 0..3 {
                lo[k] = lo[k].min(mn[k]);
                hi[k] = hi[k].max(mx[k]);
            }
        }
        Self { segs, cells, lo, hi }
    }

    /// Exact distance to the nearest segment, searching rings of cells
    /// outward until no farther ring can hold anything closer.
    fn nearest(&self, p: DVec3) -> (f64, usize) {
        let c = p.floor().as_ivec3().to_array();
        let max_ring = (0..3).map(|a| (c[a] - self.lo[a]).abs().max((self.hi[a] - c[a]).abs())).max().unwrap_or(0);
        let mut best = (f64::INFINITY, usize::MAX);
        for ring in 0..=max_ring {
            for z in c[2] - ring..=c[2] + ring {
                for y in c[1] - ring..=c[1] + ring {
                    for x in c[0] - ring..=c[0] + ring {
                        let on_shell = (x - c[0]).abs() == ring || (y - c[1]).abs() == ring || (z - c[2]).abs() == ring;
                        if !on_shell {
                            continue;
                        }
                        if let Some(list) = self.cells.get(&[x, y, z]) {
                            for &i in list {
                                let (a, b) = self.segs[i as usize];
                                let d = point_segment_distance(p, a, b);
                                if d < best.0 || (d == best.0 && (i as usize) < best.1) {
                                    best = (d, i as usize);
                                }
                            }
                        }
                    }
                }
            }
            // Cells in the next ring are at least `ring` away.
            if best.0 <= ring as f64 {
                break;
            }
        }
        best
    }
}

/// Mean and max closest-point distance from samples of `a` to `b`.
fn directed(a: &[(DVec3, DVec3)], b: &SegmentIndex) -> (f64, f64) {
    let samples = sample_segments(a);
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for &p in &samples {
        let d = b.nearest(p).0;
        sum += d;
        max = max.max(d);
    }
    (sum / samples.len() as f64, max)
}

/// Symmetric mean closest-point distance between two segment sets, and the
/// largest closest-point distance in either direction.
pub fn segments_hausdorff(a: &[(DVec3, DVec3)], b: &[(DVec3, DVec3)]) -> (f64, f64) {
    let (ia, ib) = (SegmentIndex::new(a), SegmentIndex::new(b));
    let (mean_ab, max_ab) = directed(a, &ib);
    let (mean_ba, max_ba) = directed(b, &ia);
    ((mean_ab + mean_ba) * 0.5, max_ab.max(max_ba))
}

pub fn polyline_segments(points: &[DVec3]) -> Vec<(DVec3, DVec3)> {
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn polyline_hausdorff(a: &[DVec3], b: &[DVec3]) -> (f64, f64) {
    segments_hausdorff(&polyline_segments(a), &polyline_segments(b))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    /// Mean over curves of the symmetric mean distance, in voxels.
    pub mean: f64,
    /// Largest per-curve symmetric mean.
    pub max: f64,
    /// Largest closest-point distance seen on any curve.
    pub max_point: f64,
    pub curves: usize,
    /// Curves that produced no stored segments.
    pub skipped: usize,
}

/// Stored segments of every curve in travel order, in grid coordinates.
pub fn reconstructed_curves(model: &VoxelModel, curve_count: usize) -> Vec<Vec<(DVec3, DVec3)>> {
    let origins = model.origins();
    let voxels = model.segment_voxels();
    let mut per_curve: Vec<Vec<(u32, usize)>> = vec![Vec::new(); curve_count];
    for (i, o) in origins.iter().enumerate() {
        if let Some(list) = per_curve.get_mut(o.curve as usize) {
            list.push((o.seq, i));
        }
    }
    per_curve
        .into_iter()
        .map(|mut list| {
            list.sort_unstable();
            list.into_iter().map(|(_, i)| model.endpoints(voxels[i] as usize, &model.segments()[i])).collect()
        })
        .collect()
}

fn curve_points(set: &CurveSet, i: usize) -> Vec<DVec3> {
    set.curves[i].points.iter().map(|p| p.as_dvec3()).collect()
}

/// `original` must be in the model's grid coordinates and in build order.
pub fn mean_hausdorff(original: &CurveSet, model: &VoxelModel) -> HausdorffReport {
    let recon = reconstructed_curves(model, original.curves.len());
    let per_curve: Vec<Option<(f64, f64)>> = crate::par::map_indexed(recon.len(), |i| {
        if recon[i].is_empty() {
            return None;
        }
        Some(segments_hausdorff(&polyline_segments(&curve_points(original, i)), &recon[i]))
    });
    let mut r = HausdorffReport::default();
    let mut sum = 0.0;
    for v in per_curve {
        match v {
            Some((mean, max)) => {
                r.curves += 1;
                sum += mean;
                r.max = r.max.max(mean);
                r.max_point = r.max_point.max(max);
            }
            None => r.skipped += 1,
        }
    }
    if r.curves > 0 {
        r.mean = sum / r.curves as f64;
    }
    r
}

fn angle_between_lines(u: DVec3, v: DVec3) -> f64 {
    let (u, v) = (u.normalize_or_zero(), v.normalize_or_zero());
    u.dot(v).abs().min(1.0).acos().to_degrees()
}

/// Mean angle in degrees between each original vertex tangent and the
/// nearest reconstructed segment of the same curve.
pub fn mean_tangent_deviation(original: &CurveSet, model: &VoxelModel) -> f64 {
    let recon = reconstructed_curves(model, original.curves.len());
    let per_curve: Vec<(f64, usize)> = crate::par::map_indexed(recon.len(), |i| {
        let segs: Vec<(DVec3, DVec3)> = recon[i].iter().copied().filter(|(a, b)| a != b).collect();
        if segs.is_empty() {
            return (0.0, 0);
        }
        polyline_tangent_sum(&curve_points(original, i), &segs)
    });
    let (sum, n) = per_curve.iter().fold((0.0, 0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn polyline_tangent_sum(points: &[DVec3], segs: &[(DVec3, DVec3)]) -> (f64, usize) {
    let index = SegmentIndex::new(segs);
    let mut sum = 0.0;
    for k in 0..points.len() {
        let prev = points[k.saturating_sub(1)];
        let next = points[(k + 1).min(points.len() - 1)];
        let (_, j) = index.nearest(points[k]);
        let (a, b) = segs[j];
        sum += angle_between_lines(next - prev, b - a);
    }
    (sum, points.len())
}

/// Tangent deviation between a polyline and a set of segments.
pub fn polyline_tangent_deviation(points: &[DVec3], segs: &[(DVec3, DVec3)]) -> f64 {
    let (sum, n) = polyline_tangent_sum(points, segs);
    sum / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub voxels: u64,
    pub segments: u64,
    pub header_bytes: u64,
    pub segment_bytes: u64,
    pub total: u64,
    pub bytes_per_segment: u64,
}

pub fn memory_report(model: &VoxelModel) -> MemoryReport {
    let voxels = model.spec().voxel_count() as u64;
    let segments = model.segment_count() as u64;
    let width = model.record_width() as u64;
    let header_bytes = HEADER_BYTES as u64 * voxels;
    let segment_bytes = width * segments;
    MemoryReport { voxels, segments, header_bytes, segment_bytes, total: header_bytes + segment_bytes, bytes_per_segment: width }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageDiff {
    /// Largest per-channel difference, out of 255.
    pub max_diff: u8,
    /// Fraction of pixels whose channels all differ by at most 2.
    pub fraction_within: f64,
    /// Infinite for identical images.
    pub psnr: f64,
}

/// Compares two RGBA8 buffers of equal size.
pub fn image_compare(a: &[u8], b: &[u8]) -> ImageDiff {
    assert_eq!(a.len(), b.len(), "images differ in size");
    assert_eq!(a.len() % 4, 0);
    let mut max_diff = 0u8;
    let mut within = 0usize;
    let mut se = 0f64;
    for (pa, pb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        let mut px_max = 0u8;
        for c in 0..4 {
            let d = pa[c].abs_diff(pb[c]);
            px_max = px_max.max(d);
            se += (d as f64).powi(2);
        }
        max_diff = max_diff.max(px_max);
        within += (px_max <= 2) as usize;
    }
    let pixels = (a.len() / 4).max(1);
    let mse = se / a.len().max(1) as f64;
    let psnr = if mse == 0.0 { f64::INFINITY } else { 10.0 * (255.0f64.powi(2) / mse).log10() };
    ImageDiff { max_diff, fraction_within: within as f64 / pixels as f64, psnr }
}
