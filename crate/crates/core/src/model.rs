//! The compacted voxel model: dense per-voxel headers over a flat array of
//! quantized segments, grouped by voxel.

use std::ops::Range;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::GridSpec;
use crate::voxelizer::{record_width, BuildStats, QuantizedSegment};

/// One byte line count plus a four byte offset.
pub const HEADER_BYTES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelHeader {
    pub line_count: u8,
    pub first_segment_offset: u32,
}

/// Which curve, and which piece along it, a stored segment came from.
/// Kept beside the model for quality metrics; not part of the memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOrigin {
    pub curve: u32,
    pub seq: u32,
}

/// 256 RGBA entries; alpha is the line opacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferTable {
    entries: Vec<[f32; 4]>,
}

impl Default for TransferTable {
    fn default() -> Self {
        Self::preset("coolwarm").unwrap()
    }
}

impl TransferTable {
    pub const SIZE: usize = 256;
    pub const PRESETS: [&'static str; 4] = ["coolwarm", "viridis", "gray", "white"];

    pub fn from_entries(entries: Vec<[f32; 4]>) -> Result<Self> {
        if entries.len() != Self::SIZE {
            return Err(Error::InvalidArgument(format!("transfer table needs 256 entries, got {}", entries.len())));
        }
        Ok(Self { entries })
    }

    pub fn constant(rgba: [f32; 4]) -> Self {
        Self { entries: vec![rgba; Self::SIZE] }
    }

    /// Piecewise-linear colormap through `stops`, fully opaque.
    pub fn gradient(stops: &[[f32; 3]]) -> Self {
        let n = stops.len();
        let entries = (0..Self::SIZE)
            .map(|i| {
                if n == 1 {
                    let c = stops[0];
                    return [c[0], c[1], c[2], 1.0];
                }
                let x = i as f32 / 255.0 * (n - 1) as f32;
                let k = (x.floor() as usize).min(n - 2);
                let t = x - k as f32;
                let (a, b) = (stops[k], stops[k + 1]);
                [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t, 1.0]
            })
            .collect();
        Self { entries }
    }

    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "coolwarm" => Self::gradient(&[[0.230, 0.299, 0.754], [0.865, 0.865, 0.865], [0.706, 0.016, 0.150]]),
            "viridis" => {
                Self::gradient(&[[0.267, 0.005, 0.329], [0.229, 0.322, 0.546], [0.128, 0.567, 0.551], [0.370, 0.789, 0.383], [0.993, 0.906, 0.144]])
            }
            "gray" => Self::gradient(&[[0.25, 0.25, 0.25], [0.95, 0.95, 0.95]]),
            "white" => Self::constant([1.0; 4]),
            _ => return None,
        })
    }

    pub fn with_opacity(mut self, alpha: f32) -> Self {
        for e in &mut self.entries {
            e[3] = alpha;
        }
        self
    }

    pub fn entries(&self) -> &[[f32; 4]] {
        &self.entries
    }

    #[inline]
    pub fn rgba(&self, index: u8) -> [f32; 4] {
        self.entries[index as usize]
    }

    #[inline]
    pub fn opacity(&self, index: u8) -> f32 {
        self.entries[index as usize][3]
    }
}

#[derive(Debug, Clone)]
pub struct VoxelModel {
    spec: GridSpec,
    counts: Vec<u8>,
    offsets: Vec<u32>,
    segments: Vec<QuantizedSegment>,
    origins: Vec<SegmentOrigin>,
    transfer: TransferTable,
    stats: BuildStats,
}

impl VoxelModel {
    /// Validates the header arrays against the segment array.
    pub fn from_parts(spec: GridSpec, counts: Vec<u8>, offsets: Vec<u32>, segments: Vec<QuantizedSegment>, transfer: TransferTable) -> Result<Self> {
        let n = spec.voxel_count();
        if counts.len() != n || offsets.len() != n {
            return Err(Error::Format(format!("expected {n} headers, got {} counts / {} offsets", counts.len(), offsets.len())));
        }
        let mut acc = 0u64;
        for (i, (&c, &o)) in counts.iter().zip(&offsets).enumerate() {
            if c > 0 && o as u64 != acc {
                return Err(Error::Format(format!("voxel {i}: offset {o} does not follow previous runs ({acc})")));
            }
            acc += c as u64;
        }
        if acc != segments.len() as u64 {
            return Err(Error::Format(format!("header counts sum to {acc}, segment array holds {}", segments.len())));
        }
        let cells = spec.bins * spec.bins;
        if let Some(s) = segments.iter().find(|s| s.face_in > 5 || s.face_out > 5 || s.bin_in >= cells || s.bin_out >= cells) {
            return Err(Error::Format(format!("segment {s:?} out of range for {} bins", spec.bins)));
        }
        Ok(Self { spec, counts, offsets, segments, origins: Vec::new(), transfer, stats: BuildStats::default() })
    }

    pub(crate) fn with_origins(mut self, origins: Vec<SegmentOrigin>) -> Self {
        debug_assert_eq!(origins.len(), self.segments.len());
        self.origins = origins;
        self
    }

    pub(crate) fn with_stats(mut self, stats: BuildStats) -> Self {
        self.stats = stats;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bins(&self) -> u32 {
        self.spec.bins
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn transfer(&self) -> &TransferTable {
        &self.transfer
    }

    pub fn set_transfer(&mut self, table: TransferTable) {
        self.transfer = table;
    }

    pub fn segments(&self) -> &[QuantizedSegment] {
        &self.segments
    }

    /// Per-segment provenance; empty when the model was loaded without it.
    pub fn origins(&self) -> &[SegmentOrigin] {
        &self.origins
    }

    pub fn set_origins(&mut self, origins: Vec<SegmentOrigin>) -> Result<()> {
        if origins.len() != self.segments.len() {
            return Err(Error::Format(format!("{} origins for {} segments", origins.len(), self.segments.len())));
        }
        self.origins = origins;
        Ok(())
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    #[inline]
    pub fn header(&self, voxel: usize) -> VoxelHeader {
        VoxelHeader { line_count: self.counts[voxel], first_segment_offset: self.offsets[voxel] }
    }

    #[inline]
    pub fn segment_range(&self, voxel: usize) -> Range<usize> {
        let start = self.offsets[voxel] as usize;
        start..start + self.counts[voxel] as usize
    }

    #[inline]
    pub fn voxel_segments(&self, voxel: usize) -> &[QuantizedSegment] {
        &self.segments[self.segment_range(voxel)]
    }

    /// Linear voxel id of every stored segment.
    pub fn segment_voxels(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.segments.len());
        for (v, &c) in self.counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(v as u32, c as usize));
        }
        out
    }

    /// Reconstructed endpoints of `seg` in grid coordinates.
    #[inline]
    pub fn endpoints(&self, voxel: usize, seg: &QuantizedSegment) -> (DVec3, DVec3) {
        let c = self.spec.coords(voxel);
        let origin = DVec3::new(c[0] as f64, c[1] as f64, c[2] as f64);
        let (a, b) = seg.endpoints_local(self.spec.bins);
        (origin + a, origin + b)
    }

    pub fn record_width(&self) -> usize {
        record_width(self.spec.bins)
    }

    /// `5 * voxels + record_width * segments`.
    pub fn memory_bytes(&self) -> u64 {
        (HEADER_BYTES * self.spec.voxel_count()) as u64 + (self.record_width() * self.segments.len()) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_parts_checks_prefix_sums() {
        let spec = GridSpec::cube(2, 4).unwrap();
        let seg = QuantizedSegment { face_in: 0, face_out: 1, bin_in: 0, bin_out: 3, attr_index: 0, local_id: 0 };
        let mut counts = vec![0u8; 8];
        counts[3] = 1;
        let ok = VoxelModel::from_parts(spec, counts.clone(), vec![0; 8], vec![seg], TransferTable::default());
        assert!(ok.is_ok());
        let mut offsets = vec![0u32; 8];
        offsets[3] = 2;
        assert!(VoxelModel::from_parts(spec, counts.clone(), offsets, vec![seg], TransferTable::default()).is_err());
        assert!(VoxelModel::from_parts(spec, counts, vec![0; 8], vec![], TransferTable::default()).is_err());
    }

    #[test]
    fn gradient_endpoints() {
        let t = TransferTable::gradient(&[[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]]);
        assert_eq!(t.rgba(0), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(t.rgba(255), [1.0, 0.5, 0.0, 1.0]);
        assert!(TransferTable::PRESETS.iter().all(|p| TransferTable::preset(p).is_some()));
    }
}
