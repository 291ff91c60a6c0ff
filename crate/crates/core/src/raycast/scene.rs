use std::ops::Range;
use std::sync::OnceLock;

use glam::DVec3;

use crate::lod::{build_rep_lines, DensityOctree, Field3, RepLineField};
use crate::model::VoxelModel;

pub(crate) const OWN: u8 = 1;
pub(crate) const NEAR: u8 = 2;

/// A voxel model prepared for rendering: decoded tube endpoints, an
/// occupancy mask padded by one voxel on every side, and lazily built
/// level-of-detail data.
#[derive(Debug)]
pub struct RenderScene {
    model: VoxelModel,
    prims: Vec<(DVec3, DVec3)>,
    seg_voxel: Vec<u32>,
    flags: Vec<u8>,
    pad: [usize; 3],
    octree: OnceLock<DensityOctree>,
    reps: OnceLock<RepLineField>,
    ao: Option<Field3>,
}

impl RenderScene {
    pub fn new(model: VoxelModel) -> Self {
        let spec = *model.spec();
        let seg_voxel = model.segment_voxels();
        let prims = seg_voxel.iter().zip(model.segments()).map(|(&v, s)| model.endpoints(v as usize, s)).collect();
        let pad = spec.dims.map(|d| d as usize + 2);
        let mut flags = vec![0u8; pad[0] * pad[1] * pad[2]];
        let at = |x: usize, y: usize, z: usize| x + pad[0] * (y + pad[1] * z);
        for (v, &c) in model.counts().iter().enumerate() {
            if c == 0 {
                continue;
            }
            let [x, y, z] = spec.coords(v).map(|c| c as usize + 1);
            flags[at(x, y, z)] |= OWN;
            for nz in z - 1..=z + 1 {
                for ny in y - 1..=y + 1 {
                    for nx in x - 1..=x + 1 {
                        flags[at(nx, ny, nz)] |= NEAR;
                    }
                }
            }
        }
        Self { model, prims, seg_voxel, flags, pad, octree: OnceLock::new(), reps: OnceLock::new(), ao: None }
    }

    /// Reuses level-of-detail data loaded alongside the model.
    pub fn with_lod(self, octree: Option<DensityOctree>, reps: Option<RepLineField>) -> Self {
        if let Some(o) = octree {
            let _ = self.octree.set(o);
        }
        if let Some(r) = reps {
            let _ = self.reps.set(r);
        }
        self
    }

    pub fn model(&self) -> &VoxelModel {
        &self.model
    }

    pub fn octree(&self) -> &DensityOctree {
        self.octree.get_or_init(|| DensityOctree::from_model(&self.model))
    }

    pub fn rep_lines(&self) -> &RepLineField {
        self.reps.get_or_init(|| build_rep_lines(&self.model, self.octree()))
    }

    pub fn ao_field(&self) -> Option<&Field3> {
        self.ao.as_ref()
    }

    pub fn set_ao_field(&mut self, field: Option<Field3>) {
        self.ao = field;
    }

    #[inline]
    pub fn prim(&self, segment: usize) -> (DVec3, DVec3) {
        self.prims[segment]
    }

    pub fn prims(&self) -> &[(DVec3, DVec3)] {
        &self.prims
    }

    #[inline]
    pub fn segment_voxel(&self, segment: usize) -> u32 {
        self.seg_voxel[segment]
    }

    /// Inclusive lower and exclusive upper corner of the padded grid.
    pub fn padded_bounds(&self) -> ([i32; 3], [i32; 3]) {
        ([-1; 3], self.model.spec().dims.map(|d| d as i32 + 1))
    }

    #[inline]
    pub(crate) fn flags(&self, v: [i32; 3]) -> u8 {
        let [x, y, z] = v.map(|c| (c + 1) as usize);
        self.flags[x + self.pad[0] * (y + self.pad[1] * z)]
    }

    /// Segments stored in grid voxel `v`, if it lies inside the grid.
    #[inline]
    pub(crate) fn own_segments(&self, v: [i32; 3]) -> Range<usize> {
        let dims = self.model.spec().dims;
        if (0..3).any(|a| v[a] < 0 || v[a] >= dims[a] as i32) {
            return 0..0;
        }
        self.model.segment_range(self.model.spec().linear(v.map(|c| c as u32)))
    }

    /// Calls `f` with every segment of the 3x3x3 block around `v`.
    #[inline]
    pub(crate) fn for_each_near(&self, v: [i32; 3], mut f: impl FnMut(usize)) {
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    for s in self.own_segments([v[0] + dx, v[1] + dy, v[2] + dz]) {
                        f(s);
                    }
                }
            }
        }
    }
}
