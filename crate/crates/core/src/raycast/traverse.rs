//! Face-to-face voxel walking along a ray.

use glam::DVec3;

use super::intersect::Ray;
use crate::scene::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelStep {
    pub voxel: [i32; 3],
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Walks the integer cells of the box `[lo, hi)` pierced by a ray segment,
/// yielding only cells crossed over a positive length. Consecutive steps
/// share their boundary `t`, so the intervals tile the clipped ray.
#[derive(Debug, Clone)]
pub struct VoxelWalk {
    origin: DVec3,
    dir: DVec3,
    lo: [i32; 3],
    hi: [i32; 3],
    voxel: [i32; 3],
    t: f64,
    t_end: f64,
    done: bool,
}

impl VoxelWalk {
    pub fn new(ray: &Ray, lo: [i32; 3], hi: [i32; 3], t_min: f64, t_max: f64) -> Self {
        let (o, d) = (ray.origin, ray.dir);
        let mut t0 = t_min;
        let mut t1 = t_max;
        for a in 0..3 {
            let (l, h) = (lo[a] as f64, hi[a] as f64);
            if d[a] == 0.0 {
                if o[a] < l || o[a] > h {
                    t1 = f64::NEG_INFINITY;
                }
            } else {
                let ta = (l - o[a]) / d[a];
                let tb = (h - o[a]) / d[a];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
        }
        let mut voxel = [0; 3];
        let done = !(t0 < t1);
        if !done {
            let p = o + d * t0;
            for a in 0..3 {
                let f = p[a].floor();
                let mut v = f as i32;
                if p[a] == f && d[a] < 0.0 {
                    v -= 1;
                }
                voxel[a] = v.clamp(lo[a], hi[a] - 1);
            }
        }
        Self { origin: o, dir: d, lo, hi, voxel, t: t0, t_end: t1, done }
    }

    /// Where the clipped ray leaves the box.
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    fn boundary_t(&self, a: usize) -> f64 {
        let d = self.dir[a];
        if d > 0.0 {
            (self.voxel[a] as f64 + 1.0 - self.origin[a]) / d
        } else if d < 0.0 {
            (self.voxel[a] as f64 - self.origin[a]) / d
        } else {
            f64::INFINITY
        }
    }
}

impl Iterator for VoxelWalk {
    type Item = VoxelStep;

    fn next(&mut self) -> Option<VoxelStep> {
        while !self.done {
            let bt = [self.boundary_t(0), self.boundary_t(1), self.boundary_t(2)];
            let t_next = bt[0].min(bt[1]).min(bt[2]).max(self.t);
            let step = VoxelStep { voxel: self.voxel, t_enter: self.t, t_exit: t_next.min(self.t_end) };
            if t_next >= self.t_end {
                self.done = true;
            } else {
                for a in 0..3 {
                    if bt[a] <= t_next {
                        self.voxel[a] += if self.dir[a] > 0.0 { 1 } else { -1 };
                    }
                }
                if (0..3).any(|a| self.voxel[a] < self.lo[a] || self.voxel[a] >= self.hi[a]) {
                    self.done = true;
                }
                self.t = t_next;
            }
            if step.t_exit > step.t_enter {
                return Some(step);
            }
        }
        None
    }
}

/// Voxels of `spec` crossed by the ray (from its origin on), with their
/// `t` intervals, in order.
pub fn traverse_voxels(ray: &Ray, spec: &GridSpec) -> Vec<(usize, f64, f64)> {
    let hi = spec.dims.map(|d| d as i32);
    VoxelWalk::new(ray, [0; 3], hi, 0.0, f64::INFINITY).map(|s| (spec.linear(s.voxel.map(|c| c as u32)), s.t_enter, s.t_exit)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn axis_aligned_row() {
        let spec = GridSpec::cube(3, 4).unwrap();
        let v = traverse_voxels(&Ray::new(DVec3::new(-1.0, 0.5, 0.5), DVec3::X), &spec);
        assert_eq!(v, vec![(0, 1.0, 2.0), (1, 2.0, 3.0), (2, 3.0, 4.0)]);
    }

    #[test]
    fn pointing_away_is_empty() {
        let spec = GridSpec::cube(3, 4).unwrap();
        assert!(traverse_voxels(&Ray::new(DVec3::new(-1.0, 0.5, 0.5), -DVec3::X), &spec).is_empty());
        assert!(traverse_voxels(&Ray::new(DVec3::new(-1.0, 5.0, 0.5), DVec3::X), &spec).is_empty());
    }

    #[test]
    fn diagonal_through_corners_skips_touching_cells() {
        let spec = GridSpec::cube(3, 4).unwrap();
        let v = traverse_voxels(&Ray::new(DVec3::new(-1.0, -1.0, 0.5), DVec3::new(1.0, 1.0, 0.0)), &spec);
        let ids: Vec<usize> = v.iter().map(|s| s.0).collect();
        assert_eq!(ids, vec![spec.linear([0, 0, 0]), spec.linear([1, 1, 0]), spec.linear([2, 2, 0])]);
    }

    #[test]
    fn origin_on_boundary_heading_down() {
        let spec = GridSpec::cube(4, 4).unwrap();
        let v = traverse_voxels(&Ray::new(DVec3::new(2.0, 0.5, 0.5), -DVec3::X), &spec);
        let ids: Vec<usize> = v.iter().map(|s| s.0).collect();
        assert_eq!(ids, vec![1, 0]);
    }

    fn cell(p: DVec3) -> Option<[i32; 3]> {
        let c = [p.x.floor() as i32, p.y.floor() as i32, p.z.floor() as i32];
        c.iter().all(|&v| (0..8).contains(&v)).then_some(c)
    }

    #[test]
    fn matches_dense_sampling() {
        let spec = GridSpec::cube(8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let origin = DVec3::new(rng.gen_range(-4.0..12.0), rng.gen_range(-4.0..12.0), rng.gen_range(-4.0..12.0));
            let target = DVec3::new(rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0), rng.gen_range(0.0..8.0));
            let ray = Ray::new(origin, target - origin);
            let walked = traverse_voxels(&ray, &spec);
            for w in walked.windows(2) {
                assert_eq!(w[0].2, w[1].1);
                assert!(w[0].1 < w[0].2);
            }
            let walked_set: BTreeSet<usize> = walked.iter().map(|s| s.0).collect();
            assert_eq!(walked_set.len(), walked.len());

            let mut sampled = Vec::new();
            let mut t = 0.0;
            while t < 40.0 {
                if let Some(c) = cell(ray.at(t)) {
                    let id = spec.linear(c.map(|v| v as u32));
                    if sampled.last() != Some(&id) {
                        sampled.push(id);
                    }
                }
                t += 1e-3;
            }
            let sampled_set: BTreeSet<usize> = sampled.iter().copied().collect();
            assert!(sampled_set.is_subset(&walked_set));
            // Only slivers shorter than the sampling step may be missed.
            for &(id, t0, t1) in &walked {
                if t1 - t0 >= 2e-3 {
                    assert!(sampled_set.contains(&id), "missed voxel with interval {}", t1 - t0);
                }
            }
            let order: Vec<usize> = walked.iter().map(|s| s.0).filter(|id| sampled_set.contains(id)).collect();
            assert_eq!(order, sampled);
        }
    }
}
