//! Shadows and ambient occlusion over the voxel structures.

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lod::{DensityOctree, Field3};
use crate::par;
use crate::raycast::{intersect_capsule, Ray, RenderScene, VoxelWalk};

/// Offset along the surface normal before casting secondary rays.
pub const SURFACE_OFFSET: f64 = 1e-3;
/// Transmittance below which a cone counts as fully blocked.
pub const CONE_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AoParams {
    pub n_rays: u32,
    /// Radius of influence, in voxels.
    pub radius: f64,
    pub step: f64,
    /// Randomly rotates and shifts the direction set; `None` keeps it fixed.
    pub jitter: Option<u64>,
}

impl Default for AoParams {
    fn default() -> Self {
        Self { n_rays: 64, radius: 15.0, step: 1.0, jitter: None }
    }
}

impl AoParams {
    /// Parameters for the per-voxel precomputation.
    pub fn precompute() -> Self {
        Self { n_rays: 100, radius: 5.0, step: 1.0, jitter: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rays == 0 || !(self.radius > 0.0) || !(self.step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ambient occlusion needs rays >= 1, radius > 0, step > 0 (got {}, {}, {})",
                self.n_rays, self.radius, self.step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LightSource {
    /// Unit direction toward a light at infinity.
    Directional(DVec3),
    Point(DVec3),
}

impl LightSource {
    /// Shadow ray from `from` and the distance to the light.
    pub fn ray_from(&self, from: DVec3) -> (Ray, f64) {
        match *self {
            Self::Directional(d) => (Ray::new(from, d), f64::INFINITY),
            Self::Point(p) => {
                let d = p - from;
                (Ray::new(from, d), d.length())
            }
        }
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

fn jitter_offsets(jitter: Option<u64>) -> (f64, f64) {
    match jitter {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (rng.gen::<f64>(), rng.gen::<f64>() * std::f64::consts::TAU)
        }
        None => (0.5, 0.0),
    }
}

/// `n` area-uniform directions over the unit sphere.
pub fn fibonacci_sphere(n: u32, jitter: Option<u64>) -> Vec<DVec3> {
    let (u, phi0) = jitter_offsets(jitter);
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + u) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * GOLDEN_ANGLE + phi0;
            DVec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// `n` area-uniform directions over the hemisphere around `normal`.
pub fn fibonacci_hemisphere(normal: DVec3, n: u32, jitter: Option<u64>) -> Vec<DVec3> {
    let (u, phi0) = jitter_offsets(jitter);
    let (t, b) = normal.any_orthonormal_pair();
    (0..n)
        .map(|i| {
            let z = 1.0 - (i as f64 + u) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * GOLDEN_ANGLE + phi0;
            t * (r * phi.cos()) + b * (r * phi.sin()) + normal * z
        })
        .collect()
}

/// Whether any tube crosses the ray before `t_max`.
pub fn tubes_block(scene: &RenderScene, ray: &Ray, t_max: f64, radius: f64, joint_spheres: bool) -> bool {
    let (lo, hi) = scene.padded_bounds();
    for step in VoxelWalk::new(ray, lo, hi, 0.0, t_max) {
        if scene.flags(step.voxel) & crate::raycast::NEAR_FLAG == 0 {
            continue;
        }
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let v = [step.voxel[0] + dx, step.voxel[1] + dy, step.voxel[2] + dz];
                    for s in scene.own_segments(v) {
                        let (a, b) = scene.prim(s);
                        if let Some(h) = intersect_capsule(ray, a, b, radius, joint_spheres) {
                            if h.t_in < t_max {
                                return true;
                            }
                        }
                    }
                }
            }
        }
    }
    false
}

/// 1 when the light is visible from the surface point, else 0.
pub fn hard_shadow(scene: &RenderScene, point: DVec3, normal: DVec3, light: LightSource, radius: f64, joint_spheres: bool) -> f64 {
    let (ray, t_max) = light.ray_from(point + normal * SURFACE_OFFSET);
    if tubes_block(scene, &ray, t_max, radius, joint_spheres) {
        0.0
    } else {
        1.0
    }
}

/// Visibility against the representative lines of one coarse level, each
/// thickened by its weight. The coarse voxel holding the point is skipped
/// since its representative stands for the point's own line.
pub fn replines_shadow(scene: &RenderScene, point: DVec3, normal: DVec3, light: LightSource, level: u32, radius: f64) -> f64 {
    let reps = scene.rep_lines();
    let Some(lv) = reps.level(level as usize) else {
        return hard_shadow(scene, point, normal, light, radius, true);
    };
    let size = lv.voxel_size();
    let (ray, t_max) = light.ray_from(point + normal * SURFACE_OFFSET);
    let coarse = Ray { origin: ray.origin / size, dir: ray.dir };
    let hi = lv.dims.map(|d| d as i32);
    let home = (ray.origin / size).floor().as_ivec3().to_array();
    for step in VoxelWalk::new(&coarse, [0; 3], hi, 0.0, t_max / size) {
        if step.voxel == home {
            continue;
        }
        let i = lv.index(step.voxel.map(|c| c as u32));
        if let Some(line) = &lv.lines[i] {
            let (a, b) = lv.endpoints(i, line, reps.bins);
            let thickness = radius * (line.weight as f64).clamp(1.0, 4.0);
            if let Some(h) = intersect_capsule(&ray, a, b, thickness, true) {
                if h.t_in < t_max {
                    return 0.0;
                }
            }
        }
    }
    1.0
}

fn inside(dims: [u32; 3], p: DVec3) -> bool {
    (0..3).all(|a| p[a] >= 0.0 && p[a] <= dims[a] as f64)
}

/// Blocking toward a light, marching a cone whose footprint is one voxel at
/// unit distance and grows linearly, sampling the matching octree level.
pub fn cone_soft_shadow(octree: &DensityOctree, point: DVec3, light_dir: DVec3) -> f64 {
    cone_soft_shadow_with(octree, point, light_dir, 1.0)
}

pub fn cone_soft_shadow_with(octree: &DensityOctree, point: DVec3, light_dir: DVec3, step: f64) -> f64 {
    let dims = octree.levels[0].dims;
    let top = (octree.level_count() - 1) as f64;
    let dir = light_dir.normalize();
    let mut t = 1.0;
    let mut d = step;
    loop {
        let p = point + dir * d;
        if !inside(dims, p) {
            break;
        }
        // Footprint 2 d tan(theta / 2) equals d for a one-voxel cone at d = 1.
        let level = d.max(1.0).log2().clamp(0.0, top);
        let rho = octree.sample_lod(level, p);
        t *= (1.0 - rho * step).max(0.0);
        if t <= CONE_EPSILON {
            t = 0.0;
            break;
        }
        d += step;
    }
    1.0 - t
}

/// Density accumulated along one ray, saturating at 1.
pub fn density_ray(field: &Field3, point: DVec3, dir: DVec3, radius: f64, step: f64) -> f64 {
    let mut sum = 0.0;
    let mut k = 1u32;
    loop {
        let d = k as f64 * step;
        if d > radius {
            break;
        }
        let p = point + dir * d;
        if !inside(field.dims, p) {
            break;
        }
        sum += field.sample(p) * step;
        if sum >= 1.0 {
            break;
        }
        k += 1;
    }
    sum.min(1.0)
}

pub fn ao_density_rays(octree: &DensityOctree, point: DVec3, normal: DVec3, params: &AoParams) -> f64 {
    let dirs = fibonacci_hemisphere(normal, params.n_rays, params.jitter);
    let field = &octree.levels[0];
    dirs.iter().map(|&d| density_ray(field, point, d, params.radius, params.step)).sum::<f64>() / dirs.len() as f64
}

/// Fraction of hemisphere rays that hit a tube within the radius of influence.
pub fn ao_hemisphere_geometry(scene: &RenderScene, point: DVec3, normal: DVec3, params: &AoParams, radius: f64) -> f64 {
    let origin = point + normal * SURFACE_OFFSET;
    let dirs = fibonacci_hemisphere(normal, params.n_rays, params.jitter);
    let blocked = dirs.iter().filter(|&&d| tubes_block(scene, &Ray::new(origin, d), params.radius, radius, true)).count();
    blocked as f64 / dirs.len() as f64
}

/// Full-sphere occlusion at the center of voxel `v`.
pub fn voxel_ao(field: &Field3, v: [u32; 3], dirs: &[DVec3], params: &AoParams) -> f64 {
    let c = DVec3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5);
    dirs.iter().map(|&d| density_ray(field, c, d, params.radius, params.step)).sum::<f64>() / dirs.len() as f64
}

/// Summed-area table over the nonzero cells of a field.
struct Occupancy {
    dims: [usize; 3],
    sums: Vec<u32>,
}

impl Occupancy {
    fn new(field: &Field3) -> Self {
        let [nx, ny, nz] = field.dims.map(|d| d as usize);
        let dims = [nx + 1, ny + 1, nz + 1];
        let mut sums = vec![0u32; dims[0] * dims[1] * dims[2]];
        let at = |x: usize, y: usize, z: usize| x + dims[0] * (y + dims[1] * z);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let v = (field.get(x as u32, y as u32, z as u32) != 0.0) as u32;
                    sums[at(x + 1, y + 1, z + 1)] = v + sums[at(x, y + 1, z + 1)] + sums[at(x + 1, y, z + 1)] + sums[at(x + 1, y + 1, z)]
                        - sums[at(x, y, z + 1)]
                        - sums[at(x, y + 1, z)]
                        - sums[at(x + 1, y, z)]
                        + sums[at(x, y, z)];
                }
            }
        }
        Self { dims, sums }
    }

    /// Nonzero cells in the half-open box `[lo, hi)`.
    fn count(&self, lo: [usize; 3], hi: [usize; 3]) -> u32 {
        let at = |x: usize, y: usize, z: usize| self.sums[x + self.dims[0] * (y + self.dims[1] * z)] as i64;
        let (a, b) = (lo, hi);
        (at(b[0], b[1], b[2]) - at(a[0], b[1], b[2]) - at(b[0], a[1], b[2]) - at(b[0], b[1], a[2])
            + at(a[0], a[1], b[2])
            + at(a[0], b[1], a[2])
            + at(b[0], a[1], a[2])
            - at(a[0], a[1], a[2])) as u32
    }
}

/// Per-voxel spherical occlusion from the level-0 density. Voxels whose
/// neighborhood (radius plus the interpolation footprint) is empty are 0
/// without casting rays.
pub fn precompute_voxel_ao(octree: &DensityOctree, params: &AoParams) -> Field3 {
    let field = &octree.levels[0];
    let dirs = fibonacci_sphere(params.n_rays, params.jitter);
    let occ = Occupancy::new(field);
    let reach = params.radius.ceil() as usize + 1;
    let dims = field.dims;
    let values = par::map_indexed(field.len(), |i| {
        let (dx, dy) = (dims[0] as usize, dims[1] as usize);
        let v = [i % dx, (i / dx) % dy, i / (dx * dy)];
        let lo = v.map(|c| c.saturating_sub(reach));
        let hi = [0, 1, 2].map(|a| (v[a] + reach + 1).min(dims[a] as usize));
        if occ.count(lo, hi) == 0 {
            return 0.0;
        }
        voxel_ao(field, v.map(|c| c as u32), &dirs, params).clamp(0.0, 1.0) as f32
    });
    Field3 { dims, values }
}

/// Trilinear lookup into a precomputed occlusion field.
pub fn sample_ao(field: &Field3, point: DVec3) -> f64 {
    field.sample(point).clamp(0.0, 1.0)
}
