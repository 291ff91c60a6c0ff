use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::intersect::{intersect_capsule, Ray};
use super::scene::{RenderScene, NEAR, OWN};
use super::shade::Compositor;
use super::traverse::VoxelWalk;
use super::{AoMode, Camera, Frame, HitRecord, Light, OpacityMode, RenderParams, ShadowMode};
use crate::illumination::{self, LightSource};
use crate::par;
use crate::timer::Timer;

const TILE: u32 = 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    pub rays: u64,
    pub voxel_steps: u64,
    pub intersection_tests: u64,
    pub fragments: u64,
    /// Hits skipped because their (voxel, local id) was already blended.
    pub suppressed: u64,
    pub render_ms: f64,
}

impl RenderStats {
    pub fn add(&mut self, o: &RenderStats) {
        self.rays += o.rays;
        self.voxel_steps += o.voxel_steps;
        self.intersection_tests += o.intersection_tests;
        self.fragments += o.fragments;
        self.suppressed += o.suppressed;
    }
}

/// Per-frame light directions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lights {
    /// `None` shades with a headlight along each ray.
    pub shading: Option<DVec3>,
    /// Direction toward the light used for shadow rays.
    pub shadow: DVec3,
}

impl Lights {
    pub fn new(camera: &Camera, light: &Light) -> Self {
        match light {
            Light::Headlight => {
                let (right, up, forward) = camera.basis();
                Self { shading: None, shadow: (-forward + up + right * 0.5).normalize() }
            }
            Light::Directional(d) => {
                let d = DVec3::from_array(*d).normalize_or(DVec3::Z);
                Self { shading: Some(d), shadow: d }
            }
        }
    }
}

/// Per-worker buffers reused across pixels.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    hits: Vec<HitRecord>,
    pending: Vec<HitRecord>,
    seen: Vec<(u32, u32)>,
}

impl Scratch {
    /// Marks `(voxel, id)` as blended; false if it already was.
    #[inline]
    pub fn first_visit(&mut self, voxel: u32, id: u8) -> bool {
        let bit = 1u32 << (id & 31);
        if let Some(entry) = self.seen.iter_mut().find(|e| e.0 == voxel) {
            if entry.1 & bit != 0 {
                return false;
            }
            entry.1 |= bit;
        } else {
            self.seen.push((voxel, bit));
        }
        true
    }

    pub fn reset(&mut self) {
        self.hits.clear();
        self.pending.clear();
        self.seen.clear();
    }
}

#[inline]
pub(crate) fn hit_record(scene: &RenderScene, ray: &Ray, segment: usize, params: &RenderParams) -> Option<HitRecord> {
    let (a, b) = scene.prim(segment);
    let iv = intersect_capsule(ray, a, b, params.tube_radius, params.joint_spheres)?;
    let seg = &scene.model().segments()[segment];
    Some(HitRecord {
        t_in: iv.t_in,
        t_out: iv.t_out,
        normal: iv.normal,
        voxel: scene.segment_voxel(segment),
        local_id: seg.local_id,
        attr_index: seg.attr_index,
        kind: iv.kind,
        segment: segment as u32,
    })
}

/// Color and opacity of one hit, including shadow and occlusion terms.
pub(crate) fn fragment(scene: &RenderScene, ray: &Ray, hit: &HitRecord, params: &RenderParams, lights: &Lights) -> ([f64; 3], f64) {
    let rgba = scene.model().transfer().rgba(hit.attr_index);
    let base = params.base_opacity as f64;
    let alpha = match params.opacity_mode {
        OpacityMode::Constant => base,
        OpacityMode::Transfer => rgba[3] as f64,
        OpacityMode::DistanceScaled => 1.0 - (1.0 - base).powf(hit.t_out - hit.t_in),
    };
    let view = -ray.dir;
    let light = lights.shading.unwrap_or(view);
    let (ambient, direct) = params.shading.terms(hit.normal, light, view);
    let p = ray.at(hit.t_in);
    let sun = LightSource::Directional(lights.shadow);
    let shadow = match params.shadow_mode {
        ShadowMode::None => 0.0,
        ShadowMode::Hard => 1.0 - illumination::hard_shadow(scene, p, hit.normal, sun, params.tube_radius, params.joint_spheres),
        ShadowMode::Replines => 1.0 - illumination::replines_shadow(scene, p, hit.normal, sun, params.shadow_level, params.tube_radius),
        ShadowMode::Cone => illumination::cone_soft_shadow(scene.octree(), p + hit.normal * 1e-3, lights.shadow),
    };
    let ao = match params.ao_mode {
        AoMode::None => 0.0,
        AoMode::HemisphereGeometry => illumination::ao_hemisphere_geometry(scene, p, hit.normal, &params.ao, params.tube_radius),
        AoMode::DensityRays => illumination::ao_density_rays(scene.octree(), p, hit.normal, &params.ao),
        AoMode::Precomputed => scene.ao_field().map_or(0.0, |f| illumination::sample_ao(f, p)),
    };
    let s = ambient * (1.0 - ao) + direct * (1.0 - shadow);
    ([0, 1, 2].map(|c| (rgba[c] as f64 * s).clamp(0.0, 1.0)), alpha)
}

fn blend(
    scene: &RenderScene,
    ray: &Ray,
    hit: &HitRecord,
    params: &RenderParams,
    lights: &Lights,
    scratch: &mut Scratch,
    comp: &mut Compositor,
    stats: &mut RenderStats,
) {
    if !scratch.first_visit(hit.voxel, hit.local_id) {
        stats.suppressed += 1;
        return;
    }
    let (rgb, a) = fragment(scene, ray, hit, params, lights);
    comp.add(rgb, a);
    stats.fragments += 1;
}

pub(crate) fn trace(
    scene: &RenderScene,
    ray: &Ray,
    params: &RenderParams,
    lights: &Lights,
    scratch: &mut Scratch,
    stats: &mut RenderStats,
) -> [f32; 4] {
    scratch.reset();
    stats.rays += 1;
    let neighbors = params.neighbor_mode.enabled(false);
    let mut comp = Compositor::new(params.alpha_termination as f64);
    let (lo, hi) = scene.padded_bounds();
    let walk = VoxelWalk::new(ray, lo, hi, 0.0, f64::INFINITY);
    let t_end = walk.t_end();
    #[cfg(debug_assertions)]
    let mut last_t = f64::NEG_INFINITY;

    'walk: for step in walk {
        stats.voxel_steps += 1;
        let flags = scene.flags(step.voxel);
        let owns = |t: f64| t >= step.t_enter && (t < step.t_exit || (t == step.t_exit && step.t_exit == t_end));
        if neighbors {
            if flags & NEAR == 0 {
                continue;
            }
            let mut hits = std::mem::take(&mut scratch.hits);
            hits.clear();
            scene.for_each_near(step.voxel, |s| {
                stats.intersection_tests += 1;
                if let Some(h) = hit_record(scene, ray, s, params) {
                    if owns(h.t_in) {
                        hits.push(h);
                    }
                }
            });
            hits.sort_by(HitRecord::order);
            for h in &hits {
                #[cfg(debug_assertions)]
                {
                    debug_assert!(h.t_in >= last_t, "hits out of visibility order");
                    last_t = h.t_in;
                }
                blend(scene, ray, h, params, lights, scratch, &mut comp, stats);
                if comp.done() {
                    scratch.hits = hits;
                    break 'walk;
                }
            }
            scratch.hits = hits;
        } else {
            if flags & OWN == 0 {
                continue;
            }
            // Hits that start beyond this voxel wait until the walk gets there.
            let mut pending = std::mem::take(&mut scratch.pending);
            for s in scene.own_segments(step.voxel) {
                stats.intersection_tests += 1;
                if let Some(h) = hit_record(scene, ray, s, params) {
                    pending.push(h);
                }
            }
            pending.sort_by(HitRecord::order);
            let ready = pending.iter().take_while(|h| h.t_in < step.t_exit).count();
            let mut stop = false;
            for h in pending.drain(..ready) {
                blend(scene, ray, &h, params, lights, scratch, &mut comp, stats);
                if comp.done() {
                    stop = true;
                    break;
                }
            }
            scratch.pending = pending;
            if stop {
                break;
            }
        }
    }
    if !comp.done() {
        let pending = std::mem::take(&mut scratch.pending);
        for h in &pending {
            blend(scene, ray, h, params, lights, scratch, &mut comp, stats);
            if comp.done() {
                break;
            }
        }
        scratch.pending = pending;
    }
    comp.finish(params.background)
}

/// Renders one frame. Tiles are processed in parallel but assembled and
/// reduced in tile order, so the result does not depend on worker count.
pub fn render_frame(scene: &RenderScene, camera: &Camera, params: &RenderParams) -> (Frame, RenderStats) {
    let start = Timer::start();
    let (w, h) = (camera.width, camera.height);
    let lights = Lights::new(camera, &params.light);
    let tiles_x = w.div_ceil(TILE);
    let tiles = tiles_x * h.div_ceil(TILE);
    let rendered = par::map_indexed(tiles as usize, |t| {
        let (tx, ty) = (t as u32 % tiles_x, t as u32 / tiles_x);
        let mut scratch = Scratch::default();
        let mut stats = RenderStats::default();
        let mut px = Vec::with_capacity((TILE * TILE) as usize);
        for y in ty * TILE..((ty + 1) * TILE).min(h) {
            for x in tx * TILE..((tx + 1) * TILE).min(w) {
                px.push(trace(scene, &camera.ray(x, y), params, &lights, &mut scratch, &mut stats));
            }
        }
        (px, stats)
    });
    let mut frame = Frame::filled(w, h, [0.0; 4]);
    let mut stats = RenderStats::default();
    for (t, (px, s)) in rendered.iter().enumerate() {
        let (tx, ty) = (t as u32 % tiles_x, t as u32 / tiles_x);
        let x0 = tx * TILE;
        let tw = (TILE).min(w - x0) as usize;
        for (row, chunk) in px.chunks(tw).enumerate() {
            let y = ty * TILE + row as u32;
            let off = (y * w + x0) as usize;
            frame.pixels[off..off + tw].copy_from_slice(chunk);
        }
        stats.add(s);
    }
    stats.render_ms = start.elapsed_ms();
    (frame, stats)
}
