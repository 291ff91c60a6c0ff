//! Reference renderer that tests every primitive for every pixel.
//!
//! It shares hit construction, ordering and compositing with the
//! ray-caster, so any disagreement points at traversal or gathering.

use glam::DVec3;

use crate::par;
use crate::raycast::{fragment, hit_record, Camera, Compositor, Frame, HitRecord, Lights, RenderParams, RenderScene, RenderStats, Scratch};
use crate::timer::Timer;

const TILE: u32 = 16;
const CHUNK: usize = 64;

/// Bounding spheres of all capsules relative to the camera position, in
/// single precision, for a cheap conservative rejection before the exact
/// test. A sphere can only be hit when `(w . d)^2 >= k`.
struct Bounds {
    wx: Vec<f32>,
    wy: Vec<f32>,
    wz: Vec<f32>,
    k: Vec<f32>,
}

impl Bounds {
    fn new(scene: &RenderScene, radius: f64, eye: DVec3) -> Self {
        let n = scene.prims().len();
        let mut b = Self { wx: Vec::with_capacity(n), wy: Vec::with_capacity(n), wz: Vec::with_capacity(n), k: Vec::with_capacity(n) };
        for &(p, q) in scene.prims() {
            let w = (p + q) * 0.5 - eye;
            let r = p.distance(q) * 0.5 + radius;
            let ww = w.length_squared();
            // Slack covers single-precision rounding of the dot product.
            b.wx.push(w.x as f32);
            b.wy.push(w.y as f32);
            b.wz.push(w.z as f32);
            b.k.push((ww - r * r - 1e-3 - 2e-6 * ww) as f32);
        }
        b
    }
}

/// Renders `scene` by testing all primitives per pixel, then sorting all
/// hits globally, deduplicating by (voxel, local id) and compositing.
pub fn brute_force_render(scene: &RenderScene, camera: &Camera, params: &RenderParams) -> (Frame, RenderStats) {
    let start = Timer::start();
    let (w, h) = (camera.width, camera.height);
    let lights = Lights::new(camera, &params.light);
    let bounds = Bounds::new(scene, params.tube_radius, camera.position);
    let n = bounds.k.len();
    let tiles_x = w.div_ceil(TILE);
    let tiles = (tiles_x * h.div_ceil(TILE)) as usize;
    let rendered = par::map_indexed(tiles, |t| {
        let (tx, ty) = (t as u32 % tiles_x, t as u32 / tiles_x);
        let mut rays = Vec::with_capacity((TILE * TILE) as usize);
        for y in ty * TILE..((ty + 1) * TILE).min(h) {
            for x in tx * TILE..((tx + 1) * TILE).min(w) {
                rays.push(camera.ray(x, y));
            }
        }
        let dirs: Vec<[f32; 3]> = rays.iter().map(|r| r.dir.to_array().map(|v| v as f32)).collect();
        let mut hits: Vec<Vec<HitRecord>> = vec![Vec::new(); rays.len()];
        let mut near = [0u8; CHUNK];
        // Chunks of primitives stay in cache while every ray of the tile visits them.
        for base in (0..n).step_by(CHUNK) {
            let end = (base + CHUNK).min(n);
            let (wx, wy, wz, k) = (&bounds.wx[base..end], &bounds.wy[base..end], &bounds.wz[base..end], &bounds.k[base..end]);
            for (p, &[dx, dy, dz]) in dirs.iter().enumerate() {
                for ((((m, &x), &y), &z), &k) in near.iter_mut().zip(wx).zip(wy).zip(wz).zip(k) {
                    let t = x * dx + y * dy + z * dz;
                    *m = (t * t >= k) as u8;
                }
                if near.iter().fold(0, |a, &m| a | m) == 0 {
                    continue;
                }
                for (i, _) in near[..end - base].iter().enumerate().filter(|(_, &m)| m != 0) {
                    if let Some(hit) = hit_record(scene, &rays[p], base + i, params) {
                        hits[p].push(hit);
                    }
                }
            }
        }
        let mut scratch = Scratch::default();
        rays.iter()
            .zip(&mut hits)
            .map(|(ray, hits)| {
                hits.sort_by(HitRecord::order);
                scratch.reset();
                let mut comp = Compositor::new(params.alpha_termination as f64);
                for hit in hits.iter() {
                    if !scratch.first_visit(hit.voxel, hit.local_id) {
                        continue;
                    }
                    let (rgb, a) = fragment(scene, ray, hit, params, &lights);
                    comp.add(rgb, a);
                    if comp.done() {
                        break;
                    }
                }
                comp.finish(params.background)
            })
            .collect::<Vec<_>>()
    });
    let mut frame = Frame::filled(w, h, [0.0; 4]);
    for (t, px) in rendered.iter().enumerate() {
        let (tx, ty) = (t as u32 % tiles_x, t as u32 / tiles_x);
        let x0 = tx * TILE;
        let tw = TILE.min(w - x0) as usize;
        for (row, chunk) in px.chunks(tw).enumerate() {
            let off = ((ty * TILE + row as u32) * w + x0) as usize;
            frame.pixels[off..off + tw].copy_from_slice(chunk);
        }
    }
    let rays = w as u64 * h as u64;
    let stats = RenderStats { rays, intersection_tests: rays * n as u64, render_ms: start.elapsed_ms(), ..Default::default() };
    (frame, stats)
}
