use glam::{DVec3, Vec3};
use linevox_core::metrics::image_compare;
use linevox_core::model::TransferTable;
use linevox_core::oracle::brute_force_render;
use linevox_core::raycast::{render_frame, Camera, NeighborMode, OpacityMode, RenderParams, RenderScene};
use linevox_core::scene::{Curve, CurveSet, GridSpec};
use linevox_core::voxelizer::build_voxel_model;
use linevox_core::{par, VoxelModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_of(curves: Vec<Vec<[f32; 3]>>, dims: u32, bins: u32) -> VoxelModel {
    let curves = curves.into_iter().map(|c| Curve::from_points(c.into_iter().map(Vec3::from).collect())).collect();
    build_voxel_model(&CurveSet::new(curves).unwrap(), &GridSpec::cube(dims, bins).unwrap()).unwrap()
}

fn random_walks(seed: u64, n: usize, dims: f32) -> Vec<Vec<[f32; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = [rng.gen_range(1.0..dims - 1.0), rng.gen_range(1.0..dims - 1.0), rng.gen_range(1.0..dims - 1.0)];
            let mut pts = vec![p];
            for _ in 0..rng.gen_range(2..12) {
                for v in &mut p {
                    *v = (*v + rng.gen_range(-2.5..2.5)).clamp(0.2, dims - 0.2);
                }
                pts.push(p);
            }
            pts
        })
        .collect()
}

fn center(m: &VoxelModel) -> DVec3 {
    m.spec().extent() * 0.5
}

#[test]
fn empty_scene_is_background() {
    // A single tiny curve far from the camera's view still builds a valid scene.
    let m = model_of(vec![vec![[0.1, 0.1, 0.1], [0.2, 0.1, 0.1]]], 8, 4);
    assert_eq!(m.segment_count(), 0);
    let scene = RenderScene::new(m);
    let cam = Camera::orbit(DVec3::splat(4.0), 20.0, 10.0, 20.0, 40.0, 32, 24);
    let p = RenderParams::default();
    let (f, stats) = render_frame(&scene, &cam, &p);
    assert!(f.pixels.iter().all(|px| *px == p.background));
    assert_eq!(stats.intersection_tests, 0);
    assert_eq!(stats.rays, 32 * 24);
}

#[test]
fn single_tube_is_shaded_and_matches_oracle() {
    let m = model_of(vec![vec![[0.5, 4.3, 4.3], [7.5, 4.3, 4.3]]], 8, 16);
    let scene = RenderScene::new(m);
    let cam = Camera::new(DVec3::new(4.0, 4.3, 20.0), DVec3::new(4.0, 4.3, 4.3), DVec3::Y, 30.0, 48, 48).unwrap();
    let p = RenderParams { tube_radius: 0.4, ..Default::default() };
    let (f, stats) = render_frame(&scene, &cam, &p);
    let mid = &f.pixels[24 * 48 + 24];
    assert_ne!(*mid, p.background);
    assert!(stats.intersection_tests > 0);
    let (g, ostats) = brute_force_render(&scene, &cam, &p);
    assert_eq!(f.pixels, g.pixels);
    assert_eq!(ostats.intersection_tests, 48 * 48 * scene.prims().len() as u64);
}

#[test]
fn random_scenes_match_oracle_exactly() {
    for seed in 0..6 {
        let m = model_of(random_walks(seed, 25, 16.0), 16, 32);
        let scene = RenderScene::new(m);
        let c = center(scene.model());
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut cams = vec![Camera::orbit(c, rng.gen_range(0.0..360.0), rng.gen_range(-60.0..60.0), 30.0, 50.0, 40, 30)];
        // One camera inside the grid.
        cams.push(Camera::orbit(c, rng.gen_range(0.0..360.0), 10.0, 3.0, 70.0, 40, 30));
        for cam in &cams {
            for (opacity, mode) in [(1.0, OpacityMode::Constant), (0.3, OpacityMode::Constant), (0.4, OpacityMode::DistanceScaled)] {
                let p = RenderParams { base_opacity: opacity, opacity_mode: mode, tube_radius: 0.35, ..Default::default() };
                let (f, _) = render_frame(&scene, cam, &p);
                let (g, _) = brute_force_render(&scene, cam, &p);
                assert_eq!(f.pixels, g.pixels, "seed {seed} opacity {opacity}");
            }
        }
    }
}

#[test]
fn penetrating_tubes_both_blend() {
    // Two crossing tubes in one voxel at half opacity.
    let m = model_of(vec![vec![[0.5, 1.5, 1.4], [2.5, 1.5, 1.6]], vec![[1.5, 0.5, 1.5], [1.5, 2.5, 1.5]]], 3, 16);
    assert_eq!(m.segment_count(), 2);
    let scene = RenderScene::new(m);
    let cam = Camera::new(DVec3::new(1.5, 1.5, 8.0), DVec3::new(1.5, 1.5, 1.5), DVec3::Y, 10.0, 9, 9).unwrap();
    let p = RenderParams { base_opacity: 0.5, tube_radius: 0.2, background: [0.0; 4], ..Default::default() };
    let (f, stats) = render_frame(&scene, &cam, &p);
    assert!((f.pixels[4 * 9 + 4][3] - 0.75).abs() < 1e-6);
    assert!(stats.fragments >= 2);
}

#[test]
fn neighbor_testing_recovers_bulging_tubes() {
    let m = model_of(random_walks(42, 40, 16.0), 16, 32);
    let scene = RenderScene::new(m);
    let cam = Camera::orbit(center(scene.model()), 35.0, 20.0, 26.0, 50.0, 96, 72);
    let on = RenderParams { tube_radius: 0.45, ..Default::default() };
    let off = RenderParams { neighbor_mode: NeighborMode::Off, ..on.clone() };
    let (a, sa) = render_frame(&scene, &cam, &on);
    let (b, sb) = render_frame(&scene, &cam, &off);
    let (o, _) = brute_force_render(&scene, &cam, &on);
    assert_eq!(a.pixels, o.pixels);
    let bg = on.background;
    let missed = a.pixels.iter().zip(&b.pixels).filter(|(x, y)| **x != bg && **y == bg).count();
    assert!(missed > 0, "neighbor-off should miss tube pieces outside their own voxel");
    assert!(b.pixels.iter().zip(&a.pixels).all(|(y, x)| *y == bg || *x != bg));
    assert!(sb.intersection_tests < sa.intersection_tests);
}

#[test]
fn auto_mode_follows_motion() {
    assert!(NeighborMode::Auto.enabled(false));
    assert!(!NeighborMode::Auto.enabled(true));
    assert!(NeighborMode::On.enabled(true));
}

#[test]
fn worker_count_does_not_change_frames() {
    let m = model_of(random_walks(7, 30, 16.0), 16, 32);
    let scene = RenderScene::new(m);
    let cam = Camera::orbit(center(scene.model()), 10.0, 30.0, 28.0, 45.0, 50, 40);
    let p = RenderParams { base_opacity: 0.3, ..Default::default() };
    let (a, sa) = par::with_threads(Some(1), || render_frame(&scene, &cam, &p));
    let (b, sb) = par::with_threads(Some(4), || render_frame(&scene, &cam, &p));
    assert_eq!(a.to_rgba8(), b.to_rgba8());
    assert_eq!((sa.voxel_steps, sa.intersection_tests), (sb.voxel_steps, sb.intersection_tests));
}

#[test]
fn early_termination_bound() {
    let m = model_of(random_walks(9, 60, 16.0), 16, 32);
    let scene = RenderScene::new(m);
    let cam = Camera::orbit(center(scene.model()), 60.0, 5.0, 26.0, 50.0, 64, 48);
    let truncated = RenderParams { base_opacity: 0.25, alpha_termination: 0.95, ..Default::default() };
    let full = RenderParams { alpha_termination: 1.0, ..truncated.clone() };
    let (a, _) = render_frame(&scene, &cam, &truncated);
    let (b, _) = render_frame(&scene, &cam, &full);
    for (x, y) in a.pixels.iter().zip(&b.pixels) {
        for c in 0..4 {
            assert!((x[c] - y[c]).abs() <= 0.05 + 1e-6);
        }
    }
}

#[test]
fn opaque_rays_blend_at_most_one_fragment() {
    let m = model_of(random_walks(5, 60, 16.0), 16, 32);
    let scene = RenderScene::new(m);
    let cam = Camera::orbit(center(scene.model()), 0.0, 0.0, 24.0, 50.0, 40, 40);
    let (_, stats) = render_frame(&scene, &cam, &RenderParams::default());
    assert!(stats.fragments <= stats.rays);
    assert!(stats.fragments > 0);
}

#[test]
fn transfer_opacity_uses_table_alpha() {
    let mut m = model_of(vec![vec![[0.5, 2.3, 2.3], [3.5, 2.3, 2.3]]], 4, 16);
    m.set_transfer(TransferTable::constant([1.0, 1.0, 1.0, 0.5]));
    let scene = RenderScene::new(m);
    let cam = Camera::new(DVec3::new(1.5, 2.3, 12.0), DVec3::new(1.5, 2.3, 2.3), DVec3::Y, 20.0, 15, 15).unwrap();
    let p = RenderParams { opacity_mode: OpacityMode::Transfer, background: [0.0; 4], tube_radius: 0.4, ..Default::default() };
    let (f, _) = render_frame(&scene, &cam, &p);
    assert!((f.pixels[7 * 15 + 7][3] - 0.5).abs() < 1e-6);
    let (g, _) = brute_force_render(&scene, &cam, &p);
    assert_eq!(image_compare(&f.to_rgba8(), &g.to_rgba8()).max_diff, 0);
}
