use glam::{DVec3, Vec3};
use linevox_core::illumination::{
    ao_density_rays, ao_hemisphere_geometry, cone_soft_shadow, fibonacci_sphere, hard_shadow, precompute_voxel_ao, replines_shadow, sample_ao,
    voxel_ao, AoParams, LightSource,
};
use linevox_core::lod::{build_octree, DensityOctree, Field3};
use linevox_core::raycast::{intersect_capsule, render_frame, AoMode, Camera, Ray, RenderParams, RenderScene, ShadowMode};
use linevox_core::scene::{Curve, CurveSet, GridSpec};
use linevox_core::voxelizer::build_voxel_model;
use linevox_core::{TransferTable, VoxelModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_of(curves: Vec<Vec<[f32; 3]>>, dims: u32) -> VoxelModel {
    let curves = curves.into_iter().map(|c| Curve::from_points(c.into_iter().map(Vec3::from).collect())).collect();
    build_voxel_model(&CurveSet::new(curves).unwrap(), &GridSpec::cube(dims, 32).unwrap()).unwrap()
}

fn empty_model(dims: u32) -> VoxelModel {
    let spec = GridSpec::cube(dims, 8).unwrap();
    let n = spec.voxel_count();
    VoxelModel::from_parts(spec, vec![0; n], vec![0; n], vec![], TransferTable::default()).unwrap()
}

fn random_walks(seed: u64, n: usize, dims: f32, reach: f32) -> Vec<Vec<[f32; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut p = [0.0f32; 3].map(|_| rng.gen_range(1.0..dims - 1.0));
            let mut pts = vec![p];
            for _ in 0..rng.gen_range(3..12) {
                for v in &mut p {
                    *v = (*v + rng.gen_range(-reach..reach)).clamp(0.2, dims - 0.2);
                }
                pts.push(p);
            }
            pts
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng) -> DVec3 {
    loop {
        let v = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.length_squared() > 0.01 && v.length_squared() <= 1.0 {
            return v.normalize();
        }
    }
}

/// Lines covering the faces of the box `[lo, hi]^3`, spaced closer than a tube diameter.
fn shell(lo: f32, hi: f32, spacing: f32) -> Vec<Vec<[f32; 3]>> {
    let mut out = Vec::new();
    let mut s = lo;
    while s <= hi + 1e-4 {
        for face in [lo, hi] {
            out.push(vec![[lo - 0.5, s, face], [hi + 0.5, s, face]]);
            out.push(vec![[lo - 0.5, face, s], [hi + 0.5, face, s]]);
            out.push(vec![[face, lo - 0.5, s], [face, hi + 0.5, s]]);
        }
        s += spacing;
    }
    out
}

#[test]
fn hard_shadow_basic_cases() {
    let empty = RenderScene::new(empty_model(8));
    let sun = LightSource::Directional(DVec3::Z);
    assert_eq!(hard_shadow(&empty, DVec3::splat(4.0), DVec3::Z, sun, 0.3, true), 1.0);

    let scene = RenderScene::new(model_of(vec![vec![[0.5, 4.3, 6.3], [7.5, 4.3, 6.3]]], 8));
    assert_eq!(hard_shadow(&scene, DVec3::new(4.0, 4.3, 2.0), DVec3::Z, sun, 0.3, true), 0.0);
    assert_eq!(hard_shadow(&scene, DVec3::new(4.0, 4.3, 2.0), DVec3::Z, LightSource::Point(DVec3::new(4.0, 4.3, 5.0)), 0.3, true), 1.0);
    assert_eq!(hard_shadow(&scene, DVec3::new(4.0, 1.0, 2.0), DVec3::Z, sun, 0.3, true), 1.0);
}

#[test]
fn hard_shadow_matches_brute_force() {
    let scene = RenderScene::new(model_of(random_walks(3, 40, 16.0, 3.0), 16));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut lit, mut dark) = (0, 0);
    for _ in 0..100 {
        let p = DVec3::new(rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0));
        let n = random_unit(&mut rng);
        let light = if rng.gen_bool(0.5) {
            LightSource::Directional(random_unit(&mut rng))
        } else {
            LightSource::Point(DVec3::new(rng.gen_range(-4.0..20.0), rng.gen_range(-4.0..20.0), rng.gen_range(-4.0..20.0)))
        };
        let got = hard_shadow(&scene, p, n, light, 0.3, true);
        let (ray, t_max) = light.ray_from(p + n * 1e-3);
        let blocked = scene.prims().iter().any(|&(a, b)| intersect_capsule(&ray, a, b, 0.3, true).is_some_and(|h| h.t_in < t_max));
        assert_eq!(got, if blocked { 0.0 } else { 1.0 });
        if blocked {
            dark += 1;
        } else {
            lit += 1;
        }
    }
    assert!(lit > 5 && dark > 5, "{lit} lit / {dark} dark is not a useful sample");
}

#[test]
fn replines_shadow_cases() {
    let sun = LightSource::Directional(DVec3::Z);
    let empty = RenderScene::new(empty_model(16));
    assert_eq!(replines_shadow(&empty, DVec3::new(8.0, 8.0, 1.0), DVec3::Z, sun, 1, 0.3), 1.0);

    let blocker = model_of(vec![vec![[0.5, 8.5, 12.5], [15.5, 8.5, 12.5]]], 16);
    let scene = RenderScene::new(blocker.clone());
    assert_eq!(replines_shadow(&scene, DVec3::new(8.3, 8.5, 1.0), DVec3::Z, sun, 1, 0.3), 0.0);
    assert_eq!(replines_shadow(&scene, DVec3::new(8.3, 2.5, 1.0), DVec3::Z, sun, 1, 0.3), 1.0);

    // Same representatives over a model without any fine segments.
    let octree = scene.octree().clone();
    let reps = scene.rep_lines().clone();
    let hollow = RenderScene::new(empty_model(16)).with_lod(Some(octree), Some(reps));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let p = DVec3::new(rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0), rng.gen_range(0.0..12.0));
        let light = LightSource::Directional(random_unit(&mut rng));
        for level in 1..=3 {
            assert_eq!(replines_shadow(&scene, p, DVec3::Z, light, level, 0.3), replines_shadow(&hollow, p, DVec3::Z, light, level, 0.3));
        }
    }
}

fn uniform_octree(dims: [u32; 3], value: f32) -> DensityOctree {
    build_octree(Field3 { dims, values: vec![value; dims.iter().map(|&d| d as usize).product()] })
}

fn random_octree(rng: &mut ChaCha8Rng, dims: [u32; 3]) -> DensityOctree {
    let n = dims.iter().map(|&d| d as usize).product();
    let values = (0..n).map(|_| if rng.gen_bool(0.3) { rng.gen_range(0.0..0.4) } else { 0.0 }).collect();
    build_octree(Field3 { dims, values })
}

#[test]
fn cone_shadow_cases() {
    let p = DVec3::splat(8.0);
    assert_eq!(cone_soft_shadow(&uniform_octree([16; 3], 0.0), p, DVec3::Z), 0.0);
    assert_eq!(cone_soft_shadow(&uniform_octree([16; 3], 1.0), p, DVec3::Z), 1.0);
    let partial = cone_soft_shadow(&uniform_octree([16; 3], 0.01), p, DVec3::Z);
    assert!(partial > 0.0 && partial < 1.0);
}

#[test]
fn density_outputs_are_bounded_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = AoParams { n_rays: 32, radius: 10.0, ..Default::default() };
    for _ in 0..10 {
        let dims = [rng.gen_range(4..24), rng.gen_range(4..24), rng.gen_range(4..24)];
        let base = random_octree(&mut rng, dims);
        for _ in 0..10 {
            let p = DVec3::new(rng.gen_range(0.0..dims[0] as f64), rng.gen_range(0.0..dims[1] as f64), rng.gen_range(0.0..dims[2] as f64));
            let d = random_unit(&mut rng);
            let mut prev = (cone_soft_shadow(&base, p, d), ao_density_rays(&base, p, d, &params));
            for k in [1.5f32, 2.0, 4.0, 10.0] {
                let t = base.scaled(k);
                let cur = (cone_soft_shadow(&t, p, d), ao_density_rays(&t, p, d, &params));
                for v in [cur.0, cur.1] {
                    assert!((0.0..=1.0).contains(&v));
                }
                assert!(cur.0 >= prev.0 && cur.1 >= prev.1, "{prev:?} -> {cur:?} at x{k}");
                prev = cur;
            }
        }
    }
}

#[test]
fn density_rays_cases() {
    let params = AoParams::default();
    let p = DVec3::splat(8.0);
    assert_eq!(ao_density_rays(&uniform_octree([16; 3], 0.0), p, DVec3::Z, &params), 0.0);
    assert_eq!(ao_density_rays(&uniform_octree([16; 3], 1.0), p, DVec3::Z, &params), 1.0);
}

#[test]
fn hemisphere_geometry_cases() {
    let params = AoParams { n_rays: 200, ..Default::default() };
    let empty = RenderScene::new(empty_model(16));
    assert_eq!(ao_hemisphere_geometry(&empty, DVec3::splat(8.0), DVec3::Z, &params, 0.25), 0.0);

    let enclosed = RenderScene::new(model_of(shell(5.3, 10.7, 0.3), 16));
    for n in [DVec3::Z, DVec3::X, DVec3::new(1.0, -1.0, 0.5).normalize()] {
        let ao = ao_hemisphere_geometry(&enclosed, DVec3::splat(8.0), n, &params, 0.25);
        assert!(ao >= 1.0 - 1.0 / params.n_rays as f64, "occlusion {ao} inside a closed shell");
    }
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[test]
fn fewer_hemisphere_rays_are_noisier() {
    let scene = RenderScene::new(model_of(random_walks(21, 80, 16.0, 4.0), 16));
    let p = DVec3::new(8.2, 7.9, 8.1);
    let runs = |n: u32| -> Vec<f64> {
        (0..20)
            .map(|seed| ao_hemisphere_geometry(&scene, p, DVec3::Z, &AoParams { n_rays: n, jitter: Some(seed), ..Default::default() }, 0.25))
            .collect()
    };
    let (few, many) = (runs(25), runs(2500));
    assert!(variance(&few) > variance(&many), "{} vs {}", variance(&few), variance(&many));
}

#[test]
fn density_and_geometry_occlusion_agree_on_dense_scene() {
    let scene = RenderScene::new(model_of(random_walks(5, 300, 24.0, 4.0), 24));
    let params = AoParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut diff = 0.0;
    let samples = 40;
    for _ in 0..samples {
        let p = DVec3::new(rng.gen_range(6.0..18.0), rng.gen_range(6.0..18.0), rng.gen_range(6.0..18.0));
        let n = random_unit(&mut rng);
        let g = ao_hemisphere_geometry(&scene, p, n, &params, 0.25);
        let d = ao_density_rays(scene.octree(), p, n, &params);
        diff += (g - d).abs();
    }
    let mean = diff / samples as f64;
    assert!(mean < 0.15, "mean difference {mean}");
}

#[test]
fn precomputed_ao_matches_direct_computation() {
    let scene = RenderScene::new(model_of(random_walks(6, 30, 16.0, 3.0), 16));
    let params = AoParams::precompute();
    let field = precompute_voxel_ao(scene.octree(), &params);
    let dirs = fibonacci_sphere(params.n_rays, None);
    let level0 = &scene.octree().levels[0];
    let mut nonzero = 0;
    for z in 0..16 {
        for y in 0..16 {
            for x in 0..16 {
                let direct = voxel_ao(level0, [x, y, z], &dirs, &params).clamp(0.0, 1.0) as f32;
                let stored = field.get(x, y, z);
                assert_eq!(stored, direct);
                let center = DVec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5);
                assert!((sample_ao(&field, center) - stored as f64).abs() < 1e-6);
                nonzero += (stored > 0.0) as usize;
            }
        }
    }
    assert!(nonzero > 0);
    assert!(field.values.iter().all(|v| (0.0..=1.0).contains(v)));

    let empty = uniform_octree([8; 3], 0.0);
    let f = precompute_voxel_ao(&empty, &params);
    assert!(f.values.iter().all(|&v| v == 0.0));
    assert_eq!(sample_ao(&f, DVec3::new(3.3, 1.2, 7.9)), 0.0);
}

#[test]
fn shaded_modes_render_within_range() {
    let mut scene = RenderScene::new(model_of(random_walks(4, 40, 16.0, 3.0), 16));
    let ao = precompute_voxel_ao(scene.octree(), &AoParams::precompute());
    scene.set_ao_field(Some(ao));
    let cam = Camera::orbit(DVec3::splat(8.0), 30.0, 25.0, 30.0, 45.0, 48, 36);
    let plain = render_frame(&scene, &cam, &RenderParams::default()).0;
    let lum = |f: &linevox_core::raycast::Frame| f.pixels.iter().map(|p| p[0] as f64 + p[1] as f64 + p[2] as f64).sum::<f64>();
    for shadow in [ShadowMode::Hard, ShadowMode::Replines, ShadowMode::Cone] {
        let p = RenderParams { shadow_mode: shadow, ao: AoParams { n_rays: 16, ..Default::default() }, ..Default::default() };
        let f = render_frame(&scene, &cam, &p).0;
        assert!(f.pixels.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(lum(&f) <= lum(&plain) + 1e-6, "{shadow:?} brightened the image");
    }
    for ao in [AoMode::HemisphereGeometry, AoMode::DensityRays, AoMode::Precomputed] {
        let p = RenderParams { ao_mode: ao, ao: AoParams { n_rays: 16, ..Default::default() }, ..Default::default() };
        let f = render_frame(&scene, &cam, &p).0;
        assert!(f.pixels.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(lum(&f) < lum(&plain), "{ao:?} did not darken anything");
    }
}

#[test]
fn shadow_ray_helper_is_unit_length() {
    let (r, t) = LightSource::Point(DVec3::new(0.0, 3.0, 4.0)).ray_from(DVec3::ZERO);
    assert!((r.dir.length() - 1.0).abs() < 1e-12);
    assert_eq!(t, 5.0);
    let _ = Ray::new(DVec3::ZERO, DVec3::X);
}
