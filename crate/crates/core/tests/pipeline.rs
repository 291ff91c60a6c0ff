use glam::{DVec3, Vec3};
use linevox_core::illumination::{precompute_voxel_ao, AoParams};
use linevox_core::lod::{build_rep_lines, DensityOctree};
use linevox_core::metrics::{mean_tangent_deviation, polyline_hausdorff};
use linevox_core::par::with_threads;
use linevox_core::raycast::{render_frame, AoMode, Camera, RenderParams, RenderScene, ShadowMode};
use linevox_core::scene::{generate_tornado, normalize_to_grid, parse_obj_lines, Curve, CurveSet, GridSpec};
use linevox_core::voxelizer::{build_voxel_model, clip_curve_to_voxels, pack_segment};
use linevox_core::vxl::{encode_vxl, read_vxl, VxlFile};
use proptest::prelude::*;

fn curve_strategy(extent: f32) -> impl Strategy<Value = Vec<[f32; 3]>> {
    prop::collection::vec(prop::array::uniform3(0.0f32..extent), 2..10)
}

fn to_set(curves: Vec<Vec<[f32; 3]>>) -> CurveSet {
    CurveSet::new(curves.into_iter().map(|c| Curve::from_points(c.into_iter().map(Vec3::from).collect())).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clipped_pieces_chain_exactly(points in curve_strategy(12.0)) {
        let curve = Curve::from_points(points.into_iter().map(Vec3::from).collect());
        let spec = GridSpec::cube(12, 16).unwrap();
        let pieces = clip_curve_to_voxels(&curve, &spec);
        for w in pieces.windows(2) {
            prop_assert_eq!(w[0].exit, w[1].entry);
        }
        for p in &pieces {
            for local in [p.local_entry(), p.local_exit()] {
                prop_assert!(local.min_element() >= -1e-9 && local.max_element() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn stored_endpoints_lie_on_their_voxel_faces(curves in prop::collection::vec(curve_strategy(10.0), 1..6), log2 in 2u32..=7) {
        let bins = 1 << log2;
        let model = build_voxel_model(&to_set(curves), &GridSpec::cube(10, bins).unwrap()).unwrap();
        let voxels = model.segment_voxels();
        for (seg, &v) in model.segments().iter().zip(&voxels) {
            let (a, b) = seg.endpoints_local(bins);
            for p in [a, b] {
                let on_face = (0..3).filter(|&k| p[k] == 0.0 || p[k] == 1.0).count();
                prop_assert_eq!(on_face, 1, "{:?} in voxel {}", p, v);
            }
            prop_assert_eq!(pack_segment(seg, bins).unwrap().len(), model.record_width());
        }
        prop_assert_eq!(model.memory_bytes(), 5 * model.spec().voxel_count() as u64 + (model.record_width() * model.segment_count()) as u64);
    }

    #[test]
    fn hausdorff_is_symmetric(a in curve_strategy(5.0), b in curve_strategy(5.0)) {
        let a: Vec<DVec3> = a.into_iter().map(|p| Vec3::from(p).as_dvec3()).collect();
        let b: Vec<DVec3> = b.into_iter().map(|p| Vec3::from(p).as_dvec3()).collect();
        let (ab, bb) = (polyline_hausdorff(&a, &b), polyline_hausdorff(&b, &a));
        prop_assert!((ab.0 - bb.0).abs() < 1e-12 && (ab.1 - bb.1).abs() < 1e-12);
    }
}

fn tornado(resolution: u32, bins: u32) -> (CurveSet, linevox_core::VoxelModel) {
    let set = generate_tornado(120, 150, 9).unwrap();
    let spec = GridSpec::fit(&set.bbox, resolution, bins).unwrap();
    let set = normalize_to_grid(&set, &spec).unwrap();
    let model = build_voxel_model(&set, &spec).unwrap();
    (set, model)
}

#[test]
fn build_is_identical_for_any_worker_count() {
    let set = generate_tornado(200, 150, 4).unwrap();
    let spec = GridSpec::fit(&set.bbox, 64, 32).unwrap();
    let set = normalize_to_grid(&set, &spec).unwrap();
    let one = with_threads(Some(1), || encode_vxl(&VxlFile::new(build_voxel_model(&set, &spec).unwrap())).unwrap());
    let four = with_threads(Some(4), || encode_vxl(&VxlFile::new(build_voxel_model(&set, &spec).unwrap())).unwrap());
    assert_eq!(one, four);
}

#[test]
fn finer_bins_follow_tangents_at_least_as_well() {
    let (set, coarse) = tornado(48, 4);
    let (_, fine) = tornado(48, 32);
    let (c, f) = (mean_tangent_deviation(&set, &coarse), mean_tangent_deviation(&set, &fine));
    assert!(f <= c, "N=32 deviation {f} exceeds N=4 deviation {c}");
}

#[test]
fn saved_model_renders_like_the_original() {
    let (_, model) = tornado(48, 16);
    let octree = DensityOctree::from_model(&model);
    let mut file = VxlFile::new(model.clone());
    file.reps = Some(build_rep_lines(&model, &octree));
    file.ao = Some(precompute_voxel_ao(&octree, &AoParams { n_rays: 16, ..AoParams::precompute() }));
    file.octree = Some(octree);
    let restored = read_vxl(&encode_vxl(&file).unwrap()).unwrap().into_scene();

    let mut original = RenderScene::new(model);
    original.set_ao_field(file.ao.clone());
    let camera = Camera::orbit(original.model().spec().extent() * 0.5, 40.0, 25.0, 80.0, 45.0, 64, 48);
    for params in [
        RenderParams::default(),
        RenderParams { shadow_mode: ShadowMode::Replines, ao_mode: AoMode::Precomputed, ..Default::default() },
        RenderParams { shadow_mode: ShadowMode::Cone, base_opacity: 0.4, ..Default::default() },
    ] {
        let a = render_frame(&original, &camera, &params).0;
        let b = render_frame(&restored, &camera, &params).0;
        assert_eq!(a.pixels, b.pixels, "{params:?}");
    }
}

#[test]
fn obj_input_voxelizes() {
    let text = "v 0 0 0\nv 4 1 0\nv 4 4 2\nv 0 4 4\nl 1 2 3 4\nv 1 1 1\nv 3 3 3\nl 5 6\n";
    let set = parse_obj_lines(text.as_bytes()).unwrap();
    assert_eq!(set.curves.len(), 2);
    let spec = GridSpec::fit(&set.bbox, 16, 8).unwrap();
    let set = normalize_to_grid(&set, &spec).unwrap();
    let model = build_voxel_model(&set, &spec).unwrap();
    assert!(model.segment_count() > 10);
    let curves: Vec<u32> = model.origins().iter().map(|o| o.curve).collect();
    assert!(curves.contains(&0) && curves.contains(&1));
}
