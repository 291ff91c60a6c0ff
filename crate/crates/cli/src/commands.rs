use std::path::Path;
use std::time::Instant;

use linevox_core::illumination::{precompute_voxel_ao, AoParams};
use linevox_core::image_io::save_image;
use linevox_core::lod::{build_rep_lines, DensityOctree};
use linevox_core::metrics::{mean_hausdorff, mean_tangent_deviation, memory_report};
use linevox_core::oracle::brute_force_render;
use linevox_core::raycast::{render_frame, Camera, RenderParams, RenderScene};
use linevox_core::scene::{generate_tornado, load_curves, normalize_to_grid, save_lines_binary, GridSpec};
use linevox_core::voxelizer::{build_voxel_model_with, count_duplicates, BuildOptions};
use linevox_core::vxl::{load_vxl, save_vxl, VxlFile};
use linevox_core::TransferTable;
use linevox_service::server::{default_static_dir, ServiceConfig};
use linevox_service::session::SessionConfig;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::{BenchArgs, Command, GenerateArgs, MetricsArgs, PrecomputeArgs, RenderArgs, RenderOptions, ServeArgs, VoxelizeArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Voxelize(a) => voxelize(a),
        Command::PrecomputeAo(a) => precompute_ao(a),
        Command::Render(a) => render(a),
        Command::Metrics(a) => metrics(a),
        Command::Bench(a) => bench(a),
        Command::Serve(a) => serve(a),
    }
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let bad = || CliError::Invalid(format!("size {s:?} is not WIDTHxHEIGHT"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.trim().parse::<u32>().map_err(|_| bad())?, h.trim().parse::<u32>().map_err(|_| bad())?);
    if w == 0 || h == 0 || w > u16::MAX as u32 || h > u16::MAX as u32 {
        return Err(bad());
    }
    Ok((w, h))
}

/// Defaults, then the config file, then flags.
fn render_params(o: &RenderOptions) -> Result<RenderParams> {
    let mut p = match &o.config {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
        None => RenderParams::default(),
    };
    if let Some(v) = o.opacity {
        p.base_opacity = v;
    }
    if let Some(v) = o.opacity_mode {
        p.opacity_mode = v;
    }
    if let Some(v) = o.tau {
        p.alpha_termination = v;
    }
    if let Some(v) = o.radius {
        p.tube_radius = v;
    }
    if let Some(v) = o.shadows {
        p.shadow_mode = v;
    }
    if let Some(v) = o.ao {
        p.ao_mode = v;
    }
    if let Some(v) = o.neighbors {
        p.neighbor_mode = v;
    }
    if o.no_joint_spheres {
        p.joint_spheres = false;
    }
    p.validate()?;
    Ok(p)
}

fn overview(scene: &RenderScene, yaw: f64, pitch: f64, width: u32, height: u32) -> Camera {
    let extent = scene.model().spec().extent();
    Camera::orbit(extent * 0.5, yaw, pitch, extent.length() * 1.1, 45.0, width, height)
}

fn write_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_scene(path: &Path) -> Result<RenderScene> {
    Ok(load_vxl(path)?.into_scene())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let set = generate_tornado(a.curves, a.steps, a.seed)?;
    save_lines_binary(&set, &a.out)?;
    log::info!("{} curves, {} vertices -> {}", set.curves.len(), set.vertex_count(), a.out.display());
    Ok(())
}

fn voxelize(a: VoxelizeArgs) -> Result<()> {
    let start = Instant::now();
    let transfer = TransferTable::preset(&a.transfer).ok_or_else(|| CliError::Invalid(format!("unknown transfer preset {:?}", a.transfer)))?;
    let set = load_curves(&a.input)?;
    let spec = GridSpec::fit(&set.bbox, a.grid, a.bins)?;
    let set = normalize_to_grid(&set, &spec)?;
    let model = build_voxel_model_with(&set, &spec, &BuildOptions { memory_budget: a.memory_budget, transfer })?;
    let report = memory_report(&model);
    let mut file = VxlFile::new(model);
    if a.lod {
        let octree = DensityOctree::from_model(&file.model);
        file.reps = Some(build_rep_lines(&file.model, &octree));
        file.octree = Some(octree);
    }
    save_vxl(&file, &a.out)?;
    log::info!(
        "grid {:?}, N={}, {} segments, {} bytes ({} per segment) in {:.2} s -> {}",
        spec.dims,
        spec.bins,
        report.segments,
        report.total,
        report.bytes_per_segment,
        start.elapsed().as_secs_f64(),
        a.out.display()
    );
    Ok(())
}

fn precompute_ao(a: PrecomputeArgs) -> Result<()> {
    let params = AoParams { n_rays: a.rays, radius: a.radius, step: a.step, jitter: None };
    params.validate()?;
    let mut file = load_vxl(&a.model)?;
    let octree = file.octree.take().unwrap_or_else(|| DensityOctree::from_model(&file.model));
    let start = Instant::now();
    file.ao = Some(precompute_voxel_ao(&octree, &params));
    file.octree = Some(octree);
    let out = a.out.as_ref().unwrap_or(&a.model);
    save_vxl(&file, out)?;
    log::info!("ambient occlusion for {} voxels in {:.2} s -> {}", file.model.spec().voxel_count(), start.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let (w, h) = parse_size(&a.size)?;
    let params = render_params(&a.options)?;
    let scene = load_scene(&a.model)?;
    let camera = match &a.camera {
        Some(c) => Camera::parse(c, w, h)?,
        None => overview(&scene, 30.0, 20.0, w, h),
    };
    let (frame, stats) = if a.reference { brute_force_render(&scene, &camera, &params) } else { render_frame(&scene, &camera, &params) };
    save_image(&frame, &a.out)?;
    if a.stats {
        println!("{}", serde_json::to_string(&stats)?);
    }
    log::info!("{w}x{h} in {:.1} ms, {} voxel steps, {} tests -> {}", stats.render_ms, stats.voxel_steps, stats.intersection_tests, a.out.display());
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let set = load_curves(&a.input)?;
    let spec = GridSpec::fit(&set.bbox, a.grid, a.bins)?;
    let set = normalize_to_grid(&set, &spec)?;
    let start = Instant::now();
    let model = build_voxel_model_with(&set, &spec, &BuildOptions::default())?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let value = json!({
        "input": a.input.display().to_string(),
        "grid": spec.dims,
        "bins": spec.bins,
        "curves": set.curves.len(),
        "segments": model.segment_count(),
        "build_ms": build_ms,
        "build": model.stats(),
        "hausdorff": mean_hausdorff(&set, &model),
        "tangent_deviation_deg": mean_tangent_deviation(&set, &model),
        "duplicate_rate": count_duplicates(&model),
        "memory": memory_report(&model),
    });
    write_json(&value, a.json.as_deref())
}

fn bench(a: BenchArgs) -> Result<()> {
    let (w, h) = parse_size(&a.size)?;
    let params = render_params(&a.options)?;
    let scene = load_scene(&a.model)?;
    if a.frames == 0 {
        return Err(CliError::Invalid("--frames must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(a.frames);
    let mut total_ms = 0.0;
    for i in 0..a.frames {
        let yaw = 360.0 * i as f64 / a.frames as f64;
        let camera = overview(&scene, yaw, a.pitch, w, h);
        let start = Instant::now();
        let (_, stats) = render_frame(&scene, &camera, &params);
        let ms = start.elapsed().as_secs_f64() * 1e3;
        total_ms += ms;
        records.push(json!({
            "frame": i,
            "yaw": yaw,
            "ms": ms,
            "voxel_steps": stats.voxel_steps,
            "intersection_tests": stats.intersection_tests,
            "fragments": stats.fragments,
        }));
    }
    let value = json!({
        "model": a.model.display().to_string(),
        "width": w,
        "height": h,
        "threads": linevox_core::par::current_threads(),
        "params": params,
        "mean_ms": total_ms / a.frames as f64,
        "frames": records,
    });
    write_json(&value, a.json.as_deref())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut params = render_params(&a.options)?;
    if a.options.neighbors.is_none() {
        params.neighbor_mode = linevox_core::raycast::NeighborMode::Auto;
    }
    let config = ServiceConfig {
        bind: a.bind,
        ws_port: a.port,
        http_port: Some(a.http_port),
        static_dir: a.static_dir.unwrap_or_else(default_static_dir),
        session: SessionConfig {
            debounce: std::time::Duration::from_millis(a.debounce_ms),
            moving_divisor: a.moving_divisor,
            scene_root: a.scene_root,
            params,
            ..Default::default()
        },
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(linevox_service::serve(config))?;
    Ok(())
}
