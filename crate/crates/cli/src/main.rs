use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linevox_core::raycast::{AoMode, NeighborMode, OpacityMode, ShadowMode};

mod commands;
mod error;

#[derive(Parser, Debug)]
#[command(name = "linevox", version, about = "Voxel-based encoding and ray-casting of large 3D line sets")]
struct Cli {
    /// Worker threads; defaults to all logical cores.
    #[arg(long, global = true, env = "LINEVOX_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic line set.
    Generate(GenerateArgs),
    /// Build a `.vxl` voxel model from a curve file.
    Voxelize(VoxelizeArgs),
    /// Store per-voxel ambient occlusion in a model.
    PrecomputeAo(PrecomputeArgs),
    /// Ray-cast one image.
    Render(RenderArgs),
    /// Reconstruction error, memory and duplicate statistics as JSON.
    Metrics(MetricsArgs),
    /// Render a scripted camera orbit and report per-frame counters.
    Bench(BenchArgs),
    /// Run the WebSocket render service and the viewer's static files.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    curves: usize,
    #[arg(long, default_value_t = 250)]
    steps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// `.lines` (binary) output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VoxelizeArgs {
    /// `.obj` line file or `.lines` binary.
    #[arg(long)]
    input: PathBuf,
    /// Voxels along the longest axis.
    #[arg(long)]
    grid: u32,
    #[arg(long, default_value_t = 32)]
    bins: u32,
    #[arg(long)]
    out: PathBuf,
    /// Transfer table preset (coolwarm, viridis, gray, white).
    #[arg(long, default_value = "coolwarm")]
    transfer: String,
    /// Also store the density octree and representative lines.
    #[arg(long)]
    lod: bool,
    /// Fail if the model would exceed this many bytes.
    #[arg(long)]
    memory_budget: Option<u64>,
}

#[derive(Args, Debug)]
struct PrecomputeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    rays: u32,
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Defaults to rewriting the model in place.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
struct RenderOptions {
    /// JSON file with render parameter fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    opacity: Option<f32>,
    #[arg(long)]
    opacity_mode: Option<OpacityMode>,
    #[arg(long)]
    tau: Option<f32>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    shadows: Option<ShadowMode>,
    #[arg(long)]
    ao: Option<AoMode>,
    #[arg(long)]
    neighbors: Option<NeighborMode>,
    /// Drop the spheres that close gaps between tube pieces.
    #[arg(long)]
    no_joint_spheres: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    model: PathBuf,
    /// "px,py,pz,tx,ty,tz,fov" in grid units; defaults to an overview.
    #[arg(long)]
    camera: Option<String>,
    #[arg(long, default_value = "640x360")]
    size: String,
    #[command(flatten)]
    options: RenderOptions,
    /// `.ppm` or `.png`.
    #[arg(long)]
    out: PathBuf,
    /// Render with the brute-force reference instead.
    #[arg(long)]
    reference: bool,
    /// Print render statistics as JSON.
    #[arg(long)]
    stats: bool,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    grid: u32,
    #[arg(long, default_value_t = 32)]
    bins: u32,
    /// Output file; stdout when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    #[arg(long, default_value = "640x360")]
    size: String,
    #[arg(long, default_value_t = 20.0)]
    pitch: f64,
    #[command(flatten)]
    options: RenderOptions,
    /// Output file; stdout when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = linevox_service::server::DEFAULT_WS_PORT)]
    port: u16,
    #[arg(long, default_value_t = linevox_service::server::DEFAULT_HTTP_PORT)]
    http_port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Viewer bundle directory.
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Directory that `loadScene` paths resolve against.
    #[arg(long)]
    scene_root: Option<PathBuf>,
    /// Debounce before a refined frame, in milliseconds.
    #[arg(long, default_value_t = 300)]
    debounce_ms: u64,
    #[arg(long, default_value_t = 2)]
    moving_divisor: u32,
    #[command(flatten)]
    options: RenderOptions,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        linevox_core::par::init_global(n);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
