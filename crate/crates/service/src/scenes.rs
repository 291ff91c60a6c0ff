use std::path::Path;

use linevox_core::raycast::RenderScene;
use linevox_core::scene::{generate_tornado, load_curves, normalize_to_grid, CurveSet, GridSpec};
use linevox_core::voxelizer::build_voxel_model;
use linevox_core::vxl::load_vxl;

use crate::error::{Result, ServiceError};

/// Grid used when a curve file (rather than a `.vxl`) is loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportGrid {
    pub resolution: u32,
    pub bins: u32,
}

impl Default for ImportGrid {
    fn default() -> Self {
        Self { resolution: 128, bins: 32 }
    }
}

pub const BUILTIN_SCENES: [&str; 2] = ["tornado", "tornado-small"];

fn voxelize(set: &CurveSet, grid: ImportGrid) -> Result<RenderScene> {
    let spec = GridSpec::fit(&set.bbox, grid.resolution, grid.bins)?;
    let set = normalize_to_grid(set, &spec)?;
    Ok(RenderScene::new(build_voxel_model(&set, &spec)?))
}

pub fn builtin(name: &str) -> Result<RenderScene> {
    let (curves, steps, resolution) = match name {
        "tornado" => (1000, 250, 256),
        "tornado-small" => (150, 200, 64),
        _ => return Err(ServiceError::UnknownScene(name.to_string())),
    };
    voxelize(&generate_tornado(curves, steps, 42)?, ImportGrid { resolution, bins: 32 })
}

pub fn from_path(path: &Path, grid: ImportGrid) -> Result<RenderScene> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("vxl")) {
        Ok(load_vxl(path)?.into_scene())
    } else {
        voxelize(&load_curves(path)?, grid)
    }
}
