//! A single-page demo: generate a small tornado, voxelize it, and ray-cast it
//! on the main thread.

use linevox_core::metrics::memory_report;
use linevox_core::raycast::{render_frame, Camera, NeighborMode, RenderParams, RenderScene};
use linevox_core::scene::{generate_tornado, normalize_to_grid, CurveSet, GridSpec};
use linevox_core::voxelizer::{build_voxel_model, count_duplicates};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    curves: CurveSet,
    grid: u32,
    scene: RenderScene,
    build_ms: f64,
    last_stats: String,
}

fn voxelize(curves: &CurveSet, grid: u32, bins: u32) -> Result<RenderScene, JsValue> {
    let spec = GridSpec::fit(&curves.bbox, grid, bins).map_err(js_err)?;
    let set = normalize_to_grid(curves, &spec).map_err(js_err)?;
    Ok(RenderScene::new(build_voxel_model(&set, &spec).map_err(js_err)?))
}

#[wasm_bindgen]
extern "C" {
    #[wasm_bindgen(js_namespace = Date, js_name = now)]
    fn now_ms() -> f64;
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(curves: usize, grid: u32, bins: u32) -> Result<Demo, JsValue> {
        let set = generate_tornado(curves, 200, 42).map_err(js_err)?;
        let start = now_ms();
        let scene = voxelize(&set, grid, bins)?;
        Ok(Demo { curves: set, grid, scene, build_ms: now_ms() - start, last_stats: String::new() })
    }

    /// Re-encodes the same curves with `bins` per face axis.
    pub fn set_bins(&mut self, bins: u32) -> Result<(), JsValue> {
        let start = now_ms();
        self.scene = voxelize(&self.curves, self.grid, bins)?;
        self.build_ms = now_ms() - start;
        Ok(())
    }

    /// Model summary as JSON.
    pub fn model_info(&self) -> String {
        let model = self.scene.model();
        let mem = memory_report(model);
        json!({
            "dims": model.spec().dims,
            "bins": model.bins(),
            "segments": model.segment_count(),
            "bytes": mem.total,
            "bytesPerSegment": mem.bytes_per_segment,
            "duplicateRate": count_duplicates(model),
            "buildMs": self.build_ms,
        })
        .to_string()
    }

    /// Orbit render; returns straight RGBA8 pixels.
    #[allow(clippy::too_many_arguments)]
    pub fn render(
        &mut self,
        width: u32,
        height: u32,
        yaw: f64,
        pitch: f64,
        zoom: f64,
        opacity: f32,
        radius: f64,
        neighbors: bool,
    ) -> Result<Vec<u8>, JsValue> {
        let extent = self.scene.model().spec().extent();
        let camera = Camera::orbit(extent * 0.5, yaw, pitch, extent.length() * 1.1 / zoom.max(0.05), 45.0, width, height);
        let params = RenderParams {
            base_opacity: opacity,
            tube_radius: radius,
            neighbor_mode: if neighbors { NeighborMode::On } else { NeighborMode::Off },
            ..Default::default()
        };
        params.validate().map_err(js_err)?;
        let start = now_ms();
        let (frame, mut stats) = render_frame(&self.scene, &camera, &params);
        stats.render_ms = now_ms() - start;
        self.last_stats = serde_json::to_string(&stats).map_err(js_err)?;
        Ok(frame.to_rgba8_straight())
    }

    /// Counters of the most recent render as JSON.
    pub fn last_stats(&self) -> String {
        self.last_stats.clone()
    }
}
