//! Per-connection session: message intake, motion tracking and a render
//! worker that coalesces updates and refines the image once the camera
//! stops.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use glam::DVec3;
use linevox_core::image_io::encode_png;
use linevox_core::raycast::{render_frame, AoMode, Camera, NeighborMode, RenderParams, RenderScene, ShadowMode};
use serde_json::Value;
use tokio::sync::{mpsc, Notify};

use crate::error::{Result, ServiceError};
use crate::protocol::{encode_frame, ClientMessage, FrameFormat, FrameHeader, Quality, ServerMessage};
use crate::scenes::{self, ImportGrid};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Camera silence after which a refined frame is rendered.
    pub debounce: Duration,
    /// Resolution divisor for frames rendered while the camera moves.
    pub moving_divisor: u32,
    pub width: u32,
    pub height: u32,
    pub import_grid: ImportGrid,
    /// Directory `loadScene` paths are resolved against; `None` disables paths.
    pub scene_root: Option<PathBuf>,
    pub params: RenderParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            debounce: Duration::from_millis(300),
            moving_divisor: 2,
            width: 640,
            height: 360,
            import_grid: ImportGrid::default(),
            scene_root: None,
            params: RenderParams { neighbor_mode: NeighborMode::Auto, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Text(String),
    Binary(Vec<u8>),
}

#[derive(Debug)]
struct State {
    scene: Option<Arc<RenderScene>>,
    camera: Option<Camera>,
    params: RenderParams,
    epoch: u64,
    last_motion: Option<Instant>,
    pending: bool,
    /// Epoch and quality of the newest emitted frame.
    delivered: Option<(u64, Quality)>,
    next_id: u32,
    loads: u64,
}

struct Job {
    scene: Arc<RenderScene>,
    camera: Camera,
    params: RenderParams,
    epoch: u64,
    quality: Quality,
}

enum Source {
    Builtin(String),
    File(PathBuf),
}

enum Plan {
    Render(Job),
    WaitUntil(Instant),
    Idle,
}

pub struct Session {
    config: SessionConfig,
    state: Mutex<State>,
    wake: Notify,
    out: mpsc::UnboundedSender<Outbound>,
}

fn default_camera(scene: &RenderScene, width: u32, height: u32) -> Camera {
    let extent = scene.model().spec().extent();
    Camera::orbit(extent * 0.5, 30.0, 20.0, extent.length() * 1.1, 45.0, width, height)
}

/// Overlays the given fields on `params`; nested `"params"` objects are unwrapped.
fn merge_params(params: &RenderParams, mut patch: serde_json::Map<String, Value>) -> Result<RenderParams> {
    if let Some(Value::Object(inner)) = patch.remove("params") {
        patch.extend(inner);
    }
    let mut current = serde_json::to_value(params).map_err(|e| ServiceError::Protocol(e.to_string()))?;
    let Value::Object(fields) = &mut current else { unreachable!("params serialize to an object") };
    for (k, v) in patch {
        if !fields.contains_key(&k) {
            return Err(ServiceError::Protocol(format!("unknown render parameter {k:?}")));
        }
        fields.insert(k, v);
    }
    let merged: RenderParams = serde_json::from_value(current).map_err(|e| ServiceError::Protocol(e.to_string()))?;
    merged.validate()?;
    Ok(merged)
}

impl Session {
    pub fn new(config: SessionConfig, out: mpsc::UnboundedSender<Outbound>) -> Arc<Self> {
        let state = State {
            scene: None,
            camera: None,
            params: config.params.clone(),
            epoch: 0,
            last_motion: None,
            pending: false,
            delivered: None,
            next_id: 1,
            loads: 0,
        };
        Arc::new(Self { config, state: Mutex::new(state), wake: Notify::new(), out })
    }

    fn send(&self, msg: ServerMessage) {
        let _ = self.out.send(Outbound::Text(msg.to_json()));
    }

    pub fn reject(&self, message: &str) {
        self.send(ServerMessage::error(message));
    }

    /// Applies one text message. Never blocks on rendering or loading.
    pub fn handle_text(self: &Arc<Self>, text: &str) {
        let msg = match ClientMessage::parse(text) {
            Ok(m) => m,
            Err(e) => return self.send(ServerMessage::error(format!("bad message: {e}"))),
        };
        if let Err(e) = self.handle(msg) {
            self.send(ServerMessage::error(e.to_string()));
        }
    }

    pub fn handle(self: &Arc<Self>, msg: ClientMessage) -> Result<()> {
        match msg {
            ClientMessage::LoadScene { name, path } => self.start_load(name, path),
            ClientMessage::Camera { pos, target, up, fov, width, height } => {
                let mut st = self.state.lock().unwrap();
                let (w, h) = st.camera.map_or((self.config.width, self.config.height), |c| (c.width, c.height));
                let up = up.map(DVec3::from).unwrap_or(DVec3::Z);
                let camera = Camera::new(pos.into(), target.into(), up, fov, width.unwrap_or(w), height.unwrap_or(h))?;
                st.camera = Some(camera);
                self.mark_motion(&mut st);
                Ok(())
            }
            ClientMessage::Params(patch) => {
                let mut st = self.state.lock().unwrap();
                st.params = merge_params(&st.params, patch)?;
                self.mark_motion(&mut st);
                Ok(())
            }
            ClientMessage::RequestFrame => {
                let mut st = self.state.lock().unwrap();
                if st.scene.is_none() && st.loads == 0 {
                    return Err(ServiceError::NoScene);
                }
                st.pending = true;
                drop(st);
                self.wake.notify_one();
                Ok(())
            }
        }
    }

    fn mark_motion(&self, st: &mut State) {
        st.epoch += 1;
        st.last_motion = Some(Instant::now());
        st.pending = true;
        self.wake.notify_one();
    }

    fn start_load(self: &Arc<Self>, name: Option<String>, path: Option<String>) -> Result<()> {
        let source = match (name, path) {
            (Some(n), _) if scenes::BUILTIN_SCENES.contains(&n.as_str()) => Source::Builtin(n),
            (Some(n), None) => return Err(ServiceError::UnknownScene(n)),
            (_, Some(p)) => {
                let root = self.config.scene_root.as_ref().ok_or_else(|| ServiceError::Protocol("scene paths are disabled".into()))?;
                let rel = PathBuf::from(&p);
                if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                    return Err(ServiceError::Protocol(format!("path {p:?} must be relative to the scene root")));
                }
                Source::File(root.join(rel))
            }
            (None, None) => return Err(ServiceError::Protocol("loadScene needs a name or a path".into())),
        };
        self.state.lock().unwrap().loads += 1;
        let session = Arc::clone(self);
        let grid = self.config.import_grid;
        tokio::spawn(async move {
            let label = match &source {
                Source::Builtin(n) => n.clone(),
                Source::File(p) => p.display().to_string(),
            };
            let loaded = tokio::task::spawn_blocking(move || match source {
                Source::Builtin(name) => scenes::builtin(&name),
                Source::File(path) => scenes::from_path(&path, grid),
            })
            .await;
            let mut st = session.state.lock().unwrap();
            st.loads -= 1;
            match loaded {
                Ok(Ok(scene)) => {
                    let spec = *scene.model().spec();
                    let segments = scene.model().segment_count();
                    let (w, h) = st.camera.map_or((session.config.width, session.config.height), |c| (c.width, c.height));
                    st.camera = Some(default_camera(&scene, w, h));
                    st.scene = Some(Arc::new(scene));
                    st.epoch += 1;
                    st.last_motion = None;
                    st.delivered = None;
                    drop(st);
                    session.send(ServerMessage::SceneLoaded { name: label, dims: spec.dims, segments });
                    session.wake.notify_one();
                }
                Ok(Err(e)) => {
                    drop(st);
                    session.send(ServerMessage::error(format!("loading {label}: {e}")));
                }
                Err(e) => {
                    drop(st);
                    session.send(ServerMessage::error(format!("loading {label}: {e}")));
                }
            }
        });
        Ok(())
    }

    fn plan(&self, now: Instant) -> Plan {
        let mut st = self.state.lock().unwrap();
        let (Some(scene), Some(camera)) = (st.scene.clone(), st.camera) else {
            return Plan::Idle;
        };
        let quiet_at = st.last_motion.map(|t| t + self.config.debounce);
        let moving = quiet_at.is_some_and(|t| now < t);
        let quality = if st.pending {
            st.pending = false;
            if moving {
                Quality::Moving
            } else {
                Quality::Still
            }
        } else if st.delivered == Some((st.epoch, Quality::Moving)) {
            match quiet_at {
                Some(t) if moving => return Plan::WaitUntil(t),
                _ => Quality::Still,
            }
        } else {
            return Plan::Idle;
        };
        Plan::Render(Job { scene, camera, params: st.params.clone(), epoch: st.epoch, quality })
    }

    fn job_settings(&self, job: &Job) -> (Camera, RenderParams) {
        let mut params = job.params.clone();
        let mut camera = job.camera;
        match job.quality {
            Quality::Moving => {
                let d = self.config.moving_divisor.max(1);
                camera = camera.with_size((camera.width / d).max(1), (camera.height / d).max(1));
                params.neighbor_mode = if params.neighbor_mode.enabled(true) { NeighborMode::On } else { NeighborMode::Off };
                params.shadow_mode = ShadowMode::None;
                params.ao_mode = AoMode::None;
            }
            Quality::Still => {
                params.neighbor_mode = if params.neighbor_mode.enabled(false) { NeighborMode::On } else { NeighborMode::Off };
            }
        }
        (camera, params)
    }

    /// Renders and emits frames until the outbound channel closes.
    pub async fn run_worker(self: Arc<Self>) {
        loop {
            if self.out.is_closed() {
                return;
            }
            match self.plan(Instant::now()) {
                Plan::Idle => self.wake.notified().await,
                Plan::WaitUntil(t) => {
                    tokio::select! {
                        _ = self.wake.notified() => {}
                        _ = tokio::time::sleep_until(t.into()) => {}
                    }
                }
                Plan::Render(job) => self.render(job).await,
            }
        }
    }

    async fn render(&self, job: Job) {
        let (camera, params) = self.job_settings(&job);
        let neighbors = params.neighbor_mode == NeighborMode::On;
        let scene = Arc::clone(&job.scene);
        let quality = job.quality;
        let rendered = tokio::task::spawn_blocking(move || {
            let (frame, stats) = render_frame(&scene, &camera, &params);
            let (format, payload) = match quality {
                Quality::Still => match encode_png(&frame) {
                    Ok(png) => (FrameFormat::Png, png),
                    Err(_) => (FrameFormat::Rgba8, frame.to_rgba8_straight()),
                },
                Quality::Moving => (FrameFormat::Rgba8, frame.to_rgba8_straight()),
            };
            (frame.width, frame.height, stats, format, payload)
        })
        .await;
        let (width, height, stats, format, payload) = match rendered {
            Ok(r) => r,
            Err(e) => {
                let id = self.state.lock().unwrap().next_id;
                let _ = self.out.send(Outbound::Text(ServerMessage::Error { message: format!("render failed: {e}"), frame_id: Some(id) }.to_json()));
                return;
            }
        };
        let frame_id = {
            let mut st = self.state.lock().unwrap();
            if st.epoch != job.epoch {
                return;
            }
            let id = st.next_id;
            st.next_id += 1;
            st.delivered = Some((job.epoch, quality));
            id
        };
        let stats_msg = ServerMessage::Stats {
            frame_id,
            render_ms: stats.render_ms,
            voxel_steps: stats.voxel_steps,
            tests: stats.intersection_tests,
            quality,
            width,
            height,
            epoch: job.epoch,
            neighbors,
        };
        let header = FrameHeader { frame_id, width: width as u16, height: height as u16, format };
        let _ = self.out.send(Outbound::Text(stats_msg.to_json()));
        let _ = self.out.send(Outbound::Binary(encode_frame(header, &payload)));
    }
}
