//! CPU ray-casting of the voxelized tubes.

mod intersect;
mod render;
mod scene;
mod shade;
mod traverse;

use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::illumination::AoParams;

pub use intersect::{intersect_capsule, intersect_ray_sphere, intersect_ray_tube, HitKind, Interval, Ray};
pub(crate) use render::{fragment, hit_record, Lights, Scratch};
pub use render::{render_frame, RenderStats};
pub use scene::RenderScene;
pub(crate) use scene::NEAR as NEAR_FLAG;
pub use shade::{shade_local, Compositor, Shading};
pub use traverse::{traverse_voxels, VoxelStep, VoxelWalk};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: DVec3,
    pub target: DVec3,
    pub up: DVec3,
    /// Vertical field of view in degrees.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(position: DVec3, target: DVec3, up: DVec3, fov: f64, width: u32, height: u32) -> Result<Self> {
        let cam = Self { position, target, up, fov, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < 180.0) {
            return Err(Error::InvalidArgument(format!("field of view {} outside (0, 180)", self.fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("image must be at least 1x1".into()));
        }
        let f = self.target - self.position;
        if f.length_squared() == 0.0 || f.normalize().cross(self.up).length_squared() < 1e-12 {
            return Err(Error::InvalidArgument("up vector is parallel to the view direction".into()));
        }
        Ok(())
    }

    /// `"px,py,pz,tx,ty,tz,fov"`, with +z up (or +y if looking along z).
    pub fn parse(s: &str, width: u32, height: u32) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("camera `{s}`: {e}")))?;
        if v.len() != 7 {
            return Err(Error::InvalidArgument(format!("camera `{s}` needs 7 numbers, got {}", v.len())));
        }
        let pos = DVec3::new(v[0], v[1], v[2]);
        let target = DVec3::new(v[3], v[4], v[5]);
        let dir = (target - pos).normalize_or_zero();
        let up = if dir.cross(DVec3::Z).length_squared() < 1e-6 { DVec3::Y } else { DVec3::Z };
        Self::new(pos, target, up, v[6], width, height)
    }

    /// Orbit around `center` with +z up; angles in degrees.
    pub fn orbit(center: DVec3, yaw: f64, pitch: f64, distance: f64, fov: f64, width: u32, height: u32) -> Self {
        let (yaw, pitch) = (yaw.to_radians(), pitch.clamp(-89.0, 89.0).to_radians());
        let offset = DVec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin()) * distance;
        Self { position: center + offset, target: center, up: DVec3::Z, fov, width, height }
    }

    /// Right, up and forward unit vectors.
    pub fn basis(&self) -> (DVec3, DVec3, DVec3) {
        let forward = (self.target - self.position).normalize();
        let right = forward.cross(self.up).normalize();
        (right, right.cross(forward), forward)
    }

    /// Primary ray through the center of pixel `(x, y)`, row 0 at the top.
    pub fn ray(&self, x: u32, y: u32) -> Ray {
        let (right, up, forward) = self.basis();
        let h = (self.fov.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((x as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * h * aspect;
        let sy = (1.0 - (y as f64 + 0.5) / self.height as f64 * 2.0) * h;
        Ray::new(self.position, forward + right * sx + up * sy)
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width.max(1);
        self.height = height.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpacityMode {
    Constant,
    Transfer,
    DistanceScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborMode {
    Off,
    On,
    /// Off while the camera moves, on when it stands still.
    Auto,
}

impl NeighborMode {
    pub fn enabled(self, moving: bool) -> bool {
        match self {
            Self::Off => false,
            Self::On => true,
            Self::Auto => !moving,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMode {
    None,
    Hard,
    Replines,
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AoMode {
    None,
    HemisphereGeometry,
    DensityRays,
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Light {
    /// Light at the eye for shading; shadows use a key light above and
    /// right of the camera.
    Headlight,
    /// Direction pointing toward the light.
    Directional([f64; 3]),
}

macro_rules! parse_enum {
    ($t:ty, $($name:literal => $v:expr),+ $(,)?) => {
        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => Err(Error::InvalidArgument(format!(concat!("unknown ", stringify!($t), " `{}`"), s))),
                }
            }
        }
    };
}

parse_enum!(OpacityMode, "constant" => Self::Constant, "transfer" => Self::Transfer, "distance-scaled" => Self::DistanceScaled);
parse_enum!(NeighborMode, "off" => Self::Off, "on" => Self::On, "auto" => Self::Auto);
parse_enum!(ShadowMode, "none" => Self::None, "hard" => Self::Hard, "replines" => Self::Replines, "cone" => Self::Cone);
parse_enum!(
    AoMode,
    "none" => Self::None,
    "hemisphere-geometry" => Self::HemisphereGeometry,
    "hemisphere" => Self::HemisphereGeometry,
    "density-rays" => Self::DensityRays,
    "precomputed" => Self::Precomputed,
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    /// In voxel units.
    pub tube_radius: f64,
    pub opacity_mode: OpacityMode,
    pub base_opacity: f32,
    /// Stop compositing once accumulated opacity reaches this.
    pub alpha_termination: f32,
    pub neighbor_mode: NeighborMode,
    pub shadow_mode: ShadowMode,
    pub ao_mode: AoMode,
    pub background: [f32; 4],
    pub joint_spheres: bool,
    pub shading: Shading,
    pub light: Light,
    pub ao: AoParams,
    /// Coarse level used for representative-line shadows.
    pub shadow_level: u32,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            tube_radius: 0.25,
            opacity_mode: OpacityMode::Constant,
            base_opacity: 1.0,
            alpha_termination: 0.95,
            neighbor_mode: NeighborMode::On,
            shadow_mode: ShadowMode::None,
            ao_mode: AoMode::None,
            background: [0.08, 0.08, 0.1, 1.0],
            joint_spheres: true,
            shading: Shading::default(),
            light: Light::Headlight,
            ao: AoParams::default(),
            shadow_level: 2,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tube_radius > 0.0 && self.tube_radius <= 1.0) {
            return Err(Error::InvalidArgument(format!("tube radius {} outside (0, 1]", self.tube_radius)));
        }
        if !(self.base_opacity > 0.0 && self.base_opacity <= 1.0) {
            return Err(Error::InvalidArgument(format!("opacity {} outside (0, 1]", self.base_opacity)));
        }
        if !(self.alpha_termination > 0.0 && self.alpha_termination <= 1.0) {
            return Err(Error::InvalidArgument(format!("termination threshold {} outside (0, 1]", self.alpha_termination)));
        }
        self.ao.validate()
    }
}

/// Hit recorded during gathering, with enough identity to sort and dedupe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub t_in: f64,
    pub t_out: f64,
    pub normal: DVec3,
    pub voxel: u32,
    pub local_id: u8,
    pub attr_index: u8,
    pub kind: HitKind,
    pub segment: u32,
}

impl HitRecord {
    /// Visibility order shared by the ray-caster and the brute-force oracle.
    #[inline]
    pub fn order(&self, other: &Self) -> std::cmp::Ordering {
        self.t_in
            .total_cmp(&other.t_in)
            .then(self.voxel.cmp(&other.voxel))
            .then(self.local_id.cmp(&other.local_id))
            .then(self.segment.cmp(&other.segment))
    }
}

/// Premultiplied RGBA in `[0, 1]`, row-major from the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f32; 4]>,
}

impl Frame {
    pub fn filled(width: u32, height: u32, rgba: [f32; 4]) -> Self {
        Self { width, height, pixels: vec![rgba; width as usize * height as usize] }
    }

    pub fn to_rgba8(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)).collect()
    }

    /// RGBA8 with color divided back out of alpha, as image formats expect.
    pub fn to_rgba8_straight(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| {
                let a = p[3].clamp(0.0, 1.0);
                let k = if a > 0.0 { 1.0 / a } else { 0.0 };
                [p[0] * k, p[1] * k, p[2] * k, a].map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            })
            .collect()
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| [p[0], p[1], p[2]].map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_center_ray_points_at_target() {
        let cam = Camera::new(DVec3::new(0.0, -10.0, 0.0), DVec3::ZERO, DVec3::Z, 60.0, 3, 3).unwrap();
        let r = cam.ray(1, 1);
        assert!(r.dir.distance(DVec3::Y) < 1e-12);
        assert!(cam.ray(1, 0).dir.z > 0.0);
        assert!(cam.ray(2, 1).dir.x > 0.0);
    }

    #[test]
    fn camera_validation() {
        assert!(Camera::new(DVec3::ZERO, DVec3::Z, DVec3::Z, 60.0, 4, 4).is_err());
        assert!(Camera::new(DVec3::ZERO, DVec3::X, DVec3::Z, 180.0, 4, 4).is_err());
        assert!(Camera::new(DVec3::ZERO, DVec3::X, DVec3::Z, 60.0, 0, 4).is_err());
        let c = Camera::parse("0,0,10, 0,0,0, 45", 8, 8).unwrap();
        assert_eq!(c.up, DVec3::Y);
        assert!(Camera::parse("1,2,3", 8, 8).is_err());
    }

    #[test]
    fn params_json_roundtrip_and_partial() {
        let p = RenderParams::default();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<RenderParams>(&s).unwrap(), p);
        let q: RenderParams = serde_json::from_str(r#"{"base_opacity":0.25,"shadow_mode":"cone"}"#).unwrap();
        assert_eq!(q.base_opacity, 0.25);
        assert_eq!(q.shadow_mode, ShadowMode::Cone);
        assert_eq!(q.tube_radius, p.tube_radius);
        assert_eq!("density-rays".parse::<AoMode>().unwrap(), AoMode::DensityRays);
        assert!("sideways".parse::<NeighborMode>().is_err());
    }
}
