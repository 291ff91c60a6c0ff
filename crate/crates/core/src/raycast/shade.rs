//! Local illumination and front-to-back compositing.

use glam::DVec3;
use serde::{Deserialize, Serialize};

/// Blinn-Phong style coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Shading {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for Shading {
    fn default() -> Self {
        Self { ambient: 0.2, diffuse: 0.7, specular: 0.3, shininess: 32.0 }
    }
}

impl Shading {
    /// Ambient and direct parts kept apart so occlusion terms can scale them separately.
    pub fn terms(&self, normal: DVec3, light: DVec3, view: DVec3) -> (f64, f64) {
        let h = (light + view).normalize_or(light);
        let diffuse = normal.dot(light).max(0.0);
        let specular = normal.dot(h).max(0.0).powf(self.shininess);
        (self.ambient, self.diffuse * diffuse + self.specular * specular)
    }
}

/// `k_a + k_d max(n.l, 0) + k_s max(n.h, 0)^p`, with `h` the half vector.
pub fn shade_local(shading: &Shading, normal: DVec3, light: DVec3, view: DVec3) -> f64 {
    let (a, d) = shading.terms(normal, light, view);
    a + d
}

/// Premultiplied front-to-back accumulation with early termination.
#[derive(Debug, Clone, Copy)]
pub struct Compositor {
    pub color: [f64; 3],
    pub alpha: f64,
    tau: f64,
}

impl Compositor {
    pub fn new(tau: f64) -> Self {
        Self { color: [0.0; 3], alpha: 0.0, tau }
    }

    #[inline]
    pub fn done(&self) -> bool {
        self.alpha >= self.tau
    }

    /// Blends a straight-alpha fragment behind what is accumulated so far.
    #[inline]
    pub fn add(&mut self, rgb: [f64; 3], alpha: f64) {
        let w = (1.0 - self.alpha) * alpha;
        for c in 0..3 {
            self.color[c] += w * rgb[c];
        }
        self.alpha += w;
    }

    /// Puts the background under the result; output stays premultiplied.
    pub fn finish(mut self, background: [f32; 4]) -> [f32; 4] {
        let bg = background.map(|v| v as f64);
        self.add([bg[0], bg[1], bg[2]], bg[3]);
        [self.color[0] as f32, self.color[1] as f32, self.color[2] as f32, self.alpha as f32]
    }
}
