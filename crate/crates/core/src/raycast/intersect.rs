//! Ray intersections with tubes, joint spheres and their union.

use glam::DVec3;
use serde::{Deserialize, Serialize};

/// A ray with unit direction, so `t` is a distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub dir: DVec3,
}

impl Ray {
    pub fn new(origin: DVec3, dir: DVec3) -> Self {
        Self { origin, dir: dir.normalize() }
    }

    #[inline]
    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + self.dir * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HitKind {
    Tube,
    JointSphere,
    Representative,
}

/// Entry/exit of a ray through one primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub t_in: f64,
    pub t_out: f64,
    /// Unit normal at the entry point, facing the ray.
    pub normal: DVec3,
    pub kind: HitKind,
}

fn clamp_to_origin(mut hit: Interval, ray: &Ray) -> Option<Interval> {
    if hit.t_out < 0.0 {
        return None;
    }
    if hit.t_in < 0.0 {
        hit.t_in = 0.0;
        hit.normal = -ray.dir;
    }
    Some(hit)
}

pub fn intersect_ray_sphere(ray: &Ray, center: DVec3, r: f64) -> Option<Interval> {
    let oc = ray.origin - center;
    let b = oc.dot(ray.dir);
    let c = oc.dot(oc) - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (t0, t1) = (-b - s, -b + s);
    let normal = (ray.at(t0) - center).normalize_or(-ray.dir);
    clamp_to_origin(Interval { t_in: t0, t_out: t1, normal, kind: HitKind::JointSphere }, ray)
}

/// Cylinder of radius `r` around `a`-`b`, cut by the planes through the
/// endpoints. Falls back to a sphere when `a == b`.
pub fn intersect_ray_tube(ray: &Ray, a: DVec3, b: DVec3, r: f64) -> Option<Interval> {
    let ba = b - a;
    let baba = ba.dot(ba);
    if baba < 1e-24 {
        return intersect_ray_sphere(ray, a, r);
    }
    let d = ray.dir;
    let oc = ray.origin - a;
    let bard = ba.dot(d);
    let baoc = ba.dot(oc);

    // Slab between the end planes.
    let axis = ba / baba.sqrt();
    let (slab_in, slab_out, cap_normal) = if bard != 0.0 {
        let t_a = -baoc / bard;
        let t_b = (baba - baoc) / bard;
        if t_a < t_b {
            (t_a, t_b, -axis)
        } else {
            (t_b, t_a, axis)
        }
    } else if baoc < 0.0 || baoc > baba {
        return None;
    } else {
        (f64::NEG_INFINITY, f64::INFINITY, -d)
    };

    // Infinite cylinder.
    let k2 = baba - bard * bard;
    let k1 = baba * oc.dot(d) - baoc * bard;
    let k0 = baba * oc.dot(oc) - baoc * baoc - r * r * baba;
    let (cyl_in, cyl_out) = if k2 <= 1e-12 * baba {
        if k0 > 0.0 {
            return None;
        }
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let h = k1 * k1 - k2 * k0;
        if h < 0.0 {
            return None;
        }
        let sh = h.sqrt();
        ((-k1 - sh) / k2, (-k1 + sh) / k2)
    };

    let t_in = slab_in.max(cyl_in);
    let t_out = slab_out.min(cyl_out);
    if t_in > t_out {
        return None;
    }
    let normal = if cyl_in >= slab_in {
        let q = ray.at(cyl_in) - a;
        (q - ba * (q.dot(ba) / baba)).normalize_or(-d)
    } else {
        cap_normal
    };
    clamp_to_origin(Interval { t_in, t_out, normal, kind: HitKind::Tube }, ray)
}

fn union(a: Option<Interval>, b: Option<Interval>) -> Option<Interval> {
    match (a, b) {
        (Some(x), Some(y)) => {
            let mut first = if y.t_in < x.t_in { y } else { x };
            first.t_out = x.t_out.max(y.t_out);
            Some(first)
        }
        (x, None) => x,
        (None, y) => y,
    }
}

/// Tube plus, when `joint_spheres` is set, a sphere at each endpoint.
/// The shape is convex, so the result is a single interval.
#[inline]
pub fn intersect_capsule(ray: &Ray, a: DVec3, b: DVec3, r: f64, joint_spheres: bool) -> Option<Interval> {
    let tube = intersect_ray_tube(ray, a, b, r);
    if !joint_spheres {
        return tube;
    }
    let hit = union(tube, intersect_ray_sphere(ray, a, r));
    union(hit, intersect_ray_sphere(ray, b, r))
}
