//! Procedural colored-box rooms, ray cast to exact RGB-D frames.
//!
//! Used as ground truth by the examples and the end-to-end tests: the room
//! is a closed axis-aligned box with smoothly shaded walls and a few solid
//! boxes standing on the floor. World axes follow the camera convention of
//! the base view (+y down, +z forward).

use nalgebra::Vector3;

use crate::backends::DepthMap;
use crate::error::Result;
use crate::geometry::Camera;
use crate::scene::{ImageBuffer, Rgb};

#[derive(Clone, Debug, PartialEq)]
pub struct ColoredBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub color: Rgb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxRoom {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub boxes: Vec<ColoredBox>,
}

fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Entry and exit distances of a ray through an axis-aligned box.
fn slab(o: &Vector3<f64>, d: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<(f64, f64, usize)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < min[a] || o[a] > max[a] {
                return None;
            }
            continue;
        }
        let (mut lo, mut hi) = ((min[a] - o[a]) / d[a], (max[a] - o[a]) / d[a]);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        if lo > t0 {
            t0 = lo;
            axis = a;
        }
        t1 = t1.min(hi);
    }
    (t0 <= t1).then_some((t0, t1, axis))
}

impl BoxRoom {
    /// A 6 x 3 x 7 m room around the origin with four boxes placed so that
    /// every yaw within ±40° sees at least one of them. `seed` jitters the
    /// box placement and colors.
    pub fn procedural(seed: u64) -> Self {
        let mut s = seed;
        let mut jitter = |scale: f64| (splitmix(&mut s) - 0.5) * scale;
        let floor = 1.5;
        let mut boxes = Vec::new();
        let layout = [
            ((-1.6, 2.6), (1.0, 0.8, 1.0), [0.85, 0.35, 0.25]),
            ((0.9, 2.2), (1.0, 0.6, 0.9), [0.25, 0.55, 0.85]),
            ((2.3, 1.3), (0.7, 1.0, 0.8), [0.3, 0.75, 0.35]),
            ((-2.3, 1.2), (0.7, 0.7, 0.9), [0.85, 0.75, 0.3]),
        ];
        for ((cx, cz), (w, h, d), color) in layout {
            let cx = cx + jitter(0.3);
            let cz = cz + jitter(0.3);
            let color = color.map(|c: f64| (c + jitter(0.1)).clamp(0.05, 0.95));
            boxes.push(ColoredBox {
                min: Vector3::new(cx - w / 2.0, floor - h, cz - d / 2.0),
                max: Vector3::new(cx + w / 2.0, floor, cz + d / 2.0),
                color,
            });
        }
        Self {
            min: Vector3::new(-3.0, -1.5, -3.0),
            max: Vector3::new(3.0, floor, 4.0),
            boxes,
        }
    }

    fn wall_color(&self, p: &Vector3<f64>, axis: usize, positive: bool) -> Rgb {
        let base: Rgb = match (axis, positive) {
            (0, false) => [0.75, 0.62, 0.50],
            (0, true) => [0.55, 0.65, 0.72],
            (1, false) => [0.88, 0.88, 0.85],
            (1, true) => [0.45, 0.38, 0.32],
            (2, false) => [0.60, 0.70, 0.60],
            _ => [0.70, 0.60, 0.68],
        };
        // slow shading ramps along the wall
        let (a, b) = match axis {
            0 => (p.z, p.y),
            1 => (p.x, p.z),
            _ => (p.x, p.y),
        };
        let shade = 0.08 * (0.6 * a).sin() + 0.06 * (0.9 * b).cos();
        base.map(|c| (c + shade).clamp(0.0, 1.0))
    }

    /// Color and camera-frame depth of the surface hit through each pixel.
    pub fn render(&self, cam: &Camera) -> Result<(ImageBuffer, DepthMap)> {
        let (w, h) = cam.dims();
        let o = cam.pose.translation;
        let mut colors = Vec::with_capacity(w * h);
        let mut depths = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                // camera-frame z of the ray parameter equals t
                let d = cam.pose.rotation * cam.unproject(x as f64, y as f64, 1.0);
                let mut best = f64::INFINITY;
                let mut color = [0.0; 3];
                for b in &self.boxes {
                    if let Some((t0, _, axis)) = slab(&o, &d, &b.min, &b.max) {
                        if t0 > 1e-9 && t0 < best {
                            best = t0;
                            let light = [0.85, 1.0, 0.92][axis];
                            color = b.color.map(|c| c * light);
                        }
                    }
                }
                if let Some((_, t1, _)) = slab(&o, &d, &self.min, &self.max) {
                    if t1 < best {
                        let p = o + d * t1;
                        let (axis, positive) = (0..3)
                            .map(|a| {
                                let to_max = (p[a] - self.max[a]).abs();
                                let to_min = (p[a] - self.min[a]).abs();
                                (a, to_max < to_min, to_max.min(to_min))
                            })
                            .min_by(|l, r| l.2.total_cmp(&r.2))
                            .map(|(a, pos, _)| (a, pos))
                            .unwrap_or((2, true));
                        best = t1;
                        color = self.wall_color(&p, axis, positive);
                    }
                }
                colors.push(color);
                depths.push(best.is_finite().then_some(best));
            }
        }
        let image = ImageBuffer::from_fn(w, h, |x, y| colors[y * w + x]);
        Ok((image, DepthMap::new(w, h, depths)?))
    }
}
