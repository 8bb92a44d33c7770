//! Procedural stand-ins for natural photographs.
//!
//! A scene is a sky/ground backdrop with a soft horizon, band-limited
//! fractal texture with a falling power spectrum, and a handful of
//! soft-edged rectangles, discs and straight lines. Everything is a
//! deterministic function of the seed.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::image::{pixel_to_norm, ImageBuffer};

/// Edge softness of shapes in normalized units per pixel of a 257 image.
const EDGE: f64 = 2.5 / 128.0;

#[derive(Debug, Clone, Copy)]
struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
    tint: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Rect { cx: f64, cy: f64, hw: f64, hh: f64, angle: f64 },
    Disc { cx: f64, cy: f64, r: f64 },
    Line { nx: f64, ny: f64, offset: f64, half_width: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    shape: Shape,
    color: [f64; 3],
    shade: [f64; 2],
}

fn smoothstep(edge: f64, x: f64) -> f64 {
    // signed distance x (negative inside) to coverage
    let t = (0.5 - x / edge).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl Shape {
    /// Coverage in `[0, 1]` at normalized `(x, y)`.
    fn coverage(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Rect { cx, cy, hw, hh, angle } => {
                let (s, c) = angle.sin_cos();
                let dx = (x - cx) * c + (y - cy) * s;
                let dy = -(x - cx) * s + (y - cy) * c;
                let d = (dx.abs() - hw).max(dy.abs() - hh);
                smoothstep(EDGE, d)
            }
            Shape::Disc { cx, cy, r } => smoothstep(EDGE, (x - cx).hypot(y - cy) - r),
            Shape::Line { nx, ny, offset, half_width } => smoothstep(EDGE, (x * nx + y * ny - offset).abs() - half_width),
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let base: f64 = rng.gen_range(0.15..0.85);
    [
        (base + rng.gen_range(-0.2..0.2)).clamp(0.05, 0.95),
        (base + rng.gen_range(-0.2..0.2)).clamp(0.05, 0.95),
        (base + rng.gen_range(-0.2..0.2)).clamp(0.05, 0.95),
    ]
}

/// A `size × size` RGB scene.
pub fn scene(seed: u64, size: usize) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce9_e000_0000_0000);
    let sky = random_color(&mut rng);
    let ground = random_color(&mut rng);
    let horizon: f64 = rng.gen_range(-0.4..0.4);
    let tilt: f64 = rng.gen_range(-0.25..0.25);

    let mut waves = Vec::new();
    for octave in 0..5 {
        let freq = 1.5 * 2f64.powi(octave);
        for _ in 0..6 {
            let theta = rng.gen_range(0.0..TAU);
            let f = freq * rng.gen_range(0.8..1.25);
            let grey = rng.gen_range(0.7..1.0);
            waves.push(Wave {
                fx: f * theta.cos() * std::f64::consts::PI,
                fy: f * theta.sin() * std::f64::consts::PI,
                phase: rng.gen_range(0.0..TAU),
                amp: 0.09 * f.powf(-0.9),
                tint: [grey + rng.gen_range(0.0..0.3), grey, grey + rng.gen_range(0.0..0.3)],
            });
        }
    }

    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(4..8) {
        let shape = if rng.gen_bool(0.55) {
            Shape::Rect {
                cx: rng.gen_range(-0.8..0.8),
                cy: rng.gen_range(-0.8..0.8),
                hw: rng.gen_range(0.08..0.45),
                hh: rng.gen_range(0.08..0.45),
                angle: rng.gen_range(-0.3..0.3),
            }
        } else {
            Shape::Disc { cx: rng.gen_range(-0.8..0.8), cy: rng.gen_range(-0.8..0.8), r: rng.gen_range(0.06..0.3) }
        };
        layers.push(Layer { shape, color: random_color(&mut rng), shade: [rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15)] });
    }
    for _ in 0..rng.gen_range(2..5) {
        let theta: f64 = rng.gen_range(0.0..TAU);
        let dark = rng.gen_range(0.05..0.3);
        layers.push(Layer {
            shape: Shape::Line {
                nx: theta.cos(),
                ny: theta.sin(),
                offset: rng.gen_range(-0.7..0.7),
                half_width: rng.gen_range(0.012..0.03),
            },
            color: [dark; 3],
            shade: [0.0, 0.0],
        });
    }

    ImageBuffer::from_fn(size, size, 3, |v, u, c| {
        let x = pixel_to_norm(u, size);
        let y = pixel_to_norm(v, size);
        let below = 1.0 - smoothstep(0.08, y - horizon - tilt * x);
        let mut value = sky[c] * (1.0 - below) + ground[c] * below + 0.1 * y * (1.0 - below);
        for layer in &layers {
            let cov = layer.shape.coverage(x, y);
            if cov > 0.0 {
                let shaded = layer.color[c] + layer.shade[0] * x + layer.shade[1] * y;
                value = value * (1.0 - cov) + shaded * cov;
            }
        }
        let texture: f64 = waves.iter().map(|w| w.amp * w.tint[c] * (w.fx * x + w.fy * y + w.phase).sin()).sum();
        0.04 + 0.92 * (value + texture).clamp(0.0, 1.0)
    })
}

/// The fixed evaluation set: `count` scenes with seeds `0..count`.
pub fn desk_set(count: usize, size: usize) -> Vec<ImageBuffer> {
    (0..count as u64).map(|s| scene(s, size)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let a = scene(3, 65);
        assert_eq!(a, scene(3, 65));
        assert_ne!(a, scene(4, 65));
        assert_eq!((a.height(), a.width(), a.channels()), (65, 65, 3));
        let mean = a.data().iter().sum::<f64>() / a.data().len() as f64;
        let var = a.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / a.data().len() as f64;
        assert!(var > 1e-3, "scene is too flat: {var}");
    }
}
