#![allow(dead_code)]

use rectilens::scenes::scene;
use rectilens::synthesis::{group_rng, synthesize_default, DistortionGroup};

pub fn groups(n: usize, size: usize) -> Vec<DistortionGroup> {
    (0..n as u64).map(|g| synthesize_default(&scene(g, size), &mut group_rng(11, g)).unwrap()).collect()
}

/// Shift by `d` towards the interior so the result stays in `[0, 1]`.
pub fn perturb(t: f64, d: f64) -> f64 {
    if t + d <= 1.0 {
        t + d
    } else {
        t - d
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
