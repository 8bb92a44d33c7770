//! Browser bindings for the demo page in `www/`.
//!
//! All functions work on small procedural scenes so they stay interactive
//! when compiled to WebAssembly.

use rectilens::losses::{total_loss, GroupState, LossSpec, PairSet};
use rectilens::model::forward_domain_limit;
use rectilens::scenes::scene;
use rectilens::synthesis::{group_rng, synthesize_default};
use rectilens::{distort, rectify, DistortionModel, ImageBuffer, ModelKind, WarpResult};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn model_for(name: &str) -> Result<DistortionModel, JsValue> {
    let kind: ModelKind = name.parse().map_err(js_err)?;
    Ok(DistortionModel::with_default_range(kind))
}

fn rgba(img: &ImageBuffer, mask: Option<&rectilens::Mask>) -> Vec<u8> {
    let ch = img.channels();
    let mut out = Vec::with_capacity(img.pixels() * 4);
    for (p, px) in img.data().chunks_exact(ch).enumerate() {
        let valid = mask.is_none_or(|m| m.bits()[p]);
        for c in 0..3 {
            out.push((255.0 * px[c.min(ch - 1)]).round() as u8);
        }
        out.push(if valid { 255 } else { 64 });
    }
    out
}

/// RGBA bytes of three `size × size` panels side by side: the scene, its
/// distortion at normalized parameter `t`, and the rectification of that
/// distortion with normalized parameter `t_fix`.
#[wasm_bindgen]
pub fn distortion_preview(seed: u32, model: &str, t: f64, t_fix: f64, size: u32) -> Result<Vec<u8>, JsValue> {
    let size = size as usize;
    let m = model_for(model)?;
    let normal = scene(u64::from(seed), size);
    let k = m.denormalize(t).map_err(js_err)?;
    let k_fix = m.denormalize(t_fix).map_err(js_err)?;
    let distorted = distort(&WarpResult::full(normal.clone()), &m, k).map_err(js_err)?;
    let fixed = rectify(&distorted, &m, k_fix).map_err(js_err)?;
    let panels = [rgba(&normal, None), rgba(&distorted.image, Some(&distorted.mask)), rgba(&fixed.image, Some(&fixed.mask))];
    let mut out = Vec::with_capacity(3 * size * size * 4);
    for row in 0..size {
        for panel in &panels {
            out.extend_from_slice(&panel[row * size * 4..(row + 1) * size * 4]);
        }
    }
    Ok(out)
}

/// `samples` normal radii for distorted radii evenly spaced on `[0, 1]`;
/// NaN past the model's singularity.
#[wasm_bindgen]
pub fn radial_curve(model: &str, t: f64, samples: u32) -> Result<Vec<f64>, JsValue> {
    let m = model_for(model)?;
    let k = m.denormalize(t).map_err(js_err)?;
    let n = samples.max(2) as usize;
    (0..n)
        .map(|i| {
            let r = i as f64 / (n - 1) as f64;
            m.radial_forward(r, k).map(|v| v.unwrap_or(f64::NAN)).map_err(js_err)
        })
        .collect()
}

/// Largest distorted radius with a finite normal radius, or +∞.
#[wasm_bindgen]
pub fn domain_limit(model: &str, t: f64) -> Result<f64, JsValue> {
    let m = model_for(model)?;
    let k = m.denormalize(t).map_err(js_err)?;
    Ok(forward_domain_limit(m.kind, k).unwrap_or(f64::INFINITY))
}

/// Total self-supervised loss (intra + inter over DM/ED) of a synthesized
/// group as one slot's normalized parameter sweeps `[0, 1]`, every other
/// parameter held at its true value.
///
/// The last element is the true normalized value of the swept slot.
#[wasm_bindgen]
pub fn loss_landscape(seed: u32, model: &str, slot: u8, samples: u32, size: u32) -> Result<Vec<f64>, JsValue> {
    let m = model_for(model)?;
    if !(slot == 1 || slot == 2) {
        return Err(js_err("slot must be 1 or 2"));
    }
    let normal = scene(u64::from(seed), size as usize);
    let group = synthesize_default(&normal, &mut group_rng(u64::from(seed), 0)).map_err(js_err)?;
    let inputs = group.inputs();
    let truth = group.true_params();
    let (i, j) = (m.kind.index(), usize::from(slot - 1));
    let spec = LossSpec::intra_inter(PairSet::M4);
    let n = samples.max(2) as usize;
    let mut out = Vec::with_capacity(n + 1);
    for s in 0..n {
        let mut params = truth;
        params[i][j] = m.denormalize(s as f64 / (n - 1) as f64).map_err(js_err)?;
        let state = GroupState::new(&inputs, group.models, params).map_err(js_err)?;
        out.push(total_loss(&state, &spec).map_err(js_err)?.total);
    }
    out.push(m.normalize(truth[i][j]).map_err(js_err)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preview_has_three_panels() {
        let px = distortion_preview(1, "DM", 0.4, 0.4, 33).unwrap();
        assert_eq!(px.len(), 3 * 33 * 33 * 4);
    }

    #[test]
    fn curves_and_limits() {
        let c = radial_curve("FOV", 0.5, 11).unwrap();
        assert_eq!(c.len(), 11);
        assert_eq!(c[0], 0.0);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
        assert!(domain_limit("DM", 0.0).unwrap() > 0.99);
    }

    #[test]
    fn landscape_is_lowest_near_truth() {
        let v = loss_landscape(2, "ED", 1, 21, 65).unwrap();
        let truth = *v.last().unwrap();
        let losses = &v[..21];
        let best = (0..21).min_by(|&a, &b| losses[a].total_cmp(&losses[b])).unwrap() as f64 / 20.0;
        assert!((best - truth).abs() <= 0.1, "best {best} truth {truth}");
    }
}
