//! Distorted-group synthesis from normal images.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::losses::GroupInputs;
use crate::model::{DistortionModel, ModelKind};
use crate::warp::{distort, WarpResult};
use crate::IMAGE_SIZE;

/// Minimum normalized separation between the two slot parameters of a model.
pub const SLOT_SEPARATION: f64 = 0.05;

/// Smallest raw image side accepted by [`prepare_normal`].
pub const MIN_INPUT_SIDE: usize = 32;

/// Independent, schedule-free generator for group `index` of a run.
pub fn group_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Bilinear resize with edge pixel centres aligned.
pub fn resize_bilinear(src: &ImageBuffer, height: usize, width: usize) -> ImageBuffer {
    let sy = if height > 1 { (src.height() - 1) as f64 / (height - 1) as f64 } else { 0.0 };
    let sx = if width > 1 { (src.width() - 1) as f64 / (width - 1) as f64 } else { 0.0 };
    let ch = src.channels();
    let mut data = Vec::with_capacity(height * width * ch);
    for v in 0..height {
        let py = v as f64 * sy;
        let y0 = (py.floor() as usize).min(src.height().saturating_sub(2));
        let y1 = (y0 + 1).min(src.height() - 1);
        let fy = py - y0 as f64;
        for u in 0..width {
            let px = u as f64 * sx;
            let x0 = (px.floor() as usize).min(src.width().saturating_sub(2));
            let x1 = (x0 + 1).min(src.width() - 1);
            let fx = px - x0 as f64;
            for c in 0..ch {
                let top = src.get(y0, x0, c) * (1.0 - fx) + src.get(y0, x1, c) * fx;
                let bottom = src.get(y1, x0, c) * (1.0 - fx) + src.get(y1, x1, c) * fx;
                data.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
    }
    ImageBuffer::from_raw_unchecked(height, width, ch, data)
}

/// Largest centred square crop.
pub fn center_crop(src: &ImageBuffer) -> ImageBuffer {
    let side = src.height().min(src.width());
    let top = (src.height() - side) / 2;
    let left = (src.width() - side) / 2;
    ImageBuffer::from_fn(side, side, src.channels(), |v, u, c| src.get(top + v, left + u, c))
}

/// Crops the centred square and resizes it to the working size.
pub fn prepare_normal(raw: &ImageBuffer) -> Result<ImageBuffer> {
    prepare_normal_to(raw, IMAGE_SIZE)
}

pub fn prepare_normal_to(raw: &ImageBuffer, size: usize) -> Result<ImageBuffer> {
    if raw.height() < MIN_INPUT_SIDE || raw.width() < MIN_INPUT_SIDE {
        return Err(Error::InvalidImage(format!(
            "{}x{} is below the {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE} minimum",
            raw.height(),
            raw.width()
        )));
    }
    Ok(resize_bilinear(&center_crop(raw), size, size))
}

/// Uniform draw over the model's range.
pub fn sample_params(model: &DistortionModel, rng: &mut impl Rng) -> f64 {
    rng.gen_range(model.range.k_min..=model.range.k_max)
}

/// Two draws whose normalized values differ by at least [`SLOT_SEPARATION`].
pub fn sample_slot_pair(model: &DistortionModel, rng: &mut impl Rng) -> [f64; 2] {
    let first = sample_params(model, rng);
    loop {
        let second = sample_params(model, rng);
        if (second - first).abs() / model.range.width() >= SLOT_SEPARATION {
            return [first, second];
        }
    }
}

/// One synthesized view.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupItem {
    pub model: ModelKind,
    /// 1 or 2.
    pub slot: u8,
    pub k_true: f64,
    pub image: WarpResult,
}

/// A normal image and its two distorted views per model.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionGroup {
    pub normal: ImageBuffer,
    pub models: [DistortionModel; 3],
    pub items: Vec<GroupItem>,
}

impl DistortionGroup {
    pub fn item(&self, model: ModelKind, slot: u8) -> Option<&GroupItem> {
        self.items.iter().find(|it| it.model == model && it.slot == slot)
    }

    /// The unlabeled inputs the estimator sees.
    pub fn inputs(&self) -> GroupInputs {
        let mut inputs = GroupInputs::new();
        for kind in ModelKind::ALL {
            if let (Some(a), Some(b)) = (self.item(kind, 1), self.item(kind, 2)) {
                inputs = inputs.with(kind, a.image.clone(), b.image.clone());
            }
        }
        inputs
    }

    /// Ground-truth raw parameters indexed by model then slot.
    pub fn true_params(&self) -> [[f64; 2]; 3] {
        let mut out = [[f64::NAN; 2]; 3];
        for it in &self.items {
            out[it.model.index()][usize::from(it.slot - 1)] = it.k_true;
        }
        out
    }

    pub fn true_params_norm(&self) -> [[f64; 2]; 3] {
        let mut out = self.true_params();
        for (i, row) in out.iter_mut().enumerate() {
            for k in row.iter_mut() {
                *k = self.models[i].normalize(*k).unwrap_or(f64::NAN);
            }
        }
        out
    }
}

/// Two parameter draws and two renders per model, models in FOV, DM, ED order.
pub fn synthesize_group(normal: &ImageBuffer, models: [DistortionModel; 3], rng: &mut impl Rng) -> Result<DistortionGroup> {
    if !normal.is_square() {
        return Err(Error::NotSquare { height: normal.height(), width: normal.width() });
    }
    let source = WarpResult::full(normal.clone());
    let mut items = Vec::with_capacity(6);
    for model in &models {
        let ks = sample_slot_pair(model, rng);
        for (j, &k) in ks.iter().enumerate() {
            items.push(GroupItem { model: model.kind, slot: j as u8 + 1, k_true: k, image: distort(&source, model, k)? });
        }
    }
    Ok(DistortionGroup { normal: normal.clone(), models, items })
}

/// [`synthesize_group`] with the default parameter ranges.
pub fn synthesize_default(normal: &ImageBuffer, rng: &mut impl Rng) -> Result<DistortionGroup> {
    synthesize_group(normal, ModelKind::ALL.map(DistortionModel::with_default_range), rng)
}
