//! Inverse-mapping warps between distorted and normal images.
//!
//! Every output pixel computes where it comes from in the source image and
//! takes a bilinear blend of the four surrounding source pixels. Samples
//! whose footprint leaves the source frame, touches an invalid source pixel,
//! or lies past a model singularity are zero with mask 0.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{norm_to_pixel, pixel_to_norm, ImageBuffer, Mask};
use crate::model::{backward_radius, forward_radius, DistortionModel, ModelKind};

/// Warped image plus its validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub image: ImageBuffer,
    pub mask: Mask,
}

impl WarpResult {
    /// Wraps a fully defined image.
    pub fn full(image: ImageBuffer) -> Self {
        let mask = Mask::full(image.height(), image.width());
        Self { image, mask }
    }

    pub fn valid_fraction(&self) -> f64 {
        self.mask.fraction()
    }
}

/// Which way a radial warp renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Distorted → normal; output radius `r_u` samples the source at `backward(r_u)`.
    Rectify,
    /// Normal → distorted; output radius `r_d` samples the source at `forward(r_d)`.
    Distort,
}

const EDGE_EPS: f64 = 1e-9;

/// Bilinear lookup at fractional pixel position `(px, py)`.
///
/// Writes the blended value into `out` and returns whether the sample is valid.
#[inline]
fn sample_into(src: &ImageBuffer, src_mask: Option<&Mask>, px: f64, py: f64, out: &mut [f64]) -> bool {
    let (w, h) = (src.width(), src.height());
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    if !(px >= -EDGE_EPS && py >= -EDGE_EPS && px <= max_x + EDGE_EPS && py <= max_y + EDGE_EPS) {
        return false;
    }
    let px = px.clamp(0.0, max_x);
    let py = py.clamp(0.0, max_y);
    let x0 = (px.floor() as usize).min(w.saturating_sub(2));
    let y0 = (py.floor() as usize).min(h.saturating_sub(2));
    let fx = px - x0 as f64;
    let fy = py - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let corners = [
        (y0, x0, (1.0 - fx) * (1.0 - fy)),
        (y0, x1, fx * (1.0 - fy)),
        (y1, x0, (1.0 - fx) * fy),
        (y1, x1, fx * fy),
    ];
    if let Some(mask) = src_mask {
        if corners.iter().any(|&(y, x, wt)| wt > 0.0 && !mask.get(y, x)) {
            return false;
        }
    }
    let ch = src.channels();
    let data = src.data();
    for (c, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &(y, x, wt) in &corners {
            acc += wt * data[(y * w + x) * ch + c];
        }
        *o = acc.clamp(0.0, 1.0);
    }
    true
}

/// Samples `src` at per-output-pixel normalized coordinates.
///
/// `coords` is row-major over an `out_height × out_width` grid; `None` marks
/// an explicitly invalid coordinate.
pub fn bilinear_sample(
    src: &ImageBuffer,
    src_mask: Option<&Mask>,
    coords: &[Option<[f64; 2]>],
    out_height: usize,
    out_width: usize,
) -> Result<WarpResult> {
    if coords.len() != out_height * out_width {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates for a {out_height}x{out_width} output",
            coords.len()
        )));
    }
    if let Some(m) = src_mask {
        if !m.matches(src) {
            return Err(Error::ShapeMismatch("source mask does not match source image".into()));
        }
    }
    let ch = src.channels();
    let mut data = vec![0.0; coords.len() * ch];
    let mut bits = vec![false; coords.len()];
    for (i, coord) in coords.iter().enumerate() {
        let Some([x, y]) = *coord else { continue };
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let px = norm_to_pixel(x, src.width());
        let py = norm_to_pixel(y, src.height());
        let out = &mut data[i * ch..(i + 1) * ch];
        if sample_into(src, src_mask, px, py, out) {
            bits[i] = true;
        } else {
            out.fill(0.0);
        }
    }
    Ok(WarpResult {
        image: ImageBuffer::from_raw_unchecked(out_height, out_width, ch, data),
        mask: Mask::new(out_height, out_width, bits)?,
    })
}

/// Source radius for an output radius, `None` past a singularity.
#[inline]
fn source_radius(kind: ModelKind, direction: Direction, r: f64, k: f64) -> Option<f64> {
    match direction {
        Direction::Rectify => backward_radius(kind, r, k),
        Direction::Distort => forward_radius(kind, r, k),
    }
}

fn render_row(
    src: &ImageBuffer,
    src_mask: Option<&Mask>,
    kind: ModelKind,
    k: f64,
    direction: Direction,
    row: usize,
    out: &mut [f64],
    valid: &mut [bool],
) {
    let size = src.width();
    let ch = src.channels();
    let y = pixel_to_norm(row, size);
    for col in 0..size {
        let x = pixel_to_norm(col, size);
        let r = x.hypot(y);
        let px_out = &mut out[col * ch..(col + 1) * ch];
        let scale = if r == 0.0 {
            Some(0.0)
        } else {
            source_radius(kind, direction, r, k).map(|s| s / r)
        };
        let ok = scale.is_some_and(|s| {
            let px = norm_to_pixel(x * s, size);
            let py = norm_to_pixel(y * s, size);
            sample_into(src, src_mask, px, py, px_out)
        });
        if !ok {
            px_out.fill(0.0);
        }
        valid[col] = ok;
    }
}

fn radial_warp_unchecked(
    src: &ImageBuffer,
    src_mask: Option<&Mask>,
    kind: ModelKind,
    k: f64,
    direction: Direction,
) -> WarpResult {
    let size = src.width();
    let ch = src.channels();
    let mut data = vec![0.0; size * size * ch];
    let mut bits = vec![false; size * size];

    #[cfg(feature = "parallel")]
    data.par_chunks_mut(size * ch)
        .zip(bits.par_chunks_mut(size))
        .enumerate()
        .for_each(|(row, (out, valid))| render_row(src, src_mask, kind, k, direction, row, out, valid));

    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(size * ch)
        .zip(bits.chunks_mut(size))
        .enumerate()
        .for_each(|(row, (out, valid))| render_row(src, src_mask, kind, k, direction, row, out, valid));

    WarpResult {
        image: ImageBuffer::from_raw_unchecked(size, size, ch, data),
        mask: Mask::new(size, size, bits).expect("mask shape"),
    }
}

fn check_inputs(src: &ImageBuffer, src_mask: Option<&Mask>, model: &DistortionModel, k: f64) -> Result<()> {
    if !src.is_square() {
        return Err(Error::NotSquare { height: src.height(), width: src.width() });
    }
    if let Some(m) = src_mask {
        if !m.matches(src) {
            return Err(Error::ShapeMismatch("source mask does not match source image".into()));
        }
    }
    model.normalize(k)?;
    Ok(())
}

/// Renders a radial warp of a square image.
pub fn radial_warp(
    src: &ImageBuffer,
    src_mask: Option<&Mask>,
    model: &DistortionModel,
    k: f64,
    direction: Direction,
) -> Result<WarpResult> {
    check_inputs(src, src_mask, model, k)?;
    Ok(radial_warp_unchecked(src, src_mask, model.kind, k, direction))
}

/// Distorted → normal.
pub fn rectify(distorted: &WarpResult, model: &DistortionModel, k: f64) -> Result<WarpResult> {
    radial_warp(&distorted.image, Some(&distorted.mask), model, k, Direction::Rectify)
}

/// Normal → distorted.
pub fn distort(normal: &WarpResult, model: &DistortionModel, k: f64) -> Result<WarpResult> {
    radial_warp(&normal.image, Some(&normal.mask), model, k, Direction::Distort)
}

/// Central finite difference of a warp with respect to its parameter.
#[derive(Debug, Clone)]
pub struct Sensitivity {
    /// Same layout as the image data: one value per pixel and channel.
    pub derivative: Vec<f64>,
    /// Pixels valid at both evaluation points.
    pub mask: Mask,
    /// Step had to be clipped to a one-sided difference at a range boundary.
    pub one_sided: bool,
    /// Step actually used on each side (`0` for a clipped side).
    pub step: (f64, f64),
}

/// `d(warp output)/dk` by central differences, masked to pixels valid at both ends.
pub fn param_sensitivity(
    src: &WarpResult,
    model: &DistortionModel,
    k: f64,
    direction: Direction,
    h: f64,
) -> Result<Sensitivity> {
    check_inputs(&src.image, Some(&src.mask), model, k)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
    }
    let hi = if k + h <= model.range.k_max { h } else { 0.0 };
    let lo = if k - h >= model.range.k_min { h } else { 0.0 };
    if hi == 0.0 && lo == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "step {h} exceeds the {} range on both sides of k={k}",
            model.kind
        )));
    }
    let plus = radial_warp_unchecked(&src.image, Some(&src.mask), model.kind, k + hi, direction);
    let minus = radial_warp_unchecked(&src.image, Some(&src.mask), model.kind, k - lo, direction);
    let mask = plus.mask.and(&minus.mask)?;
    let ch = src.image.channels();
    let denom = hi + lo;
    let derivative = plus
        .image
        .data()
        .iter()
        .zip(minus.image.data())
        .enumerate()
        .map(|(i, (&a, &b))| if mask.bits()[i / ch] { (a - b) / denom } else { 0.0 })
        .collect();
    Ok(Sensitivity { derivative, mask, one_sided: hi == 0.0 || lo == 0.0, step: (lo, hi) })
}
