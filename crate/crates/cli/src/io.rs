//! PNG and JSON file plumbing.

use std::fs;
use std::path::Path;

use image::{GrayImage, RgbImage};
use rectilens::{ImageBuffer, Mask};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn load_png(path: &Path) -> CliResult<ImageBuffer> {
    let img = image::open(path).map_err(|source| CliError::Image { path: path.into(), source })?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    Ok(ImageBuffer::new(h as usize, w as usize, 3, data)?)
}

fn quantize(v: f64) -> u8 {
    (255.0 * v).round().clamp(0.0, 255.0) as u8
}

pub fn save_png(path: &Path, img: &ImageBuffer) -> CliResult<()> {
    let rgb = img.channels() == 3;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = if rgb {
        RgbImage::from_raw(w, h, img.data().iter().map(|&v| quantize(v)).collect())
            .expect("buffer matches dimensions")
            .save(path)
    } else {
        GrayImage::from_raw(w, h, img.data().iter().map(|&v| quantize(v)).collect())
            .expect("buffer matches dimensions")
            .save(path)
    };
    result.map_err(|source| CliError::Image { path: path.into(), source })
}

/// Masks are stored as binary {0, 255} grayscale PNGs.
pub fn save_mask(path: &Path, mask: &Mask) -> CliResult<()> {
    let raw = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer matches dimensions")
        .save(path)
        .map_err(|source| CliError::Image { path: path.into(), source })
}

pub fn load_mask(path: &Path) -> CliResult<Mask> {
    let img = image::open(path).map_err(|source| CliError::Image { path: path.into(), source })?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Mask::new(h as usize, w as usize, img.into_raw().into_iter().map(|v| v >= 128).collect())?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(CliError::json(path))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}
