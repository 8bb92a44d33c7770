//! Floating-point image buffers, validity masks and the normalized frame.

use crate::error::{Error, Result};

/// Row-major `height × width × channels` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!("empty dimensions {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels (expected 1 or 3)")));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("filled image must be valid")
    }

    /// Builds an image from a per-pixel function of `(row, col)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for v in 0..height {
            for u in 0..width {
                for c in 0..channels {
                    data.push(f(v, u, c).clamp(0.0, 1.0));
                }
            }
        }
        Self { height, width, channels, data }
    }

    /// Skips validation; callers guarantee values already lie in `[0, 1]`.
    pub(crate) fn from_raw_unchecked(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    /// Image with every value replaced by `f(value)`, clamped to `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageBuffer {
        let data = self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect();
        Self::from_raw_unchecked(self.height, self.width, self.channels, data)
    }

    /// Unweighted channel mean, one value per pixel.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Self::from_raw_unchecked(self.height, self.width, 1, data)
    }
}

/// Per-pixel validity, `true` = defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask length {} vs {height}x{width}",
                bits.len()
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![true; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn matches(&self, image: &ImageBuffer) -> bool {
        self.height == image.height() && self.width == image.width()
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch(format!(
                "masks {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        Ok(Mask { height: self.height, width: self.width, bits })
    }

    /// Shrinks the valid region by `radius` pixels (square structuring element).
    ///
    /// Pixels outside the image count as invalid.
    pub fn erode(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (h, w) = (self.height, self.width);
        // Separable min filter: rows, then columns.
        let mut horiz = vec![false; h * w];
        for v in 0..h {
            let row = &self.bits[v * w..(v + 1) * w];
            let prefix = invalid_prefix(row.iter().copied());
            for u in 0..w {
                let lo = u as isize - radius as isize;
                let hi = u + radius;
                horiz[v * w + u] = lo >= 0 && hi < w && prefix[hi + 1] - prefix[lo as usize] == 0;
            }
        }
        let mut bits = vec![false; h * w];
        for u in 0..w {
            let prefix = invalid_prefix((0..h).map(|v| horiz[v * w + u]));
            for v in 0..h {
                let lo = v as isize - radius as isize;
                let hi = v + radius;
                bits[v * w + u] = lo >= 0 && hi < h && prefix[hi + 1] - prefix[lo as usize] == 0;
            }
        }
        Mask { height: h, width: w, bits }
    }
}

fn invalid_prefix(values: impl Iterator<Item = bool>) -> Vec<usize> {
    let mut out = vec![0];
    let mut acc = 0;
    for b in values {
        acc += usize::from(!b);
        out.push(acc);
    }
    out
}

/// Pixel index → normalized coordinate in `[-1, 1]` (edge pixel centres at ±1).
#[inline]
pub fn pixel_to_norm(index: usize, size: usize) -> f64 {
    if size == 1 {
        return 0.0;
    }
    2.0 * index as f64 / (size - 1) as f64 - 1.0
}

/// Normalized coordinate → fractional pixel index.
#[inline]
pub fn norm_to_pixel(coord: f64, size: usize) -> f64 {
    (coord + 1.0) * 0.5 * (size - 1) as f64
}
