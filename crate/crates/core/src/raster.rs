//! Grayscale rasters with intensities in `[0, 1]`.
//!
//! Pixel `(x, y)` has its center at the continuous coordinate `(x, y)`, so
//! sampling at integer coordinates returns the stored value exactly. The
//! valid sampling domain is `[0, width - 1] x [0, height - 1]`; samples
//! outside it clamp to the nearest edge pixel.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidView(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidView(format!(
                "expected {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel center.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// True when `(x, y)` lies in the bilinear sampling domain.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Bilinear sample with edge clamping.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (xc.floor() as usize).min(self.width - 2);
        let y0 = (yc.floor() as usize).min(self.height - 2);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = row0 + self.width;
        let a = self.data[row0 + x0];
        let b = self.data[row0 + x0 + 1];
        let c = self.data[row1 + x0];
        let d = self.data[row1 + x0 + 1];
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        top + (bottom - top) * fy
    }
}
