//! Canonical cell images: affine maps from image triangles, bilinear
//! extraction, mask-normalized Gaussian smoothing and cell gradients.
//!
//! The canonical triangle is the lower-left half of an `S x S` raster with
//! corners `C0 = (0, 0)`, `C1 = (S - 1, 0)` and `C2 = (0, S - 1)`. Face vertex
//! `j` always maps to corner `Cj`.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::geom::{signed_area, ImagePatch, MIN_PATCH_AREA};
use crate::raster::GrayImage;

pub const DEFAULT_CELL_SIZE: usize = 128;
pub const MIN_CELL_SIZE: usize = 8;

/// Shared pixel mask of the canonical triangle for one cell size.
#[derive(Debug, PartialEq)]
pub struct CellLayout {
    size: usize,
    mask: Vec<bool>,
    pixels: Vec<usize>,
}

impl CellLayout {
    pub fn new(size: usize) -> Result<Arc<Self>> {
        if size < MIN_CELL_SIZE {
            return Err(Error::InvalidConfig(format!(
                "cell size must be at least {MIN_CELL_SIZE}, got {size}"
            )));
        }
        let mut mask = vec![false; size * size];
        let mut pixels = Vec::with_capacity(size * (size + 1) / 2);
        for y in 0..size {
            for x in 0..size - y {
                mask[y * size + x] = true;
                pixels.push(y * size + x);
            }
        }
        Ok(Arc::new(Self { size, mask, pixels }))
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Raster indices of masked-in pixels, row-major.
    #[inline]
    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    #[inline]
    pub fn is_inside(&self, x: usize, y: usize) -> bool {
        x < self.size && y < self.size && x + y < self.size
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.size, index / self.size)
    }

    pub fn corners(&self) -> [Vector2<f64>; 3] {
        let s = (self.size - 1) as f64;
        [Vector2::new(0.0, 0.0), Vector2::new(s, 0.0), Vector2::new(0.0, s)]
    }

    /// Barycentric weights of a cell coordinate with respect to `C0, C1, C2`.
    #[inline]
    pub fn barycentric(&self, x: f64, y: f64) -> [f64; 3] {
        let s = (self.size - 1) as f64;
        let l1 = x / s;
        let l2 = y / s;
        [1.0 - l1 - l2, l1, l2]
    }

    fn check_same(&self, other: &CellLayout) -> Result<()> {
        if self.size != other.size {
            return Err(Error::MaskMismatch {
                expected: self.size,
                found: other.size,
            });
        }
        Ok(())
    }
}

/// Canonical corners and the shared mask for cell size `size`.
pub fn canonical_triangle(size: usize) -> Result<([Vector2<f64>; 3], Arc<CellLayout>)> {
    let layout = CellLayout::new(size)?;
    Ok((layout.corners(), layout))
}

/// One face's texture from one view, resampled onto the canonical raster.
///
/// Masked-out pixels are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CellImage {
    layout: Arc<CellLayout>,
    data: Vec<f64>,
    out_of_image: usize,
}

impl CellImage {
    pub fn zeros(layout: Arc<CellLayout>) -> Self {
        let n = layout.size * layout.size;
        Self {
            layout,
            data: vec![0.0; n],
            out_of_image: 0,
        }
    }

    /// Builds a cell from `f(x, y)` evaluated at masked-in pixels.
    pub fn from_fn(layout: Arc<CellLayout>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut cell = Self::zeros(layout);
        let size = cell.layout.size;
        for &i in cell.layout.pixels.iter() {
            cell.data[i] = f(i % size, i / size);
        }
        cell
    }

    /// Builds a cell from values listed in masked-pixel order.
    pub fn from_masked(layout: Arc<CellLayout>, values: &[f64]) -> Self {
        assert_eq!(values.len(), layout.pixels.len(), "masked value count");
        let mut cell = Self::zeros(layout);
        for (&i, &v) in cell.layout.pixels.iter().zip(values) {
            cell.data[i] = v;
        }
        cell
    }

    #[inline]
    pub fn layout(&self) -> &Arc<CellLayout> {
        &self.layout
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.layout.size
    }

    /// Full `S x S` raster, row-major.
    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.layout.size + x]
    }

    /// Number of masked-in samples that fell outside the source image.
    #[inline]
    pub fn out_of_image(&self) -> usize {
        self.out_of_image
    }

    /// Masked-in values in row-major mask order.
    pub fn masked_values(&self) -> Vec<f64> {
        self.layout.pixels.iter().map(|&i| self.data[i]).collect()
    }

    pub fn same_layout(&self, other: &CellImage) -> Result<()> {
        self.layout.check_same(&other.layout)
    }

    /// Root-mean-square of `self - other` over masked-in pixels.
    pub fn rms_difference(&self, other: &CellImage) -> Result<f64> {
        self.same_layout(other)?;
        let sum: f64 = self
            .layout
            .pixels
            .iter()
            .map(|&i| (self.data[i] - other.data[i]).powi(2))
            .sum();
        Ok((sum / self.layout.pixels.len() as f64).sqrt())
    }

    pub fn masked_mean(&self) -> f64 {
        let sum: f64 = self.layout.pixels.iter().map(|&i| self.data[i]).sum();
        sum / self.layout.pixels.len() as f64
    }
}

/// A 2x3 affine map from homogeneous image pixels to cell pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap(pub Matrix2x3<f64>);

impl AffineMap {
    pub const MIN_DET: f64 = 1e-9;

    /// Solves the map sending each `src[j]` to `dst[j]`.
    pub fn from_correspondences(src: &[Vector2<f64>; 3], dst: &[Vector2<f64>; 3]) -> Result<Self> {
        let area = signed_area(src);
        if !(area.abs() >= MIN_PATCH_AREA * 1e-6) {
            return Err(Error::DegenerateProjection { area });
        }
        let s = Matrix3::new(
            src[0].x, src[1].x, src[2].x, //
            src[0].y, src[1].y, src[2].y, //
            1.0, 1.0, 1.0,
        );
        let d = Matrix2x3::new(dst[0].x, dst[1].x, dst[2].x, dst[0].y, dst[1].y, dst[2].y);
        let s_inv = s.try_inverse().ok_or(Error::DegenerateProjection { area })?;
        let map = AffineMap(d * s_inv);
        if !(map.linear().determinant().abs() > Self::MIN_DET) {
            return Err(Error::DegenerateProjection { area });
        }
        Ok(map)
    }

    #[inline]
    pub fn linear(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    #[inline]
    pub fn translation(&self) -> Vector2<f64> {
        self.0.column(2).into_owned()
    }

    #[inline]
    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.linear() * p + self.translation()
    }

    pub fn inverse(&self) -> Result<Self> {
        let lin = self.linear();
        let det = lin.determinant();
        if !(det.abs() > Self::MIN_DET) {
            return Err(Error::DegenerateProjection { area: det });
        }
        let inv = lin.try_inverse().ok_or(Error::DegenerateProjection { area: det })?;
        let t = -(inv * self.translation());
        let mut m = Matrix2x3::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&inv);
        m.set_column(2, &t);
        Ok(AffineMap(m))
    }
}

/// The map taking an image patch onto the canonical triangle.
pub fn affine_map(patch: &ImagePatch, layout: &CellLayout) -> Result<AffineMap> {
    AffineMap::from_correspondences(&patch.corners, &layout.corners())
}

/// Resamples `image` into a cell through `map` with bilinear interpolation.
pub fn extract_cell(image: &GrayImage, map: &AffineMap, layout: &Arc<CellLayout>) -> Result<CellImage> {
    let inv = map.inverse()?;
    let lin = inv.linear();
    let t = inv.translation();
    let size = layout.size;
    let mut cell = CellImage::zeros(Arc::clone(layout));
    let mut outside = 0;
    for y in 0..size {
        // Walk each mask row incrementally along the cell x axis.
        let yf = y as f64;
        let mut u = lin[(0, 1)] * yf + t.x;
        let mut v = lin[(1, 1)] * yf + t.y;
        let row = y * size;
        for x in 0..size - y {
            if !image.contains(u, v) {
                outside += 1;
            }
            cell.data[row + x] = image.sample(u, v);
            u += lin[(0, 0)];
            v += lin[(1, 0)];
        }
    }
    cell.out_of_image = outside;
    Ok(cell)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let denom = 2.0 * sigma * sigma;
    (-radius..=radius)
        .map(|k| (-(k * k) as f64 / denom).exp())
        .collect()
}

/// Gaussian blur restricted to the mask (normalized convolution).
///
/// Masked-out pixels carry zero weight and the kernel is renormalized at
/// every output pixel; `sigma = 0` returns the input unchanged.
pub fn smooth_cell(cell: &CellImage, sigma: f64) -> CellImage {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma_smooth must be non-negative");
    if sigma == 0.0 {
        return cell.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let size = cell.layout.size;
    let n = size as isize;

    // Horizontal pass over weighted intensity and weight. Row y carries mask
    // pixels x < size - y; outputs beyond size - y + radius are never read.
    let mut num_h = vec![0.0; size * size];
    let mut den_h = vec![0.0; size * size];
    for y in 0..size {
        let row_len = (size - y) as isize;
        let row = y * size;
        let x_end = (row_len + radius).min(n);
        for x in 0..x_end {
            let lo = (x - radius).max(0);
            let hi = (x + radius).min(row_len - 1);
            let mut num = 0.0;
            let mut den = 0.0;
            for xi in lo..=hi {
                let w = kernel[(xi - x + radius) as usize];
                num += w * cell.data[row + xi as usize];
                den += w;
            }
            num_h[row + x as usize] = num;
            den_h[row + x as usize] = den;
        }
    }

    let mut out = CellImage::zeros(Arc::clone(&cell.layout));
    for y in 0..n {
        let lo = (y - radius).max(0);
        let hi = (y + radius).min(n - 1);
        for x in 0..(n - y) {
            let mut num = 0.0;
            let mut den = 0.0;
            for yi in lo..=hi {
                let w = kernel[(yi - y + radius) as usize];
                let idx = (yi * n + x) as usize;
                num += w * num_h[idx];
                den += w * den_h[idx];
            }
            out.data[(y * n + x) as usize] = if den > 0.0 { num / den } else { 0.0 };
        }
    }
    out
}

/// Per-pixel intensity gradient of a cell, in intensity per cell pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGradient {
    size: usize,
    data: Vec<[f64; 2]>,
}

impl CellGradient {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.data[y * self.size + x]
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> [f64; 2] {
        self.data[i]
    }
}

/// Finite-difference gradient over masked-in pixels.
///
/// Central differences where both neighbors are inside the mask, one-sided
/// differences where only one is, and zero otherwise.
pub fn cell_gradient(cell: &CellImage) -> CellGradient {
    let layout = &cell.layout;
    let size = layout.size;
    let mut data = vec![[0.0; 2]; size * size];
    let diff = |minus: Option<f64>, center: f64, plus: Option<f64>| match (minus, plus) {
        (Some(m), Some(p)) => 0.5 * (p - m),
        (None, Some(p)) => p - center,
        (Some(m), None) => center - m,
        (None, None) => 0.0,
    };
    for &i in layout.pixels.iter() {
        let (x, y) = layout.coords(i);
        let c = cell.data[i];
        let at = |xx: usize, yy: usize| layout.is_inside(xx, yy).then(|| cell.data[yy * size + xx]);
        let left = x.checked_sub(1).and_then(|xx| at(xx, y));
        let right = at(x + 1, y);
        let up = y.checked_sub(1).and_then(|yy| at(x, yy));
        let down = at(x, y + 1);
        data[i] = [diff(left, c, right), diff(up, c, down)];
    }
    CellGradient { size, data }
}

/// Smoothing widths per pyramid level, coarse to fine, linear in the level.
pub fn smoothing_schedule(levels: usize, sigma_max: f64, sigma_min: f64) -> Vec<f64> {
    match levels {
        0 => Vec::new(),
        1 => vec![sigma_min],
        _ => (0..levels)
            .map(|l| sigma_max - (sigma_max - sigma_min) * l as f64 / (levels - 1) as f64)
            .collect(),
    }
}
