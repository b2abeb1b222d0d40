//! Per-face eigenspace texture model.
//!
//! The basis is the top-`k` left singular vectors of the matrix whose columns
//! are the masked cell images of one face across views. It is computed from
//! the small `n x n` Gram matrix of the stack, then re-orthonormalized.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::warp::{CellImage, CellLayout};

/// Default basis dimension; the effective value is `min(DEFAULT_K, n)`.
pub const DEFAULT_K: usize = 5;

/// Relative threshold below which a singular value is treated as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    layout: Arc<CellLayout>,
    /// Basis vectors over masked-in pixels, each of unit norm.
    vectors: Vec<Vec<f64>>,
    /// All `n` singular values of the stack, descending.
    singular_values: Vec<f64>,
    /// Mean cell subtracted before decomposition, when centering is enabled.
    mean: Option<Vec<f64>>,
}

/// Per-view projection onto a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    pub view: usize,
    pub coeffs: Vec<f64>,
}

impl EigenBasis {
    #[inline]
    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn layout(&self) -> &Arc<CellLayout> {
        &self.layout
    }

    #[inline]
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    #[inline]
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    #[inline]
    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }

    /// Basis vector `m` as a cell image.
    pub fn basis_cell(&self, m: usize) -> CellImage {
        CellImage::from_masked(Arc::clone(&self.layout), &self.vectors[m])
    }

    /// Fraction of stack energy captured by the first `k` components.
    pub fn captured_energy(&self, k: usize) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 1.0;
        }
        let kept: f64 = self.singular_values.iter().take(k).map(|s| s * s).sum();
        kept / total
    }

    /// Largest deviation of `U^T U` from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, va) in self.vectors.iter().enumerate() {
            for (b, vb) in self.vectors.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot(va, vb) - target).abs());
            }
        }
        worst
    }

    fn check(&self, cell: &CellImage) -> Result<()> {
        if cell.size() != self.layout.size() {
            return Err(Error::MaskMismatch {
                expected: self.layout.size(),
                found: cell.size(),
            });
        }
        Ok(())
    }

    fn centered(&self, cell: &CellImage) -> Vec<f64> {
        let mut values = cell.masked_values();
        if let Some(mean) = &self.mean {
            values.iter_mut().zip(mean).for_each(|(v, m)| *v -= m);
        }
        values
    }

    fn coeffs_of(&self, values: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|u| dot(u, values)).collect()
    }

    fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = match &self.mean {
            Some(mean) => mean.clone(),
            None => vec![0.0; self.layout.pixels().len()],
        };
        for (u, &c) in self.vectors.iter().zip(coeffs) {
            for (o, &ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Two passes of modified Gram-Schmidt against `basis`.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = dot(u, v);
            axpy(-c, u, v);
        }
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Orthonormal basis of the cell stack, no mean subtraction.
pub fn build_basis(cells: &[CellImage], k: usize) -> Result<EigenBasis> {
    build_basis_with(cells, k, false)
}

/// Orthonormal basis of the cell stack; `center` subtracts the mean cell first.
pub fn build_basis_with(cells: &[CellImage], k: usize, center: bool) -> Result<EigenBasis> {
    let n = cells.len();
    if n == 0 {
        return Err(Error::InsufficientViews);
    }
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    let layout = Arc::clone(cells[0].layout());
    for c in &cells[1..] {
        cells[0].same_layout(c)?;
    }
    let p = layout.pixels().len();

    let mut columns: Vec<Vec<f64>> = cells.iter().map(CellImage::masked_values).collect();
    let mean = center.then(|| {
        let mut mean = vec![0.0; p];
        for col in &columns {
            axpy(1.0 / n as f64, col, &mut mean);
        }
        mean
    });
    if let Some(mean) = &mean {
        for col in columns.iter_mut() {
            axpy(-1.0, mean, col);
        }
    }

    let gram = DMatrix::from_fn(n, n, |i, j| dot(&columns[i], &columns[j]));
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let singular_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let cutoff = RANK_TOL * singular_values[0].max(f64::MIN_POSITIVE);

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (m, &idx) in order.iter().take(k).enumerate() {
        let sv = singular_values[m];
        let mut u = vec![0.0; p];
        if sv > cutoff {
            let v = eig.eigenvectors.column(idx);
            for (col, &w) in columns.iter().zip(v.iter()) {
                axpy(w / sv, col, &mut u);
            }
            orthogonalize(&mut u, &vectors);
            if normalize(&mut u) == 0.0 {
                complete(&mut u, &vectors);
            }
        } else {
            complete(&mut u, &vectors);
        }
        fix_sign(&mut u);
        vectors.push(u);
    }

    Ok(EigenBasis {
        layout,
        vectors,
        singular_values,
        mean,
    })
}

/// Fills `u` with a unit vector orthogonal to `basis` (rank-deficient stacks).
fn complete(u: &mut [f64], basis: &[Vec<f64>]) {
    for j in 0..u.len() {
        u.iter_mut().for_each(|x| *x = 0.0);
        u[j] = 1.0;
        orthogonalize(u, basis);
        if normalize(u) > 0.5 {
            return;
        }
    }
    unreachable!("basis dimension cannot exceed pixel count");
}

/// Coefficients `c_m = <cell, U_m>` over masked-in pixels.
pub fn project_coeffs(basis: &EigenBasis, view: usize, cell: &CellImage) -> Result<CoeffVector> {
    basis.check(cell)?;
    Ok(CoeffVector {
        view,
        coeffs: basis.coeffs_of(&basis.centered(cell)),
    })
}

/// `sum_m c_m U_m` as a cell; values are not clamped.
pub fn reconstruct(basis: &EigenBasis, coeffs: &CoeffVector) -> CellImage {
    assert_eq!(coeffs.coeffs.len(), basis.k(), "coefficient count must equal k");
    CellImage::from_masked(Arc::clone(&basis.layout), &basis.combine(&coeffs.coeffs))
}

/// Signed per-view residuals `I_i - U c_i` and their total squared norm.
#[derive(Debug, Clone)]
pub struct CoherenceResiduals {
    pub residuals: Vec<CellImage>,
    pub reconstructions: Vec<CellImage>,
    pub total_squared: f64,
}

impl CoherenceResiduals {
    /// Root-mean-square residual over all masked-in pixels of all views.
    pub fn rms(&self) -> f64 {
        let count: usize = self.residuals.iter().map(|r| r.layout().pixels().len()).sum();
        (self.total_squared / count as f64).sqrt()
    }
}

pub fn coherence_residuals(basis: &EigenBasis, cells: &[CellImage]) -> Result<CoherenceResiduals> {
    let mut residuals = Vec::with_capacity(cells.len());
    let mut reconstructions = Vec::with_capacity(cells.len());
    let mut total = 0.0;
    for (i, cell) in cells.iter().enumerate() {
        let c = project_coeffs(basis, i, cell)?;
        let recon = reconstruct(basis, &c);
        let values: Vec<f64> = basis
            .layout
            .pixels()
            .iter()
            .map(|&px| cell.data()[px] - recon.data()[px])
            .collect();
        total += dot(&values, &values);
        residuals.push(CellImage::from_masked(Arc::clone(&basis.layout), &values));
        reconstructions.push(recon);
    }
    Ok(CoherenceResiduals {
        residuals,
        reconstructions,
        total_squared: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout(size: usize) -> Arc<CellLayout> {
        CellLayout::new(size).unwrap()
    }

    fn pattern(l: &Arc<CellLayout>, seed: u64) -> CellImage {
        CellImage::from_fn(Arc::clone(l), |x, y| {
            let h = (x as u64 * 73856093) ^ (y as u64 * 19349663) ^ seed.wrapping_mul(83492791);
            (h % 1000) as f64 / 1000.0
        })
    }

    #[test]
    fn identical_cells_are_rank_one() {
        let l = layout(16);
        let cell = pattern(&l, 3);
        let cells = vec![cell.clone(); 4];
        let basis = build_basis(&cells, 1).unwrap();
        let sv = basis.singular_values();
        assert!(sv[1] < 1e-10);
        let values = cell.masked_values();
        let norm = dot(&values, &values).sqrt();
        for (u, v) in basis.vectors()[0].iter().zip(&values) {
            assert!((u - v / norm).abs() < 1e-12);
        }
        let res = coherence_residuals(&basis, &cells).unwrap();
        assert!(res.total_squared < 1e-20);
    }

    #[test]
    fn orthogonal_indicators() {
        let l = layout(8);
        let a = CellImage::from_fn(Arc::clone(&l), |x, _| if x < 2 { 1.0 } else { 0.0 });
        let count_a = a.masked_values().iter().filter(|&&v| v > 0.0).count();
        // Same number of pixels, disjoint support.
        let mut taken = 0;
        let b = CellImage::from_fn(Arc::clone(&l), |x, _| {
            if x >= 2 && taken < count_a {
                taken += 1;
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(taken, count_a);
        let cells = vec![a.clone(), b.clone()];
        let basis = build_basis(&cells, 2).unwrap();
        let sv = basis.singular_values();
        assert!((sv[0] - sv[1]).abs() < 1e-12);
        let res = coherence_residuals(&basis, &cells).unwrap();
        assert!(res.total_squared < 1e-20);
    }

    #[test]
    fn unit_basis_projection() {
        let l = layout(12);
        let cells: Vec<_> = (0..4).map(|s| pattern(&l, s)).collect();
        let basis = build_basis(&cells, 3).unwrap();
        let c = project_coeffs(&basis, 0, &basis.basis_cell(0)).unwrap();
        assert!((c.coeffs[0] - 1.0).abs() < 1e-12);
        assert!(c.coeffs[1..].iter().all(|v| v.abs() < 1e-12));
        let zero = project_coeffs(&basis, 0, &CellImage::zeros(Arc::clone(&l))).unwrap();
        assert!(zero.coeffs.iter().all(|&v| v == 0.0));
        let recon = reconstruct(&basis, &CoeffVector { view: 0, coeffs: vec![1.0, 0.0, 0.0] });
        assert_eq!(recon, basis.basis_cell(0));
    }

    #[test]
    fn orthogonal_complement_projects_to_zero() {
        let l = layout(8);
        let a = CellImage::from_fn(Arc::clone(&l), |x, _| if x < 2 { 1.0 } else { 0.0 });
        let b = CellImage::from_fn(Arc::clone(&l), |x, _| if x >= 4 { 1.0 } else { 0.0 });
        let basis = build_basis(&[a], 1).unwrap();
        let c = project_coeffs(&basis, 0, &b).unwrap();
        assert_eq!(c.coeffs, vec![0.0]);
        assert!(reconstruct(&basis, &c).masked_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let l = layout(16);
        let cells: Vec<_> = (0..6).map(|s| pattern(&l, s)).collect();
        let basis = build_basis(&cells, 6).unwrap();
        for (i, cell) in cells.iter().enumerate() {
            let r = reconstruct(&basis, &project_coeffs(&basis, i, cell).unwrap());
            assert!(r.rms_difference(cell).unwrap() < 1e-6);
        }
        assert!(basis.orthonormality_residual() < 1e-8);
    }

    #[test]
    fn rank_deficient_completion_stays_orthonormal() {
        let l = layout(8);
        let cell = pattern(&l, 1);
        let basis = build_basis(&[cell.clone(), cell.clone(), cell], 3).unwrap();
        assert_eq!(basis.k(), 3);
        assert!(basis.orthonormality_residual() < 1e-12);
    }

    #[test]
    fn errors() {
        let l8 = layout(8);
        let l9 = layout(9);
        assert!(matches!(build_basis(&[], 1), Err(Error::InsufficientViews)));
        assert!(matches!(build_basis(&[pattern(&l8, 0)], 2), Err(Error::KTooLarge { .. })));
        assert!(matches!(
            build_basis(&[pattern(&l8, 0), pattern(&l9, 0)], 1),
            Err(Error::MaskMismatch { .. })
        ));
        let basis = build_basis(&[pattern(&l8, 0)], 1).unwrap();
        assert!(matches!(project_coeffs(&basis, 0, &pattern(&l9, 0)), Err(Error::MaskMismatch { .. })));
    }

    #[test]
    fn centered_basis_reconstructs_mean() {
        let l = layout(10);
        let cells: Vec<_> = (0..3).map(|s| pattern(&l, s)).collect();
        let basis = build_basis_with(&cells, 3, true).unwrap();
        assert!(basis.mean().is_some());
        for (i, cell) in cells.iter().enumerate() {
            let r = reconstruct(&basis, &project_coeffs(&basis, i, cell).unwrap());
            assert!(r.rms_difference(cell).unwrap() < 1e-9);
        }
    }

    #[test]
    fn view_order_does_not_change_basis() {
        let l = layout(12);
        let cells: Vec<_> = (0..5).map(|s| pattern(&l, s)).collect();
        let mut rev = cells.clone();
        rev.reverse();
        let a = build_basis(&cells, 3).unwrap();
        let b = build_basis(&rev, 3).unwrap();
        for (u, v) in a.vectors().iter().zip(b.vectors()) {
            for (x, y) in u.iter().zip(v) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn error_non_increasing_in_k(seeds in prop::collection::vec(0u64..10_000, 2..7)) {
            let l = layout(10);
            let cells: Vec<_> = seeds.iter().map(|&s| pattern(&l, s)).collect();
            let mut prev = f64::INFINITY;
            for k in 1..=cells.len() {
                let basis = build_basis(&cells, k).unwrap();
                let total = coherence_residuals(&basis, &cells).unwrap().total_squared;
                prop_assert!(total <= prev + 1e-9);
                let tail: f64 = basis.singular_values()[k..].iter().map(|s| s * s).sum();
                prop_assert!((total - tail).abs() < 1e-8);
                prev = total;
            }
        }
    }
}
