use std::sync::Arc;

use nalgebra::{Matrix2x3, Matrix3, SymmetricEigen, Vector2, Vector3};

use super::Displacement;
use crate::error::{Error, Result};
use crate::robust::{RobustNorm, RobustScale};
use crate::warp::{AffineMap, CellLayout};

/// Relative eigenvalue floor below which the normal matrix is damped.
const DAMPING: f64 = 1e-9;

/// Flow induced at cell pixel `ubar` by moving the vertex at canonical corner
/// `moving` by `eta`.
///
/// The displacement at the moving corner is `H_lin J eta` and falls off
/// linearly (barycentrically) to zero on the opposite edge.
pub fn cell_pixel_displacement(
    ubar: &Vector2<f64>,
    jacobian: &Matrix2x3<f64>,
    map: &AffineMap,
    layout: &CellLayout,
    moving: usize,
    eta: &Displacement,
) -> Vector2<f64> {
    let weight = layout.barycentric(ubar.x, ubar.y)[moving];
    weight * (map.linear() * (jacobian * eta.0))
}

/// First-order cell residual `grad . upsilon + (I - U c)`.
#[inline]
pub fn linearized_residual(cell_value: f64, recon: f64, grad: [f64; 2], upsilon: &Vector2<f64>) -> f64 {
    grad[0] * upsilon.x + grad[1] * upsilon.y + (cell_value - recon)
}

/// The linearization of one (face, view) cell around the current vertex.
#[derive(Debug, Clone)]
pub struct CellTerm {
    pub layout: Arc<CellLayout>,
    /// Canonical corner of the vertex being faired.
    pub moving: usize,
    /// `H_lin J`: cell pixels per world unit at the moving corner.
    pub motion: Matrix2x3<f64>,
    /// `I - U c` at each masked-in pixel.
    pub residual: Vec<f64>,
    /// Cell gradient at each masked-in pixel.
    pub gradient: Vec<[f64; 2]>,
}

impl CellTerm {
    /// `d e_c / d eta` at masked pixel `m`.
    #[inline]
    fn derivative(&self, m: usize, inv_span: f64) -> Vector3<f64> {
        let (x, y) = self.layout.coords(self.layout.pixels()[m]);
        let weight = match self.moving {
            0 => 1.0 - (x + y) as f64 * inv_span,
            1 => x as f64 * inv_span,
            _ => y as f64 * inv_span,
        };
        let [gx, gy] = self.gradient[m];
        let row0 = self.motion.row(0);
        let row1 = self.motion.row(1);
        Vector3::new(
            gx * row0[0] + gy * row1[0],
            gx * row0[1] + gy * row1[1],
            gx * row0[2] + gy * row1[2],
        ) * weight
    }

    fn for_each(&self, mut f: impl FnMut(f64, Vector3<f64>)) {
        let inv_span = 1.0 / (self.layout.size() - 1) as f64;
        for (m, &r) in self.residual.iter().enumerate() {
            f(r, self.derivative(m, inv_span));
        }
    }
}

/// Secant-weighted Gauss-Newton system `A delta = b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEquations {
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    /// Number of contributing cell pixels.
    pub count: usize,
}

/// `A = sum w(e) g g^T`, `b = -sum rho_dot(e) g` with `w = rho_dot(e) / e`.
pub fn assemble_normal_equations(terms: &[CellTerm], scale: &RobustScale) -> Result<NormalEquations> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    let mut count = 0;
    for term in terms {
        term.for_each(|e, g| {
            let w = scale.secant_weight(e);
            // Upper triangle only; mirrored below.
            for k in 0..3 {
                for l in k..3 {
                    a[(k, l)] += w * g[k] * g[l];
                }
            }
            b -= g * scale.rho_dot(e);
            count += 1;
        });
    }
    if count == 0 {
        return Err(Error::NoObservations);
    }
    for k in 0..3 {
        for l in 0..k {
            a[(k, l)] = a[(l, k)];
        }
    }
    Ok(NormalEquations { a, b, count })
}

/// `sum rho(e_c(eta))` with frozen residuals, gradients and scale.
pub fn linearized_objective(terms: &[CellTerm], scale: &RobustScale, eta: &Displacement) -> f64 {
    let mut total = 0.0;
    for term in terms {
        term.for_each(|e, g| total += scale.rho(e + g.dot(&eta.0)));
    }
    total
}

/// Solves the symmetric 3x3 system, damping by `1e-9 trace(A)` when any
/// eigenvalue falls below that level.
pub fn solve_step(system: &NormalEquations) -> Displacement {
    let trace = system.a.trace();
    if !(trace > 0.0) {
        return Displacement::zero();
    }
    let eig = SymmetricEigen::new(system.a);
    let floor = DAMPING * trace;
    let damping = if eig.eigenvalues.min() < floor { floor } else { 0.0 };
    let mut step = Vector3::zeros();
    for i in 0..3 {
        let lambda = eig.eigenvalues[i].max(0.0) + damping;
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(i);
            step += v * (v.dot(&system.b) / lambda);
        }
    }
    Displacement(step)
}
