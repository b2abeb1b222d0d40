//! Robust Gauss-Newton vertex fairing.
//!
//! Each vertex is moved so that the cells of its incident faces agree with
//! their eigenspace reconstructions. One outer iteration rebuilds the bases,
//! linearizes the cell residuals in the vertex displacement, solves the 3x3
//! secant-weighted normal equations and line-searches the step on the
//! re-warped objective. Levels run coarse to fine over smoothed cells.

mod linearize;
mod mesh;
mod trace;
mod vertex;

pub use linearize::{
    assemble_normal_equations, cell_pixel_displacement, linearized_objective, linearized_residual,
    solve_step, CellTerm, NormalEquations,
};
pub use mesh::fair_mesh;
pub use trace::{FairingTrace, SkipRecord, SweepSummary, TraceRow, TRACE_HEADER};
pub use vertex::{fair_vertex, linearize_vertex, true_objective, LinearizedVertex, VertexOutcome};

use nalgebra::Vector3;

use crate::eigentexture::DEFAULT_K;
use crate::error::{Error, Result};
use crate::geom::{CameraView, TriMesh, DEFAULT_MARGIN};
use crate::warp::{smoothing_schedule, DEFAULT_CELL_SIZE, MIN_CELL_SIZE};

/// A 3D vertex displacement in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement(pub Vector3<f64>);

impl Displacement {
    pub fn zero() -> Self {
        Displacement(Vector3::zeros())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Scales the displacement down to at most `radius`.
    pub fn clamped(self, radius: f64) -> Self {
        let n = self.norm();
        if n > radius && n > 0.0 {
            Displacement(self.0 * (radius / n))
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairingConfig {
    pub cell_size: usize,
    /// Basis dimension; each face uses `min(k, retained views)`.
    pub k: usize,
    pub levels: usize,
    pub sigma_smooth_max: f64,
    pub sigma_smooth_min: f64,
    pub max_iters: usize,
    /// Step-length convergence threshold, world units.
    pub step_tol: f64,
    /// Trust radius as a fraction of the mean incident-edge length.
    pub trust_fraction: f64,
    pub max_sweeps: usize,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    /// Out-of-frame tolerance for projected faces, pixels.
    pub margin: f64,
    /// Subtract the mean cell before building bases.
    pub center_basis: bool,
    /// Fixed robust scale instead of the per-iteration estimate.
    pub sigma_override: Option<f64>,
}

impl Default for FairingConfig {
    fn default() -> Self {
        Self {
            cell_size: DEFAULT_CELL_SIZE,
            k: DEFAULT_K,
            levels: 5,
            sigma_smooth_max: 6.0,
            sigma_smooth_min: 1.2,
            max_iters: 50,
            step_tol: 1e-4,
            trust_fraction: 0.1,
            max_sweeps: 10,
            backtrack_factor: 0.5,
            max_halvings: 8,
            margin: DEFAULT_MARGIN,
            center_basis: false,
            sigma_override: None,
        }
    }
}

impl FairingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.cell_size < MIN_CELL_SIZE {
            return bad("cell size must be at least 8");
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.levels == 0 {
            return bad("levels must be at least 1");
        }
        if !(self.sigma_smooth_min >= 0.0 && self.sigma_smooth_max >= self.sigma_smooth_min) {
            return bad("smoothing range must satisfy 0 <= min <= max");
        }
        if self.max_iters == 0 || self.max_sweeps == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.step_tol > 0.0 && self.trust_fraction > 0.0) {
            return bad("tolerance and trust radius must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma override must be positive");
            }
        }
        Ok(())
    }

    /// Smoothing width for each level, coarse to fine.
    pub fn schedule(&self) -> Vec<f64> {
        smoothing_schedule(self.levels, self.sigma_smooth_max, self.sigma_smooth_min)
    }

    /// One-line `key=value` summary, used as the trace header comment.
    pub fn describe(&self) -> String {
        format!(
            "cell_size={} k={} levels={} sigma_smooth_max={} sigma_smooth_min={} max_iters={} tol={} trust={} sweeps={} backtrack={} halvings={} margin={}",
            self.cell_size,
            self.k,
            self.levels,
            self.sigma_smooth_max,
            self.sigma_smooth_min,
            self.max_iters,
            self.step_tol,
            self.trust_fraction,
            self.max_sweeps,
            self.backtrack_factor,
            self.max_halvings,
            self.margin,
        )
    }
}

/// The mesh being faired together with the calibrated views observing it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriMesh,
    pub views: Vec<CameraView>,
}

impl Scene {
    pub fn new(mesh: TriMesh, views: Vec<CameraView>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Validation("scene has no views".into()));
        }
        for (i, view) in views.iter().enumerate() {
            view.check_in_front(&mesh)
                .map_err(|e| Error::InvalidView(format!("view {i}: {e}")))?;
        }
        Ok(Self { mesh, views })
    }
}
