use std::sync::Arc;

use nalgebra::Point3;

use super::linearize::{assemble_normal_equations, solve_step, CellTerm};
use super::trace::TraceRow;
use super::FairingConfig;
use crate::eigentexture::{build_basis_with, coherence_residuals};
use crate::error::{Error, Result};
use crate::geom::{face_image_triangle, CameraView, TriMesh};
use crate::robust::{estimate_sigma, RobustNorm, RobustScale};
use crate::warp::{affine_map, cell_gradient, extract_cell, smooth_cell, CellImage, CellLayout};

/// One incident face and the views it is retained in.
#[derive(Debug, Clone)]
struct FaceStack {
    face: usize,
    views: Vec<usize>,
    /// Frozen reconstructions `U c_i`, one per retained view.
    recon: Vec<CellImage>,
}

/// Residuals and linearization of every incident cell at the current vertex
/// position, with the frozen reconstructions and robust scale.
#[derive(Debug, Clone)]
pub struct LinearizedVertex {
    pub vertex: usize,
    pub sigma_smooth: f64,
    pub terms: Vec<CellTerm>,
    pub scale: RobustScale,
    /// `sum rho(I - U c)` at the current position.
    pub energy: f64,
    stacks: Vec<FaceStack>,
    layout: Arc<CellLayout>,
}

impl LinearizedVertex {
    /// All masked-in residuals `I - U c`, face by face, view by view.
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().flat_map(|t| t.residual.iter().copied())
    }

    pub fn face_count(&self) -> usize {
        self.stacks.len()
    }
}

fn cell_at(
    mesh: &TriMesh,
    face: usize,
    view_index: usize,
    view: &CameraView,
    layout: &Arc<CellLayout>,
    sigma_smooth: f64,
    margin: f64,
) -> Result<(CellImage, crate::warp::AffineMap)> {
    let patch = face_image_triangle(mesh, face, view_index, view, margin)?;
    let map = affine_map(&patch, layout)?;
    let cell = extract_cell(&view.image, &map, layout)?;
    Ok((smooth_cell(&cell, sigma_smooth), map))
}

/// Builds bases, residuals and the linearized cell terms for vertex `v`.
pub fn linearize_vertex(
    mesh: &TriMesh,
    views: &[CameraView],
    v: usize,
    sigma_smooth: f64,
    config: &FairingConfig,
) -> Result<LinearizedVertex> {
    let layout = CellLayout::new(config.cell_size)?;
    let x = mesh.vertex(v);
    let mut terms = Vec::new();
    let mut stacks = Vec::new();
    for (face, slot) in mesh.incident_faces(v) {
        let mut cells = Vec::new();
        let mut kept = Vec::new();
        for (i, view) in views.iter().enumerate() {
            if let Ok((cell, map)) = cell_at(mesh, face, i, view, &layout, sigma_smooth, config.margin) {
                let jac = view.projection.displacement_jacobian(&x)?;
                cells.push(cell);
                kept.push((i, map.linear() * jac));
            }
        }
        if cells.len() < 2 {
            continue;
        }
        let k = config.k.min(cells.len());
        let basis = build_basis_with(&cells, k, config.center_basis)?;
        let coherence = coherence_residuals(&basis, &cells)?;
        for ((cell, residual), &(_, motion)) in cells.iter().zip(&coherence.residuals).zip(&kept) {
            let grad = cell_gradient(cell);
            terms.push(CellTerm {
                layout: Arc::clone(&layout),
                moving: slot,
                motion,
                residual: residual.masked_values(),
                gradient: layout.pixels().iter().map(|&p| grad.at_index(p)).collect(),
            });
        }
        stacks.push(FaceStack {
            face,

            views: kept.iter().map(|&(i, _)| i).collect(),
            recon: coherence.reconstructions,
        });
    }
    if terms.is_empty() {
        return Err(Error::NoObservations);
    }
    let scale = match config.sigma_override {
        Some(s) => RobustScale::new(s)?,
        None => estimate_sigma(terms.iter().flat_map(|t| t.residual.iter().copied()))?,
    };
    let energy = terms
        .iter()
        .flat_map(|t| t.residual.iter())
        .map(|&e| scale.rho(e))
        .sum();
    Ok(LinearizedVertex {
        vertex: v,
        sigma_smooth,
        terms,
        scale,
        energy,
        stacks,
        layout,
    })
}

/// `sum rho(I - U c)` with the vertex moved to `position`, cells re-extracted
/// and the reconstructions and scale of `lin` held fixed.
///
/// Returns `None` when a retained view no longer sees its face.
pub fn true_objective(
    mesh: &TriMesh,
    views: &[CameraView],
    lin: &LinearizedVertex,
    position: Point3<f64>,
    config: &FairingConfig,
) -> Option<f64> {
    let mut moved = mesh.clone();
    moved.set_vertex(lin.vertex, position);
    let mut total = 0.0;
    for stack in &lin.stacks {
        for (&i, recon) in stack.views.iter().zip(&stack.recon) {
            let (cell, _) = cell_at(
                &moved,
                stack.face,
                i,
                &views[i],
                &lin.layout,
                lin.sigma_smooth,
                config.margin,
            )
            .ok()?;
            for &p in lin.layout.pixels() {
                total += lin.scale.rho(cell.data()[p] - recon.data()[p]);
            }
        }
    }
    Some(total)
}

/// Result of fairing one vertex.
#[derive(Debug, Clone)]
pub struct VertexOutcome {
    pub position: Point3<f64>,
    /// False when the finest level stopped at the iteration limit.
    pub converged: bool,
    pub rows: Vec<TraceRow>,
}

/// Coarse-to-fine robust Gauss-Newton on the position of vertex `v`.
///
/// Other vertices stay fixed. Trace rows are tagged with `sweep`.
pub fn fair_vertex(
    mesh: &TriMesh,
    views: &[CameraView],
    v: usize,
    config: &FairingConfig,
    sweep: usize,
) -> Result<VertexOutcome> {
    config.validate()?;
    if v >= mesh.vertices().len() {
        return Err(Error::Validation(format!("vertex {v} out of range")));
    }
    let trust = config.trust_fraction
        * mesh
            .mean_incident_edge_length(v)
            .ok_or(Error::NoObservations)?;
    let mut work = mesh.clone();
    let mut rows = Vec::new();
    let mut converged = true;

    for (level, &sigma_smooth) in config.schedule().iter().enumerate() {
        let mut level_converged = false;
        for iter in 0..config.max_iters {
            let x = work.vertex(v);
            let lin = linearize_vertex(&work, views, v, sigma_smooth, config)?;
            let system = assemble_normal_equations(&lin.terms, &lin.scale)?;
            let step = solve_step(&system).clamped(trust);

            let mut scale_factor = 1.0;
            let mut accepted = None;
            for halvings in 0..=config.max_halvings {
                let trial = x + step.0 * scale_factor;
                if let Some(energy) = true_objective(&work, views, &lin, trial, config) {
                    if energy <= lin.energy {
                        accepted = Some((trial, energy, halvings));
                        break;
                    }
                }
                scale_factor *= config.backtrack_factor;
            }

            let row = |position: Point3<f64>, step_norm: f64, energy: f64, backtracks: usize| TraceRow {
                sweep,
                vertex: v,
                level,
                iter,
                x: position.x,
                y: position.y,
                z: position.z,
                step_norm,
                energy,
                sigma: lin.scale.sigma(),
                backtracks,
                energy_before: lin.energy,
            };
            match accepted {
                Some((trial, energy, halvings)) => {
                    let step_norm = (trial - x).norm();
                    work.set_vertex(v, trial);
                    rows.push(row(trial, step_norm, energy, halvings));
                    if step_norm < config.step_tol {
                        level_converged = true;
                        break;
                    }
                }
                None => {
                    // No non-increasing step along the direction: stationary at this level.
                    rows.push(row(x, 0.0, lin.energy, config.max_halvings + 1));
                    level_converged = true;
                    break;
                }
            }
        }
        converged = level_converged;
    }

    Ok(VertexOutcome {
        position: work.vertex(v),
        converged,
        rows,
    })
}
