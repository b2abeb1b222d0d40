//! Multi-view texture-coherence refinement of triangle meshes.
//!
//! Each face of a mesh is projected into every calibrated view and warped
//! into a fixed triangular cell. The stack of cells for a face is summarized
//! by a low-dimensional orthonormal basis; the distance of each cell from
//! that eigenspace measures how badly the planar face approximates the real
//! surface. [`fairing`] moves vertices to minimize a robust (Geman-McClure)
//! sum of those distances with a coarse-to-fine Gauss-Newton scheme.
//!
//! Modules:
//!
//! - [`geom`]: meshes, cameras, projection and its Jacobian
//! - [`warp`]: canonical cells, affine maps, smoothing, gradients
//! - [`eigentexture`]: per-face bases and coherence residuals
//! - [`robust`]: the robust norm and its scale rule
//! - [`fairing`]: the vertex optimizer and mesh sweeps
//! - [`synth`]: a rendered ground-truth cube scene
//! - [`io`] and [`cli`]: file formats and the command-line front end

pub mod cli;
pub mod eigentexture;
pub mod error;
pub mod fairing;
pub mod geom;
pub mod io;
pub mod raster;
pub mod robust;
pub mod synth;
pub mod warp;

pub use error::{Error, Result};
