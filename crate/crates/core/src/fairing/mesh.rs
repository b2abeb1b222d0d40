use super::trace::{FairingTrace, SkipRecord, SweepSummary};
use super::vertex::fair_vertex;
use super::{FairingConfig, Scene};
use crate::error::Result;
use crate::geom::TriMesh;

/// Gauss-Seidel sweeps of [`fair_vertex`] over all vertices in index order.
///
/// Stops once the largest vertex motion in a sweep drops below the step
/// tolerance, or after `max_sweeps`. Vertices that cannot be faired are left
/// in place and recorded as skips.
pub fn fair_mesh(scene: &Scene, config: &FairingConfig) -> Result<(TriMesh, FairingTrace)> {
    config.validate()?;
    let mut mesh = scene.mesh.clone();
    let mut trace = FairingTrace {
        config: config.describe(),
        ..Default::default()
    };
    for sweep in 0..config.max_sweeps {
        let mut max_motion: f64 = 0.0;
        let mut total_energy = 0.0;
        for v in 0..mesh.vertices().len() {
            if mesh.incident_faces(v).is_empty() {
                continue;
            }
            match fair_vertex(&mesh, &scene.views, v, config, sweep) {
                Ok(outcome) => {
                    max_motion = max_motion.max((outcome.position - mesh.vertex(v)).norm());
                    if let Some(last) = outcome.rows.last() {
                        total_energy += last.energy;
                    }
                    mesh.set_vertex(v, outcome.position);
                    trace.rows.extend(outcome.rows);
                }
                Err(e) => trace.skips.push(SkipRecord {
                    sweep,
                    vertex: v,
                    reason: e.kind().to_string(),
                }),
            }
        }
        trace.sweeps.push(SweepSummary {
            sweep,
            max_motion,
            total_energy,
        });
        if max_motion < config.step_tol {
            break;
        }
    }
    Ok((mesh, trace))
}
