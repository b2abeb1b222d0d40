//! Wavefront OBJ subset: `v x y z` and `f i j k` (1-based).
//!
//! Face entries may carry `/vt/vn` suffixes, which are ignored. Negative
//! (relative) indices and polygons with more than three corners are rejected.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{read_text, write_atomic};
use crate::error::{Error, Result};
use crate::geom::TriMesh;

pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::parse(path, line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::parse(path, line_no, "vertex needs three finite coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = tokens.collect();
                if idx.len() != 3 {
                    return Err(Error::parse(path, line_no, "only triangular faces are supported"));
                }
                let mut face = [0usize; 3];
                for (slot, tok) in face.iter_mut().zip(&idx) {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: usize = head
                        .parse()
                        .map_err(|_| Error::parse(path, line_no, format!("bad face index `{tok}`")))?;
                    if i == 0 {
                        return Err(Error::parse(path, line_no, "face indices are 1-based"));
                    }
                    *slot = i - 1;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn read_obj(path: &Path) -> Result<TriMesh> {
    parse_obj(&read_text(path)?, path)
}

/// Formats with 12 significant digits.
pub fn format_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:.11e} {:.11e} {:.11e}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<()> {
    write_atomic(path, format_obj(mesh).as_bytes())
}
