//! Mesh and camera data model, pinhole projection and its Jacobian.

use nalgebra::{Matrix2x3, Matrix3x4, Point3, RowVector3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Smallest depth accepted as "in front of the camera".
pub const MIN_DEPTH: f64 = 1e-12;

/// Smallest 3D face area accepted by [`TriMesh::new`].
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Smallest edge cross product `|e1 x e2|` of a projected triangle (twice its
/// area), in square pixels. The unit right triangle sits exactly on it.
pub const MIN_PATCH_AREA: f64 = 1.0;

/// Default tolerance around the image border for projected faces.
pub const DEFAULT_MARGIN: f64 = 2.0;

/// A 3x4 pinhole projection matrix with rows `[r_p | t_p]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection(pub Matrix3x4<f64>);

impl Projection {
    pub fn from_row_slice(values: &[f64; 12]) -> Self {
        Projection(Matrix3x4::from_row_slice(values))
    }

    pub fn to_row_array(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[(r, c)];
            }
        }
        out
    }

    #[inline]
    fn row_dot(&self, row: usize, x: &Point3<f64>) -> f64 {
        let m = &self.0;
        m[(row, 0)] * x.x + m[(row, 1)] * x.y + m[(row, 2)] * x.z + m[(row, 3)]
    }

    #[inline]
    fn rotation_row(&self, row: usize) -> RowVector3<f64> {
        RowVector3::new(self.0[(row, 0)], self.0[(row, 1)], self.0[(row, 2)])
    }

    /// `r_3 . x + t_3`.
    #[inline]
    pub fn depth(&self, x: &Point3<f64>) -> f64 {
        self.row_dot(2, x)
    }

    fn checked_depth(&self, x: &Point3<f64>) -> Result<f64> {
        let depth = self.depth(x);
        if depth <= MIN_DEPTH || !depth.is_finite() {
            return Err(Error::DepthNonPositive { depth });
        }
        Ok(depth)
    }

    /// Projects a world point to pixel coordinates.
    pub fn project(&self, x: &Point3<f64>) -> Result<Vector2<f64>> {
        let depth = self.checked_depth(x)?;
        Ok(Vector2::new(
            self.row_dot(0, x) / depth,
            self.row_dot(1, x) / depth,
        ))
    }

    /// Pixel displacement per unit world displacement of `x`.
    ///
    /// Row `p` is `((r_3 x + t_3) r_p - (r_p x + t_p) r_3) / (r_3 x + t_3)^2`.
    pub fn displacement_jacobian(&self, x: &Point3<f64>) -> Result<Matrix2x3<f64>> {
        let depth = self.checked_depth(x)?;
        let r3 = self.rotation_row(2);
        let inv_sq = 1.0 / (depth * depth);
        let row = |p: usize| (self.rotation_row(p) * depth - r3 * self.row_dot(p, x)) * inv_sq;
        Ok(Matrix2x3::from_rows(&[row(0), row(1)]))
    }
}

/// Free-function form of [`Projection::project`].
pub fn project_point(p: &Projection, x: &Point3<f64>) -> Result<Vector2<f64>> {
    p.project(x)
}

/// Free-function form of [`Projection::displacement_jacobian`].
pub fn pixel_displacement_jacobian(p: &Projection, x: &Point3<f64>) -> Result<Matrix2x3<f64>> {
    p.displacement_jacobian(x)
}

/// A triangle mesh with shared vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.vertices.iter().position(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        for (fi, face) in self.faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&i| i >= self.vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but mesh has {} vertices",
                    self.vertices.len()
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
            let area = self.face_area(fi);
            if !(area > MIN_FACE_AREA) {
                return Err(Error::InvalidMesh(format!("face {fi} has zero area")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    #[inline]
    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> Point3<f64> {
        self.vertices[v]
    }

    /// Moves a vertex without re-validating; use [`TriMesh::validate`] afterwards if needed.
    pub fn set_vertex(&mut self, v: usize, x: Point3<f64>) {
        self.vertices[v] = x;
    }

    pub fn face_points(&self, f: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_points(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Faces containing `v`, with the corner slot `v` occupies in each.
    pub fn incident_faces(&self, v: usize) -> Vec<(usize, usize)> {
        self.faces
            .iter()
            .enumerate()
            .filter_map(|(fi, face)| face.iter().position(|&i| i == v).map(|slot| (fi, slot)))
            .collect()
    }

    /// Mean length of the distinct edges touching `v`.
    pub fn mean_incident_edge_length(&self, v: usize) -> Option<f64> {
        let mut neighbors: Vec<usize> = self
            .faces
            .iter()
            .filter(|face| face.contains(&v))
            .flat_map(|face| face.iter().copied().filter(|&i| i != v))
            .collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        if neighbors.is_empty() {
            return None;
        }
        let x = self.vertices[v];
        let total: f64 = neighbors.iter().map(|&n| (self.vertices[n] - x).norm()).sum();
        Some(total / neighbors.len() as f64)
    }
}

/// A calibrated view: projection plus its grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub projection: Projection,
    pub image: GrayImage,
}

impl CameraView {
    pub fn new(projection: Projection, image: GrayImage) -> Self {
        Self { projection, image }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Checks that every vertex lies in front of the camera.
    pub fn check_in_front(&self, mesh: &TriMesh) -> Result<()> {
        for x in mesh.vertices() {
            let depth = self.projection.depth(x);
            if depth <= MIN_DEPTH {
                return Err(Error::DepthNonPositive { depth });
            }
        }
        Ok(())
    }
}

/// The projection of one face into one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePatch {
    pub view: usize,
    pub face: usize,
    /// Pixel coordinates in face vertex order.
    pub corners: [Vector2<f64>; 3],
}

impl ImagePatch {
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.corners)
    }
}

pub(crate) fn signed_area(c: &[Vector2<f64>; 3]) -> f64 {
    let e1 = c[1] - c[0];
    let e2 = c[2] - c[0];
    0.5 * (e1.x * e2.y - e1.y * e2.x)
}

/// Projects face `f` into `view`, rejecting degenerate or out-of-frame patches.
///
/// Corners must fall inside the sampling domain expanded by `margin` pixels.
pub fn face_image_triangle(
    mesh: &TriMesh,
    f: usize,
    view_index: usize,
    view: &CameraView,
    margin: f64,
) -> Result<ImagePatch> {
    let points = mesh.face_points(f);
    let mut corners = [Vector2::zeros(); 3];
    for (corner, x) in corners.iter_mut().zip(points.iter()) {
        *corner = view.projection.project(x)?;
    }
    let area = signed_area(&corners);
    if !(2.0 * area.abs() >= MIN_PATCH_AREA) {
        return Err(Error::DegenerateProjection { area });
    }
    let max_u = (view.width() - 1) as f64 + margin;
    let max_v = (view.height() - 1) as f64 + margin;
    for c in &corners {
        if c.x < -margin || c.y < -margin || c.x > max_u || c.y > max_v {
            return Err(Error::OutOfBounds { u: c.x, v: c.y });
        }
    }
    Ok(ImagePatch {
        view: view_index,
        face: f,
        corners,
    })
}

/// Builds a camera matrix `K [R | -R c]` looking from `eye` toward `target`.
///
/// Image `x` grows to the right and `y` grows downward.
pub fn look_at(
    eye: &Point3<f64>,
    target: &Point3<f64>,
    up: &Vector3<f64>,
    focal: f64,
    principal: Vector2<f64>,
) -> Projection {
    let forward = (target - eye).normalize();
    let right = forward.cross(up).normalize();
    let down = forward.cross(&right);
    let rot = nalgebra::Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let t = -(rot * eye.coords);
    let k = nalgebra::Matrix3::new(focal, 0.0, principal.x, 0.0, focal, principal.y, 0.0, 0.0, 1.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    rt.set_column(3, &t);
    Projection(k * rt)
}
