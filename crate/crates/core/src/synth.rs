//! Synthetic ground truth: three textured faces of a unit cube seen from an
//! arc of calibrated cameras around the shared corner.
//!
//! The renderer intersects each pixel-center ray with the cube face planes
//! and samples the face texture bilinearly, which is exact perspective
//! texture mapping. Renders always use the true geometry; the working mesh
//! can be perturbed independently.

use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fairing::Scene;
use crate::geom::{face_image_triangle, look_at, CameraView, Projection, TriMesh};
use crate::raster::GrayImage;
use crate::warp::{CellImage, CellLayout};

pub const BACKGROUND: f64 = 0.25;
pub const DEFAULT_SEED: u64 = 20_070_611;
pub const TEXTURE_SIZE: usize = 256;

/// Corner shared by the three textured faces.
pub const CORNER_A: usize = 0;

/// Required clearance between every projected face and the image border.
const VISIBILITY_MARGIN: f64 = 2.0;

const ARC_DEGREES: f64 = 60.0;

/// View-dependent bright band on one cube face, for outlier experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Streak {
    pub cube_face: usize,
    pub strength: f64,
    /// Band half-width in texture units.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub seed: u64,
    pub n_views: usize,
    pub image_size: usize,
    /// Distance from each camera to corner A, in edge lengths.
    pub camera_distance: f64,
    /// Checker squares per face side.
    pub checker: usize,
    /// Edge steepness of the soft checker; larger is closer to a square wave.
    pub checker_sharpness: f64,
    /// RMS amplitude of the seeded band-limited noise.
    pub noise: f64,
    /// Noise frequency band, in cycles per face side.
    pub noise_band: [f64; 2],
    /// Number of random plane waves summed into the noise.
    pub noise_waves: usize,
    pub streak: Option<Streak>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_views: 12,
            image_size: 512,
            camera_distance: 3.0,
            checker: 4,
            checker_sharpness: 1.0,
            noise: 0.08,
            noise_band: [1.0, 4.0],
            noise_waves: 6,
            streak: None,
        }
    }
}

/// Texture of one cube face over `[0, 1]^2`, rasterized.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTexture {
    pub raster: GrayImage,
}

impl FaceTexture {
    #[inline]
    pub fn sample(&self, s: f64, t: f64) -> f64 {
        let scale = (TEXTURE_SIZE - 1) as f64;
        self.raster.sample(s * scale, t * scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub params: SceneParams,
    pub true_mesh: TriMesh,
    pub work_mesh: TriMesh,
    pub cameras: Vec<Projection>,
    pub views: Vec<CameraView>,
    /// One texture per cube face: `z = 1`, `x = 1`, `y = 1`.
    pub textures: Vec<FaceTexture>,
    /// Cube face carried by each mesh triangle.
    pub face_plane: Vec<usize>,
    pub corner_a: usize,
}

impl SyntheticScene {
    /// The working mesh together with the rendered views.
    pub fn fairing_scene(&self) -> Scene {
        Scene {
            mesh: self.work_mesh.clone(),
            views: self.views.clone(),
        }
    }

    /// Largest distance between corresponding work and true vertices.
    pub fn max_vertex_error(&self, mesh: &TriMesh) -> f64 {
        mesh.vertices()
            .iter()
            .zip(self.true_mesh.vertices())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// The cube corners and the six triangles of the faces `z = 1`, `x = 1` and
/// `y = 1`. Every quad diagonal avoids corner A, so A touches exactly three
/// triangles.
fn cube_mesh() -> (TriMesh, Vec<usize>) {
    let vertices = vec![
        Point3::new(1.0, 1.0, 1.0), // A
        Point3::new(0.0, 1.0, 1.0),
        Point3::new(0.0, 0.0, 1.0),
        Point3::new(1.0, 0.0, 1.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    let faces = vec![[0, 1, 3], [2, 3, 1], [0, 3, 5], [4, 5, 3], [0, 5, 1], [6, 1, 5]];
    let planes = vec![0, 0, 1, 1, 2, 2];
    (TriMesh::new(vertices, faces).expect("cube mesh is valid"), planes)
}

/// Outward normal axis and texture axes of a cube face.
fn plane_axes(cube_face: usize) -> (usize, usize, usize) {
    match cube_face {
        0 => (2, 0, 1),
        1 => (0, 1, 2),
        _ => (1, 0, 2),
    }
}

fn texture_coords(cube_face: usize, p: &Point3<f64>) -> (f64, f64) {
    let (_, s, t) = plane_axes(cube_face);
    (p[s], p[t])
}

fn make_texture(rng: &mut ChaCha8Rng, params: &SceneParams) -> FaceTexture {
    use std::f64::consts::PI;
    let phase_s: f64 = rng.random_range(0.0..0.5);
    let phase_t: f64 = rng.random_range(0.0..0.5);
    let contrast: f64 = rng.random_range(0.15..0.22);
    let [f_lo, f_hi] = params.noise_band;
    let waves: Vec<(f64, f64, f64, f64)> = (0..params.noise_waves)
        .map(|_| {
            // Log-uniform frequency with a 1/f amplitude spectrum.
            let freq = f_lo * (f_hi / f_lo).powf(rng.random_range(0.0..1.0));
            let angle = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0) / freq;
            (freq * angle.cos(), freq * angle.sin(), phase, amp)
        })
        .collect();
    let wave_rms = (waves.iter().map(|w| w.3 * w.3).sum::<f64>() / 2.0).sqrt().max(f64::MIN_POSITIVE);
    let noise = params.noise;
    let n = params.checker as f64;
    let sharpness = params.checker_sharpness;
    let scale = (TEXTURE_SIZE - 1) as f64;
    let raster = GrayImage::from_fn(TEXTURE_SIZE, TEXTURE_SIZE, |i, j| {
        let s = i as f64 / scale;
        let t = j as f64 / scale;
        let soft = |u: f64| (sharpness * (PI * n * u).sin()).tanh();
        let check = soft(s + phase_s / n) * soft(t + phase_t / n);
        let wave: f64 = waves
            .iter()
            .map(|&(fs, ft, ph, a)| a * (2.0 * PI * (fs * s + ft * t) + ph).sin())
            .sum::<f64>()
            / wave_rms;
        (0.5 + contrast * check + noise * wave).clamp(0.05, 0.95)
    })
    .expect("texture size is valid");
    FaceTexture { raster }
}

fn camera_eyes(n_views: usize, distance: f64) -> Vec<Point3<f64>> {
    let corner = Point3::new(1.0, 1.0, 1.0);
    let base_elevation = (1.0 / 3f64.sqrt()).asin();
    (0..n_views)
        .map(|i| {
            let frac = if n_views > 1 { i as f64 / (n_views - 1) as f64 } else { 0.5 };
            let azimuth = (45.0 - ARC_DEGREES / 2.0 + ARC_DEGREES * frac).to_radians();
            let wobble = if i % 2 == 0 { -6.0f64 } else { 6.0 };
            let elevation = base_elevation + wobble.to_radians();
            let dir = Vector3::new(
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            );
            corner + dir * distance
        })
        .collect()
}

/// Builds the scene, renders every view and checks visibility.
pub fn make_cube_scene(params: &SceneParams) -> Result<SyntheticScene> {
    if params.n_views < 2 {
        return Err(Error::InvalidConfig("synthetic scene needs at least 2 views".into()));
    }
    if params.image_size < 32 {
        return Err(Error::InvalidConfig("image size must be at least 32".into()));
    }
    let [f_lo, f_hi] = params.noise_band;
    if !(f_lo > 0.0 && f_hi >= f_lo && f_hi.is_finite()) || !(params.noise >= 0.0) || params.checker == 0
        || !(params.checker_sharpness > 0.0)
        || !(params.camera_distance > 2.0 && params.camera_distance.is_finite())
    {
        return Err(Error::InvalidConfig("invalid texture parameters".into()));
    }
    let (mesh, face_plane) = cube_mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let textures: Vec<FaceTexture> = (0..3)
        .map(|_| make_texture(&mut rng, params))
        .collect();

    let size = params.image_size as f64;
    let principal = Vector2::new((size - 1.0) / 2.0, (size - 1.0) / 2.0);
    let focal = 1.5 * size * params.camera_distance / 3.0;
    let target = mesh.vertex(CORNER_A);
    let cameras: Vec<Projection> = camera_eyes(params.n_views, params.camera_distance)
        .iter()
        .map(|eye| look_at(eye, &target, &Vector3::z(), focal, principal))
        .collect();

    let mut scene = SyntheticScene {
        params: params.clone(),
        true_mesh: mesh.clone(),
        work_mesh: mesh,
        cameras,
        views: Vec::new(),
        textures,
        face_plane,
        corner_a: CORNER_A,
    };
    scene.views = (0..params.n_views)
        .map(|i| CameraView::new(scene.cameras[i], render_view(&scene, i)))
        .collect();
    check_visibility(&scene)?;
    Ok(scene)
}

/// Every triangle must be front-facing and at least 2 px inside every image.
pub fn check_visibility(scene: &SyntheticScene) -> Result<()> {
    for (i, view) in scene.views.iter().enumerate() {
        let center = camera_center(&scene.cameras[i]);
        for f in 0..scene.true_mesh.faces().len() {
            let (normal_axis, _, _) = plane_axes(scene.face_plane[f]);
            let p = scene.true_mesh.face_points(f)[0];
            if center[normal_axis] - p[normal_axis] <= 0.0 {
                return Err(Error::Validation(format!("face {f} is back-facing in view {i}")));
            }
            face_image_triangle(&scene.true_mesh, f, i, view, -VISIBILITY_MARGIN)
                .map_err(|e| Error::Validation(format!("face {f} not visible in view {i}: {e}")))?;
        }
    }
    Ok(())
}

fn split(p: &Projection) -> (Matrix3<f64>, Vector3<f64>) {
    (p.0.fixed_view::<3, 3>(0, 0).into_owned(), p.0.column(3).into_owned())
}

pub fn camera_center(p: &Projection) -> Point3<f64> {
    let (m, t) = split(p);
    let inv = m.try_inverse().expect("camera matrix is invertible");
    Point3::from(-(inv * t))
}

/// Renders view `i` of the true surface.
pub fn render_view(scene: &SyntheticScene, i: usize) -> GrayImage {
    let size = scene.params.image_size;
    let (m, t) = split(&scene.cameras[i]);
    let m_inv = m.try_inverse().expect("camera matrix is invertible");
    let center = Point3::from(-(m_inv * t));
    let n_views = scene.params.n_views;
    GrayImage::from_fn(size, size, |px, py| {
        let dir = m_inv * Vector3::new(px as f64, py as f64, 1.0);
        let mut best: Option<(f64, usize, Point3<f64>)> = None;
        for cube_face in 0..3 {
            let (axis, s_axis, t_axis) = plane_axes(cube_face);
            if dir[axis].abs() < 1e-15 {
                continue;
            }
            let lambda = (1.0 - center[axis]) / dir[axis];
            if lambda <= 0.0 {
                continue;
            }
            let hit = center + dir * lambda;
            let inside = (0.0..=1.0).contains(&hit[s_axis]) && (0.0..=1.0).contains(&hit[t_axis]);
            if inside && best.is_none_or(|(l, _, _)| lambda < l) {
                best = Some((lambda, cube_face, hit));
            }
        }
        match best {
            None => BACKGROUND,
            Some((_, cube_face, hit)) => {
                let (s, t) = texture_coords(cube_face, &hit);
                let mut value = scene.textures[cube_face].sample(s, t);
                if let Some(streak) = scene.params.streak.filter(|st| st.cube_face == cube_face) {
                    let center_s = 0.2 + 0.6 * i as f64 / (n_views.max(2) - 1) as f64;
                    let d = (s - center_s) / streak.width;
                    value += streak.strength * (-0.5 * d * d).exp();
                }
                value.clamp(0.0, 1.0)
            }
        }
    })
    .expect("image size is validated by make_cube_scene")
}

/// Moves one vertex of the working mesh; renders and ground truth are unchanged.
pub fn perturb_vertex(scene: &SyntheticScene, vertex: usize, offset: Vector3<f64>) -> Result<SyntheticScene> {
    if vertex >= scene.work_mesh.vertices().len() {
        return Err(Error::Validation(format!("vertex {vertex} out of range")));
    }
    let mut out = scene.clone();
    let moved = out.work_mesh.vertex(vertex) + offset;
    out.work_mesh.set_vertex(vertex, moved);
    out.work_mesh.validate()?;
    Ok(out)
}

/// Cell of true-mesh face `f` in view `view`, sampled from the face texture
/// instead of the rendered image: every cell pixel is mapped to the image by
/// the same affine map as [`crate::warp::extract_cell`], back-projected onto
/// the face plane and looked up in the texture. Streaks are not included.
pub fn texture_cell(
    scene: &SyntheticScene,
    f: usize,
    view: usize,
    layout: &std::sync::Arc<CellLayout>,
) -> Result<CellImage> {
    let camera = scene
        .cameras
        .get(view)
        .ok_or_else(|| Error::Validation(format!("view {view} out of range")))?;
    let patch = face_image_triangle(&scene.true_mesh, f, view, &scene.views[view], f64::INFINITY)?;
    let inv = crate::warp::affine_map(&patch, layout)?.inverse()?;
    let (m, t) = split(camera);
    let m_inv = m.try_inverse().ok_or_else(|| Error::InvalidView("singular camera".into()))?;
    let center = Point3::from(-(m_inv * t));
    let cube_face = scene.face_plane[f];
    let (axis, _, _) = plane_axes(cube_face);
    Ok(CellImage::from_fn(std::sync::Arc::clone(layout), |x, y| {
        let u = inv.apply(&Vector2::new(x as f64, y as f64));
        let dir = m_inv * Vector3::new(u.x, u.y, 1.0);
        let hit = center + dir * ((1.0 - center[axis]) / dir[axis]);
        let (s, t) = texture_coords(cube_face, &hit);
        scene.textures[cube_face].sample(s, t)
    }))
}
