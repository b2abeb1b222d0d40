use fairmesh::geom::{face_image_triangle, pixel_displacement_jacobian, project_point, CameraView, Projection, TriMesh};
use fairmesh::raster::GrayImage;
use fairmesh::Error;
use nalgebra::{Matrix2x3, Matrix3x4, Point3, Vector2, Vector3};
use proptest::prelude::*;

fn canonical() -> Projection {
    Projection(Matrix3x4::identity())
}

#[test]
fn canonical_camera_examples() {
    let p = canonical();
    assert_eq!(project_point(&p, &Point3::new(0.0, 0.0, 1.0)).unwrap(), Vector2::new(0.0, 0.0));
    assert_eq!(project_point(&p, &Point3::new(2.0, 4.0, 2.0)).unwrap(), Vector2::new(1.0, 2.0));
    assert!(matches!(
        project_point(&p, &Point3::new(0.0, 0.0, -1.0)),
        Err(Error::DepthNonPositive { .. })
    ));
    let j = pixel_displacement_jacobian(&p, &Point3::new(0.0, 0.0, 1.0)).unwrap();
    assert_eq!(j, Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
    let eps = 1e-3;
    let du = pixel_displacement_jacobian(&p, &Point3::new(1.0, 0.0, 2.0)).unwrap() * Vector3::new(0.0, 0.0, eps);
    assert!((du.x + eps / 4.0).abs() < 1e-15 && du.y == 0.0);
}

#[test]
fn face_patches() {
    let mesh = TriMesh::new(
        vec![Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 1.0), Point3::new(0.0, 1.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    let view = CameraView::new(canonical(), GrayImage::new(4, 4, vec![0.0; 16]).unwrap());
    let patch = face_image_triangle(&mesh, 0, 0, &view, 2.0).unwrap();
    assert_eq!(patch.corners, [Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)]);

    // Edge-on: the face contains the optical axis.
    let edge_on = TriMesh::new(
        vec![Point3::new(0.0, 0.0, 1.0), Point3::new(0.0, 0.0, 2.0), Point3::new(0.0, 1.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .unwrap();
    assert!(matches!(
        face_image_triangle(&edge_on, 0, 0, &view, 2.0),
        Err(Error::DegenerateProjection { .. })
    ));
}

prop_compose! {
    fn camera_and_point()(
        angles in prop::array::uniform3(-3.0f64..3.0),
        focal in 50.0f64..3000.0,
        center in prop::array::uniform2(0.0f64..1000.0),
        depth in 1.5f64..20.0,
        x in prop::array::uniform3(-1.0f64..1.0),
    ) -> (Projection, Point3<f64>) {
        let r = nalgebra::Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
        let k = nalgebra::Matrix3::new(focal, 0.0, center[0], 0.0, focal, center[1], 0.0, 0.0, 1.0);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
        rt.set_column(3, &Vector3::new(0.0, 0.0, depth));
        (Projection(k * rt), Point3::from(x))
    }
}

proptest! {
    #[test]
    fn jacobian_matches_finite_differences((p, x) in camera_and_point()) {
        let j = pixel_displacement_jacobian(&p, &x).unwrap();
        let h = 1e-6;
        let mut fd = Matrix2x3::zeros();
        for c in 0..3 {
            let mut d = Vector3::zeros();
            d[c] = h;
            fd.set_column(c, &((project_point(&p, &(x + d)).unwrap() - project_point(&p, &(x - d)).unwrap()) / (2.0 * h)));
        }
        prop_assert!((j - fd).norm() / j.norm() < 1e-5);
    }

    #[test]
    fn projection_is_scale_invariant((p, x) in camera_and_point(), s in 0.1f64..10.0) {
        let scaled = Projection(p.0 * s);
        let a = project_point(&p, &x).unwrap();
        let b = project_point(&scaled, &x).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * a.norm().max(1.0));
    }
}
