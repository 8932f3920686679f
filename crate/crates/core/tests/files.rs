use nalgebra::{Point3, UnitQuaternion, Vector3};

use microinsert::arm::ArmModel;
use microinsert::experiment::{make_reference_cloud_file, CropBox};
use microinsert::insertion::plan_relative_trajectory;
use microinsert::io::{write_ascii_stl, PlyFormat};
use microinsert::scansim::SurfaceModel;
use microinsert::{PointCloud, Pose};

fn cube_stl(dir: &std::path::Path) -> std::path::PathBuf {
    let mesh = SurfaceModel::Box { half_extents: [0.5; 3] }.tessellate(8);
    let path = dir.join("cube.stl");
    write_ascii_stl(&mesh, "cube", std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn ply_files_round_trip_in_both_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let pts = vec![Point3::new(0.1, -2.5e-6, 3.0), Point3::new(1.0 / 3.0, 7.0, -0.0), Point3::new(f64::MIN_POSITIVE, 1e300, -1e-300)];
    let nrm = vec![Vector3::z(), Vector3::x(), Vector3::new(0.6, 0.8, 0.0)];
    let cloud = PointCloud::with_normals(pts, Some(nrm)).unwrap();
    for (name, fmt) in [("a.ply", PlyFormat::Ascii), ("b.ply", PlyFormat::BinaryLittleEndian)] {
        let path = dir.path().join(name);
        cloud.save_ply(&path, fmt).unwrap();
        assert_eq!(PointCloud::load_ply(&path).unwrap(), cloud, "{name}");
    }
}

#[test]
fn sampled_reference_files_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let stl = cube_stl(dir.path());
    let (a, b) = (dir.path().join("a.ply"), dir.path().join("b.ply"));
    let ca = make_reference_cloud_file(&stl, &a, 3000, 11, None).unwrap();
    make_reference_cloud_file(&stl, &b, 3000, 11, None).unwrap();
    assert_eq!(ca.len(), 3000);
    assert!(ca.has_normals());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let top = CropBox { min: [-1.0, -1.0, 0.5 - 1e-12], max: [1.0, 1.0, 1.0] };
    let cropped = make_reference_cloud_file(&stl, &a, 3000, 11, Some(&top)).unwrap();
    assert!(!cropped.is_empty());
    assert!(cropped.points().iter().all(|p| p.z >= 0.5 - 1e-12));
}

#[test]
fn unreadable_meshes_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n").unwrap();
    assert!(make_reference_cloud_file(&bad, dir.path().join("o.ply"), 10, 1, None).is_err());
    assert!(make_reference_cloud_file(dir.path().join("none.stl"), dir.path().join("o.ply"), 10, 1, None).is_err());
}

#[test]
fn dh_table_file_matches_builtin_panda() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/panda.dh");
    assert_eq!(ArmModel::load_dh(path).unwrap(), ArmModel::panda());
}

#[test]
fn trajectory_csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = Pose::new(Vector3::new(0.4, 0.1, 0.3), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
    let b = Pose::new(Vector3::new(0.401, 0.099, 0.2995), UnitQuaternion::from_euler_angles(0.1, 0.21, 0.29));
    let t = plan_relative_trajectory(&a, &b, 20, 2.0).unwrap();
    let path = dir.path().join("traj.csv");
    t.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,x,y,z,qw,qx,qy,qz"));
    let back = microinsert::insertion::Trajectory::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.len(), t.len());
    for (p, q) in back.waypoints.iter().zip(&t.waypoints) {
        assert_eq!(p.position, q.position);
        assert!(p.orientation.angle_to(&q.orientation) < 1e-15);
    }
}
