use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};

use super::Pose;

/// Least-squares rigid transform `T` minimising `Σ w‖T·src_i − dst_i‖²` (Kabsch/Umeyama without scale).
///
/// Returns `None` for fewer than three pairs or mismatched lengths.
pub fn fit_rigid(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Option<Pose> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut fix = Matrix3::identity();
        fix[(2, 2)] = -1.0;
        r = v_t.transpose() * fix * u.transpose();
    }
    let rot = UnitQuaternion::from_matrix(&r);
    if !rot.coords.iter().all(|c| c.is_finite()) {
        return None;
    }
    Some(Pose::new(cd - rot * cs, rot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_known_transform() {
        let truth = Pose::new(
            Vector3::new(0.01, -0.02, 0.003),
            UnitQuaternion::from_euler_angles(0.2, 0.4, -0.7),
        );
        let src: Vec<_> = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 0.0, 3.0],
            [0.5, 0.1, -0.4],
        ]
        .iter()
        .map(|a| Point3::new(a[0], a[1], a[2]))
        .collect();
        let dst: Vec<_> = src.iter().map(|p| truth.transform_point(p)).collect();
        let est = fit_rigid(&src, &dst).unwrap();
        assert_abs_diff_eq!(est.position, truth.position, epsilon = 1e-12);
        assert_abs_diff_eq!(est.orientation.angle_to(&truth.orientation), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn planar_points_give_proper_rotation() {
        let src: Vec<_> = (0..6).map(|i| Point3::new(i as f64, (i * i) as f64 * 0.1, 0.0)).collect();
        let truth = Pose::from_rotation(UnitQuaternion::from_euler_angles(3.0, 0.0, 0.5));
        let dst: Vec<_> = src.iter().map(|p| truth.transform_point(p)).collect();
        let est = fit_rigid(&src, &dst).unwrap();
        assert!(est.orientation.to_rotation_matrix().matrix().determinant() > 0.0);
        for (s, d) in src.iter().zip(&dst) {
            assert_abs_diff_eq!(est.transform_point(s), *d, epsilon = 1e-9);
        }
    }

    #[test]
    fn too_few_pairs() {
        let p = [Point3::origin(); 2];
        assert!(fit_rigid(&p, &p).is_none());
    }
}
