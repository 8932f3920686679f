use nalgebra::{Isometry3, Matrix4, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-6;

/// Rigid pose: position in metres and a unit orientation quaternion.
///
/// Serialised as `{"position": [x, y, z], "orientation": [w, x, y, z]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    /// (w, x, y, z)
    orientation: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        let [w, x, y, z] = r.orientation;
        let q = Quaternion::new(w, x, y, z);
        if !q.coords.iter().all(|c| c.is_finite()) || (q.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("orientation {:?} is not a unit quaternion", r.orientation)));
        }
        if !r.position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("non-finite position"));
        }
        // Already-unit input is kept bit for bit so saved poses reload exactly.
        let orientation = if (q.norm() - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Pose::new(Vector3::from(r.position), orientation))
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.orientation.quaternion();
        PoseRepr {
            position: p.position.into(),
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(t, UnitQuaternion::identity())
    }

    pub fn from_rotation(r: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), r)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// Homogeneous 4×4 matrix.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        self.to_isometry().to_homogeneous()
    }

    /// `self ∘ other`, i.e. the pose of `T(self)·T(other)`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let orientation = renormalize(self.orientation * other.orientation);
        Pose::new(self.position + self.orientation * other.position, orientation)
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose::new(-(inv * self.position), inv)
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.orientation * p.coords + self.position)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.orientation.inverse() * (p.coords - self.position))
    }

    /// Rotation angle of the orientation, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        orientation_distance(&self.orientation, &UnitQuaternion::identity())
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite()) && self.orientation.coords.iter().all(|c| c.is_finite())
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Geodesic distance between two orientations on S³, `2·acos|⟨q1, q2⟩|`.
///
/// Both inputs must be unit-norm within 1e-6.
pub fn quat_distance(q1: &Quaternion<f64>, q2: &Quaternion<f64>) -> Result<f64> {
    for q in [q1, q2] {
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("quaternion norm {n} is not unit")));
        }
    }
    Ok(geodesic(q1.coords.dot(&q2.coords)))
}

/// Infallible [`quat_distance`] for values already known to be unit.
pub fn orientation_distance(q1: &UnitQuaternion<f64>, q2: &UnitQuaternion<f64>) -> f64 {
    geodesic(q1.coords.dot(&q2.coords))
}

fn geodesic(dot: f64) -> f64 {
    2.0 * dot.abs().min(1.0).acos()
}

/// Applies `pose` to every point (and rotates normals).
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> PointCloud {
    let points = cloud.points().iter().map(|p| pose.transform_point(p)).collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| pose.orientation * n).collect());
    PointCloud::from_parts_unchecked(points, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn axis_angle_oracle(q: &Quaternion<f64>) -> f64 {
        // Angle of R from the trace: cos θ = (tr R − 1) / 2.
        let r = UnitQuaternion::new_normalize(*q).to_rotation_matrix();
        let c = ((r.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    #[test]
    fn quat_distance_examples() {
        let id = Quaternion::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(quat_distance(&id, &id).unwrap(), 0.0);
        let z180 = Quaternion::new(0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(quat_distance(&id, &z180).unwrap(), PI, epsilon = 1e-15);
        let x90 = Quaternion::new(SQRT_2 / 2.0, SQRT_2 / 2.0, 0.0, 0.0);
        let d = quat_distance(&id, &x90).unwrap();
        assert_abs_diff_eq!(d, axis_angle_oracle(&x90), epsilon = 1e-12);
        assert_abs_diff_eq!(d, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn quat_distance_rejects_non_unit() {
        let id = Quaternion::new(1.0, 0.0, 0.0, 0.0);
        let bad = Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(matches!(quat_distance(&id, &bad), Err(Error::InvalidArgument(_))));
        let nan = Quaternion::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(quat_distance(&nan, &id).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let p = Pose::new(
            Vector3::new(0.1, -0.2, 0.3),
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
        );
        let c = Pose::identity().compose(&p);
        assert_abs_diff_eq!(c.position, p.position, epsilon = 0.0);
        let i = p.compose(&p.inverse());
        assert_abs_diff_eq!(i.position.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(i.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_cloud_examples() {
        let c = PointCloud::new(vec![Point3::origin()]).unwrap();
        let t = transform_cloud(&c, &Pose::from_translation(Vector3::x()));
        assert_eq!(t.points()[0], Point3::new(1.0, 0.0, 0.0));

        let c = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let rz = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2));
        let out = transform_cloud(&c, &rz).points()[0];
        // Rotation-matrix oracle: Rz(90°) = [[0,-1,0],[1,0,0],[0,0,1]].
        let m = nalgebra::Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let expect = m * Vector3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(out.coords, expect, epsilon = 1e-12);

        let same = transform_cloud(&c, &Pose::identity());
        assert_eq!(same.points(), c.points());
    }

    #[test]
    fn json_uses_wxyz() {
        let p = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI));
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"orientation\":[6.123233995736766e-17,0.0,0.0,1.0]"), "{s}");
        let back: Pose = serde_json::from_str(&s).unwrap();
        assert_abs_diff_eq!(orientation_distance(&back.orientation, &p.orientation), 0.0, epsilon = 1e-12);
        assert!(serde_json::from_str::<Pose>(r#"{"position":[0,0,0],"orientation":[2,0,0,0]}"#).is_err());
    }
}
