use nalgebra::{DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::{Error, Pose, Result};

pub type JointConfig = DVector<f64>;

const PANDA_DH: &str = include_str!("../../data/panda.dh");

/// Serde helpers writing joint configurations as plain number arrays.
pub mod joints_serde {
    use super::JointConfig;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(q: &JointConfig, s: S) -> Result<S::Ok, S::Error> {
        q.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<JointConfig, D::Error> {
        Ok(JointConfig::from_vec(Vec::<f64>::deserialize(d)?))
    }

    /// The same for a list of configurations.
    pub mod list {
        use super::JointConfig;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(qs: &[JointConfig], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<&[f64]> = qs.iter().map(|q| q.as_slice()).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<JointConfig>, D::Error> {
            Ok(Vec::<Vec<f64>>::deserialize(d)?.into_iter().map(JointConfig::from_vec).collect())
        }
    }
}

/// One modified-DH row: `Rx(alpha) · Tx(a) · Rz(q + theta_offset) · Tz(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub theta_offset: f64,
    pub min: f64,
    pub max: f64,
}

impl DhJoint {
    fn transform(&self, q: f64) -> Isometry3<f64> {
        let pre = Isometry3::from_parts(
            Translation3::new(self.a, 0.0, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha),
        );
        // Rx(α)·Tx(a) = Tx(a)·Rx(α) because both act along x.
        let post = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, self.d),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), q + self.theta_offset),
        );
        pre * post
    }
}

/// Serial chain of revolute joints between a base pose and a tool frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub joints: Vec<DhJoint>,
    #[serde(default = "Pose::identity")]
    pub base_pose: Pose,
    /// Tool centre point relative to the last joint frame.
    #[serde(default = "Pose::identity")]
    pub tool: Pose,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self::panda()
    }
}

impl ArmModel {
    pub fn new(joints: Vec<DhJoint>, base_pose: Pose, tool: Pose) -> Result<Self> {
        let m = Self { joints, base_pose, tool };
        m.validate()?;
        Ok(m)
    }

    /// Seven-joint Panda with its hand TCP, from the bundled DH table.
    pub fn panda() -> Self {
        Self::parse_dh(PANDA_DH).expect("bundled DH table is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::invalid("arm needs at least one joint"));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let vals = [j.a, j.d, j.alpha, j.theta_offset, j.min, j.max];
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("joint {i} has non-finite parameters")));
            }
            if !(j.min < j.max) {
                return Err(Error::invalid(format!("joint {i} limits {} .. {} are empty", j.min, j.max)));
            }
        }
        if !self.base_pose.is_finite() || !self.tool.is_finite() {
            return Err(Error::invalid("base and tool poses must be finite"));
        }
        Ok(())
    }

    /// Reads a DH table: one joint per line `a d alpha theta_offset min max`, plus optional
    /// `tool x y z roll pitch yaw` and `base x y z roll pitch yaw` lines. `#` starts a comment.
    pub fn parse_dh(text: &str) -> Result<Self> {
        let mut joints = Vec::new();
        let mut tool = Pose::identity();
        let mut base = Pose::identity();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields: Vec<&str> = line.split_whitespace().collect();
            let keyword = match fields[0] {
                "tool" | "base" => Some(fields.remove(0)),
                _ => None,
            };
            let nums: Vec<f64> = fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad number {f:?}", n + 1))))
                .collect::<Result<_>>()?;
            if nums.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 values, got {}", n + 1, nums.len())));
            }
            match keyword {
                Some(k) => {
                    let pose = Pose::new(
                        Vector3::new(nums[0], nums[1], nums[2]),
                        UnitQuaternion::from_euler_angles(nums[3], nums[4], nums[5]),
                    );
                    if k == "tool" {
                        tool = pose;
                    } else {
                        base = pose;
                    }
                }
                None => joints.push(DhJoint {
                    a: nums[0],
                    d: nums[1],
                    alpha: nums[2],
                    theta_offset: nums[3],
                    min: nums[4],
                    max: nums[5],
                }),
            }
        }
        Self::new(joints, base, tool).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load_dh(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_dh(&std::fs::read_to_string(path)?)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn lower_limits(&self) -> JointConfig {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.min))
    }

    pub fn upper_limits(&self) -> JointConfig {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.max))
    }

    /// Centre of every joint range.
    pub fn mid_config(&self) -> JointConfig {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| 0.5 * (j.min + j.max)))
    }

    pub fn check_limits(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::invalid(format!("expected {} joint values, got {}", self.dof(), q.len())));
        }
        for (i, (v, j)) in q.iter().zip(&self.joints).enumerate() {
            if !(v.is_finite() && *v >= j.min && *v <= j.max) {
                return Err(Error::LimitViolation { joint: i, value: *v, min: j.min, max: j.max });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &JointConfig) -> JointConfig {
        DVector::from_iterator(self.dof(), q.iter().zip(&self.joints).map(|(v, j)| v.clamp(j.min, j.max)))
    }

    /// World pose of every joint frame (after its own rotation), then the tool.
    fn frames(&self, q: &JointConfig) -> (Vec<Isometry3<f64>>, Isometry3<f64>) {
        let mut t = self.base_pose.to_isometry();
        let mut frames = Vec::with_capacity(self.dof());
        for (j, v) in self.joints.iter().zip(q.iter()) {
            t *= j.transform(*v);
            frames.push(t);
        }
        let tip = t * self.tool.to_isometry();
        (frames, tip)
    }

    /// Tool pose in the world. Fails on wrong length or out-of-limit joints.
    pub fn fk(&self, q: &JointConfig) -> Result<Pose> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(q))
    }

    /// Forward kinematics without limit checks (used for perturbed, "true" joint values).
    pub fn fk_unchecked(&self, q: &JointConfig) -> Pose {
        Pose::from_isometry(&self.frames(q).1)
    }

    /// Geometric Jacobian at the tool point: rows 0..3 linear velocity, 3..6 angular, world frame.
    pub fn jacobian(&self, q: &JointConfig) -> DMatrix<f64> {
        let (frames, tip) = self.frames(q);
        let pe = tip.translation.vector;
        let mut jac = DMatrix::zeros(6, self.dof());
        for (i, f) in frames.iter().enumerate() {
            let z = f.rotation * Vector3::z();
            let lin = z.cross(&(pe - f.translation.vector));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
        }
        jac
    }

    /// Upper bound on tool displacement per radian of joint motion.
    pub fn reach_bound(&self) -> f64 {
        let links: f64 = self.joints.iter().map(|j| j.a.abs() + j.d.abs()).sum();
        links + self.tool.position.norm()
    }
}
