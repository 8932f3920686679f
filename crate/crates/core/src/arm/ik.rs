use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use super::{ArmModel, JointConfig};
use crate::{Error, Pose, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams {
    /// Damping λ of the least-squares inverse `Jᵀ(JJᵀ + λ²I)⁻¹`.
    pub damping: f64,
    /// Gain of the pull toward the bias configuration inside the task null space.
    pub null_space_gain: f64,
    pub max_iterations: usize,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Largest joint step per iteration, radians (infinity norm).
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            null_space_gain: 0.1,
            max_iterations: 500,
            position_tolerance: 1e-6,
            orientation_tolerance: 1e-5,
            max_step: 0.2,
        }
    }
}

/// Position error and orientation error (rotation vector) from `current` to `target`, world frame.
pub(crate) fn task_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.position - current.position;
    let dr = (target.orientation * current.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

fn damped_pinv(j: &DMatrix<f64>, damping: f64) -> DMatrix<f64> {
    let jjt = j * j.transpose() + DMatrix::identity(j.nrows(), j.nrows()) * (damping * damping);
    let inv = match jjt.clone().cholesky() {
        Some(c) => c.inverse(),
        None => jjt.try_inverse().unwrap_or_else(|| DMatrix::identity(j.nrows(), j.nrows())),
    };
    j.transpose() * inv
}

/// Damped least-squares IK with a null-space pull toward `bias`:
/// `Δq = J⁺e + (I − J⁺J)·k·(q_bias − q)`, clamped to the joint limits after every step.
///
/// Stops as soon as the task error is within tolerance, so any remaining null-space
/// distance to `bias` is left in place.
pub fn ik(arm: &ArmModel, target: &Pose, bias: &JointConfig, start: &JointConfig, params: &IkParams) -> Result<JointConfig> {
    arm.check_limits(start)?;
    if bias.len() != arm.dof() {
        return Err(Error::invalid(format!("bias has {} joints, arm has {}", bias.len(), arm.dof())));
    }
    let n = arm.dof();
    let mut q = start.clone();
    let mut err = task_error(&arm.fk_unchecked(&q), target);
    for _ in 0..params.max_iterations {
        if err.fixed_rows::<3>(0).norm() < params.position_tolerance && err.fixed_rows::<3>(3).norm() < params.orientation_tolerance {
            arm.check_limits(&q)?;
            return Ok(q);
        }
        let j = arm.jacobian(&q);
        let pinv = damped_pinv(&j, params.damping);
        let e = DVector::from_column_slice(err.as_slice());
        // Projector from the undamped inverse so the posture term cannot leak into the task.
        let exact = j.clone().pseudo_inverse(1e-9).unwrap_or_else(|_| pinv.clone());
        let null = DMatrix::identity(n, n) - &exact * &j;
        let mut dq = &pinv * e + null * ((bias - &q) * params.null_space_gain);
        let largest = dq.amax();
        if largest > params.max_step {
            dq *= params.max_step / largest;
        }
        q = arm.clamp(&(q + dq));
        err = task_error(&arm.fk_unchecked(&q), target);
    }
    if err.fixed_rows::<3>(0).norm() < params.position_tolerance && err.fixed_rows::<3>(3).norm() < params.orientation_tolerance {
        return Ok(q);
    }
    Err(Error::UnreachableTarget {
        iterations: params.max_iterations,
        position_error: err.fixed_rows::<3>(0).norm(),
        orientation_error: err.fixed_rows::<3>(3).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use nalgebra::Vector3;
    use rand::Rng;

    fn random_config(arm: &ArmModel, r: &mut impl Rng, margin: f64) -> JointConfig {
        DVector::from_iterator(
            arm.dof(),
            arm.joints.iter().map(|j| {
                let span = j.max - j.min;
                r.random_range(j.min + margin * span..j.max - margin * span)
            }),
        )
    }

    #[test]
    fn fixed_point() {
        let arm = ArmModel::panda();
        let mut r = rng(1);
        for _ in 0..20 {
            let q = random_config(&arm, &mut r, 0.05);
            let t = arm.fk(&q).unwrap();
            let s = ik(&arm, &t, &q, &q, &IkParams::default()).unwrap();
            assert!((s - &q).amax() < 1e-8);
        }
    }

    #[test]
    fn unreachable() {
        let arm = ArmModel::panda();
        let q = arm.mid_config();
        let far = Pose::from_translation(Vector3::new(3.0, 0.0, 0.5));
        let p = IkParams { max_iterations: 50, ..Default::default() };
        assert!(matches!(ik(&arm, &far, &q, &q, &p), Err(Error::UnreachableTarget { iterations: 50, .. })));
    }

    #[test]
    fn bias_selects_posture() {
        let arm = ArmModel::panda();
        let ic1 = DVector::from_vec(vec![0.0, 0.15, 0.0, -2.4, 0.0, 2.6, 0.8]);
        let target = arm.fk(&ic1).unwrap();
        // With joint 2 near zero, joints 1 and 3 are almost coaxial: turning one and
        // counter-turning the other keeps the tool pose.
        let mut ic2 = ic1.clone();
        ic2[0] += std::f64::consts::FRAC_PI_2;
        ic2[2] -= std::f64::consts::FRAC_PI_2;
        let p = IkParams::default();
        let s1 = ik(&arm, &target, &ic1, &ic1, &p).unwrap();
        let s2 = ik(&arm, &target, &ic2, &ic2, &p).unwrap();
        assert!((&s1 - &ic1).norm() < (&s1 - &ic2).norm());
        assert!((&s2 - &ic2).norm() < (&s2 - &ic1).norm());
        assert!((&s1 - &s2).norm() > 1.0);
        for s in [&s1, &s2] {
            let e = task_error(&arm.fk(s).unwrap(), &target);
            assert!(e.fixed_rows::<3>(0).norm() < 1e-6 && e.fixed_rows::<3>(3).norm() < 1e-5);
        }
    }

    #[test]
    fn bias_never_hurts() {
        let arm = ArmModel::panda();
        let mut r = rng(5);
        let free = IkParams { null_space_gain: 0.0, ..Default::default() };
        for _ in 0..20 {
            let goal = random_config(&arm, &mut r, 0.2);
            let target = arm.fk(&goal).unwrap();
            let start = arm.clamp(&(&goal + DVector::from_fn(7, |_, _| r.random_range(-0.2..0.2))));
            let bias = arm.clamp(&(&goal + DVector::from_fn(7, |_, _| r.random_range(-0.3..0.3))));
            let (Ok(b), Ok(f)) = (ik(&arm, &target, &bias, &start, &IkParams::default()), ik(&arm, &target, &bias, &start, &free)) else {
                continue;
            };
            assert!((&b - &bias).norm() <= (&f - &bias).norm() + 1e-9);
        }
    }
}
