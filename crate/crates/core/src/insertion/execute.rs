use super::trajectory::{apply_offset, Trajectory};
use crate::arm::{ik, ArmModel, IkParams, JointConfig, ProprioceptionError};
use crate::{Error, Pose, Result};

#[derive(Debug, Clone)]
pub struct Execution {
    /// Ground-truth tool pose after the last waypoint.
    pub final_actual: Pose,
    /// Tool pose the controller believes it reached.
    pub final_reported: Pose,
    /// Commanded configuration per waypoint.
    pub joint_path: Vec<JointConfig>,
}

/// Tracks `traj` as offsets from the arm's believed pose at `start`.
///
/// Each waypoint target is `reported(start)` moved by the waypoint's cumulative offset; IK
/// starts from the previous command and is pulled toward `ic_bias`. Every waypoint is a
/// separate commanded motion.
pub fn execute_insertion(
    arm: &ArmModel,
    err: &mut ProprioceptionError,
    traj: &Trajectory,
    start: &JointConfig,
    ic_bias: &JointConfig,
    params: &IkParams,
) -> Result<Execution> {
    traj.validate()?;
    let reported_start = arm.fk(start)?;
    let mut q = start.clone();
    let mut joint_path = Vec::with_capacity(traj.len());
    let mut last = None;
    for (index, offset) in traj.offsets().iter().enumerate() {
        let target = apply_offset(&reported_start, offset);
        q = ik(arm, &target, ic_bias, &q, params).map_err(|e| Error::Waypoint { index, source: Box::new(e) })?;
        last = Some(err.execute_motion(arm, &q).map_err(|e| Error::Waypoint { index, source: Box::new(e) })?);
        joint_path.push(q.clone());
    }
    let m = last.expect("trajectory has waypoints");
    Ok(Execution { final_actual: m.actual, final_reported: m.reported, joint_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insertion::plan_relative_trajectory;
    use nalgebra::{DVector, Vector3};

    #[test]
    fn zero_offset_zero_error() {
        let arm = ArmModel::panda();
        let q = DVector::from_vec(vec![0.1, 0.3, -0.2, -2.0, 0.1, 2.3, 0.8]);
        let p = arm.fk(&q).unwrap();
        let traj = plan_relative_trajectory(&p, &p, 10, 1.0).unwrap();
        let mut err = ProprioceptionError::perfect(7);
        let e = execute_insertion(&arm, &mut err, &traj, &q, &q, &IkParams::default()).unwrap();
        assert!((e.final_actual.position - p.position).norm() < 1e-12);
        assert_eq!(e.joint_path.len(), 10);
    }

    #[test]
    fn perfect_arm_follows_correction() {
        let arm = ArmModel::panda();
        let q = DVector::from_vec(vec![0.1, 0.3, -0.2, -2.0, 0.1, 2.3, 0.8]);
        let p = arm.fk(&q).unwrap();
        let goal = Pose::new(p.position + Vector3::new(1e-3, -5e-4, 2e-4), p.orientation);
        let traj = plan_relative_trajectory(&p, &goal, 20, 1.0).unwrap();
        let mut err = ProprioceptionError::perfect(7);
        let e = execute_insertion(&arm, &mut err, &traj, &q, &q, &IkParams::default()).unwrap();
        assert!((e.final_actual.position - goal.position).norm() < 1e-6);
    }

    #[test]
    fn ik_failure_carries_waypoint() {
        let arm = ArmModel::panda();
        let q = DVector::from_vec(vec![0.1, 0.3, -0.2, -2.0, 0.1, 2.3, 0.8]);
        let p = arm.fk(&q).unwrap();
        let goal = Pose::new(p.position + Vector3::new(5.0, 0.0, 0.0), p.orientation);
        let traj = plan_relative_trajectory(&p, &goal, 5, 1.0).unwrap();
        let params = IkParams { max_iterations: 30, ..Default::default() };
        let r = execute_insertion(&arm, &mut ProprioceptionError::perfect(7), &traj, &q, &q, &params);
        assert!(matches!(r, Err(Error::Waypoint { index: 1, .. })));
    }
}
