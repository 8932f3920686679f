use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::{Error, Pose, Result};

/// Time-stamped pose sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub timestamps: Vec<f64>,
    pub waypoints: Vec<Pose>,
}

/// Applies a world-frame offset `(Δx, ΔR)` about the pose's own origin: `(x + Δx, ΔR·R)`.
pub fn apply_offset(pose: &Pose, offset: &Pose) -> Pose {
    Pose::new(pose.position + offset.position, offset.orientation * pose.orientation)
}

/// Offset taking `from` to `to` in the sense of [`apply_offset`].
fn offset_between(from: &Pose, to: &Pose) -> Pose {
    Pose::new(to.position - from.position, to.orientation * from.orientation.inverse())
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, waypoints: Vec<Pose>) -> Result<Self> {
        let t = Self { timestamps, waypoints };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::invalid("trajectory needs at least two waypoints"));
        }
        if self.timestamps.len() != self.waypoints.len() {
            return Err(Error::invalid("timestamp and waypoint counts differ"));
        }
        if !self.timestamps.iter().all(|t| t.is_finite()) || self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("timestamps must be finite and strictly increasing"));
        }
        if let Some(i) = self
            .waypoints
            .iter()
            .position(|p| !p.is_finite() || (p.orientation.norm() - 1.0).abs() > 1e-9)
        {
            return Err(Error::invalid(format!("waypoint {i} is not a valid pose")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Cumulative offsets of every waypoint from the first.
    pub fn offsets(&self) -> Vec<Pose> {
        let first = &self.waypoints[0];
        self.waypoints.iter().map(|p| offset_between(first, p)).collect()
    }

    /// Offsets between consecutive waypoints; there is one fewer than waypoints.
    pub fn increments(&self) -> Vec<Pose> {
        self.waypoints.windows(2).map(|w| offset_between(&w[0], &w[1])).collect()
    }

    /// Writes `t,x,y,z,qw,qx,qy,qz` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "y", "z", "qw", "qx", "qy", "qz"])?;
        for (t, p) in self.timestamps.iter().zip(&self.waypoints) {
            let q = p.orientation.quaternion();
            out.serialize([*t, p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut timestamps = Vec::new();
        let mut waypoints = Vec::new();
        for row in rdr.deserialize::<[f64; 8]>() {
            let [t, x, y, z, qw, qx, qy, qz] = row?;
            let q = nalgebra::Quaternion::new(qw, qx, qy, qz);
            if (q.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::Parse(format!("row at t={t}: quaternion is not unit")));
            }
            timestamps.push(t);
            waypoints.push(Pose::new(Vector3::new(x, y, z), UnitQuaternion::new_normalize(q)));
        }
        Self::new(timestamps, waypoints)
    }
}

/// Cubic ease `3τ² − 2τ³`: zero velocity at both ends.
fn ease(tau: f64) -> f64 {
    tau * tau * (3.0 - 2.0 * tau)
}

/// `steps` poses from `p_obj` to `p_target` over `duration` seconds: cubic position profile
/// with zero end velocities, slerped orientation. Endpoints are copied exactly.
pub fn plan_relative_trajectory(p_obj: &Pose, p_target: &Pose, steps: usize, duration: f64) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::invalid("trajectory needs at least two steps"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid("duration must be positive"));
    }
    let last = steps - 1;
    let dx = p_target.position - p_obj.position;
    let mut timestamps = Vec::with_capacity(steps);
    let mut waypoints = Vec::with_capacity(steps);
    for k in 0..steps {
        let tau = k as f64 / last as f64;
        timestamps.push(tau * duration);
        let pose = if k == 0 {
            *p_obj
        } else if k == last {
            *p_target
        } else {
            let s = ease(tau);
            let q = p_obj
                .orientation
                .try_slerp(&p_target.orientation, s, 1e-12)
                .unwrap_or(p_obj.orientation);
            Pose::new(p_obj.position + dx * s, q)
        };
        waypoints.push(pose);
    }
    Trajectory::new(timestamps, waypoints)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_correction() {
        let p = Pose::new(Vector3::new(0.3, 0.1, 0.2), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        let t = plan_relative_trajectory(&p, &p, 10, 1.0).unwrap();
        assert!(t.waypoints.iter().all(|w| *w == p));
        for o in t.offsets() {
            assert_eq!(o.position, Vector3::zeros());
            assert!(o.orientation.angle() < 1e-15);
        }
    }

    #[test]
    fn z_translation_profile() {
        let a = Pose::identity();
        let b = Pose::from_translation(Vector3::new(0.0, 0.0, 300e-6));
        let t = plan_relative_trajectory(&a, &b, 50, 2.0).unwrap();
        assert_eq!(t.waypoints[49].position, b.position);
        let max_step = t.waypoints.windows(2).map(|w| w[1].position.z - w[0].position.z).fold(0.0, f64::max);
        assert!(t.waypoints.windows(2).all(|w| w[1].position.z > w[0].position.z));
        assert!(max_step < 2.0 * 300e-6 / 49.0);
        assert_eq!(t.timestamps[49], 2.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = Pose::identity();
        assert!(plan_relative_trajectory(&p, &p, 1, 1.0).is_err());
        assert!(plan_relative_trajectory(&p, &p, 5, 0.0).is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![p, p]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let a = Pose::identity();
        let b = Pose::new(Vector3::new(1e-3, -2e-4, 5e-4), UnitQuaternion::from_euler_angles(0.01, 0.0, -0.02));
        let t = plan_relative_trajectory(&a, &b, 7, 1.5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,x,y,z,qw,qx,qy,qz\n"));
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.timestamps, t.timestamps);
        for (p, q) in back.waypoints.iter().zip(&t.waypoints) {
            assert_eq!(p.position, q.position);
        }
    }
}
