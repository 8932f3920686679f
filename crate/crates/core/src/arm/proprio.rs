use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ArmModel, JointConfig};
use crate::seed::{derive_labeled, rng};
use crate::{Error, Pose, Result};

/// Magnitudes of the joint-space error model, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModelConfig {
    /// Std of the fixed per-arm joint offsets (accuracy).
    pub bias_std: f64,
    /// Std of the fresh per-motion joint perturbation (repeatability).
    pub repeat_noise_std: f64,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        Self { bias_std: 2.5e-3, repeat_noise_std: 2e-5 }
    }
}

impl ErrorModelConfig {
    pub fn none() -> Self {
        Self { bias_std: 0.0, repeat_noise_std: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.bias_std, "bias_std"), (self.repeat_noise_std, "repeat_noise_std")] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative and finite")));
            }
        }
        Ok(())
    }
}

/// Result of commanding one joint configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    /// What the controller believes: forward kinematics of the command.
    pub reported: Pose,
    /// Where the tool really is.
    pub actual: Pose,
    pub actual_joints: JointConfig,
}

/// One arm instance's proprioception error: a fixed joint bias and a seeded noise stream.
#[derive(Debug, Clone)]
pub struct ProprioceptionError {
    joint_bias: JointConfig,
    repeat_noise_std: f64,
    noise: ChaCha8Rng,
}

fn gaussian(std: f64, n: usize, r: &mut ChaCha8Rng) -> JointConfig {
    if std == 0.0 {
        return DVector::zeros(n);
    }
    let d = Normal::new(0.0, std).expect("validated std");
    DVector::from_iterator(n, (0..n).map(|_| d.sample(r)))
}

impl ProprioceptionError {
    /// Draws the bias for a `dof`-joint arm from `seed`; the motion noise uses a separate stream.
    pub fn new(cfg: &ErrorModelConfig, dof: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let joint_bias = gaussian(cfg.bias_std, dof, &mut rng(derive_labeled(seed, "joint-bias", 0)));
        Ok(Self {
            joint_bias,
            repeat_noise_std: cfg.repeat_noise_std,
            noise: rng(derive_labeled(seed, "repeat-noise", 0)),
        })
    }

    pub fn with_bias(joint_bias: JointConfig, repeat_noise_std: f64, seed: u64) -> Self {
        Self { joint_bias, repeat_noise_std, noise: rng(derive_labeled(seed, "repeat-noise", 0)) }
    }

    pub fn perfect(dof: usize) -> Self {
        Self::with_bias(DVector::zeros(dof), 0.0, 0)
    }

    pub fn joint_bias(&self) -> &JointConfig {
        &self.joint_bias
    }

    pub fn repeat_noise_std(&self) -> f64 {
        self.repeat_noise_std
    }

    /// Moves to `commanded`. The real joints are off by the bias plus fresh noise.
    pub fn execute_motion(&mut self, arm: &ArmModel, commanded: &JointConfig) -> Result<Motion> {
        let reported = arm.fk(commanded)?;
        let noise = gaussian(self.repeat_noise_std, arm.dof(), &mut self.noise);
        let actual_joints = commanded + &self.joint_bias + noise;
        let actual = arm.fk_unchecked(&actual_joints);
        Ok(Motion { reported, actual, actual_joints })
    }

    /// One continuous motion through several configurations: a single noise draw applies to all.
    pub fn execute_path(&mut self, arm: &ArmModel, path: &[JointConfig]) -> Result<Vec<Motion>> {
        for q in path {
            arm.check_limits(q)?;
        }
        let noise = gaussian(self.repeat_noise_std, arm.dof(), &mut self.noise);
        Ok(path
            .iter()
            .map(|q| {
                let actual_joints = q + &self.joint_bias + &noise;
                Motion { reported: arm.fk_unchecked(q), actual: arm.fk_unchecked(&actual_joints), actual_joints }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> JointConfig {
        DVector::from_vec(vec![0.1, 0.3, -0.2, -2.0, 0.1, 2.3, 0.8])
    }

    #[test]
    fn perfect_arm_reports_truth() {
        let arm = ArmModel::panda();
        let m = ProprioceptionError::perfect(7).execute_motion(&arm, &q()).unwrap();
        assert_eq!(m.reported, m.actual);
    }

    #[test]
    fn bias_only_is_repeatable() {
        let arm = ArmModel::panda();
        let cfg = ErrorModelConfig { bias_std: 8e-4, repeat_noise_std: 0.0 };
        let mut e = ProprioceptionError::new(&cfg, 7, 3).unwrap();
        let a = e.execute_motion(&arm, &q()).unwrap();
        let b = e.execute_motion(&arm, &q()).unwrap();
        assert_eq!(a.actual, b.actual);
        assert!((a.actual.position - a.reported.position).norm() > 1e-5);
    }

    #[test]
    fn reproducible_from_seed() {
        let arm = ArmModel::panda();
        let cfg = ErrorModelConfig::default();
        let run = || {
            let mut e = ProprioceptionError::new(&cfg, 7, 17).unwrap();
            (0..3).map(|_| e.execute_motion(&arm, &q()).unwrap().actual).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn out_of_limits_rejected() {
        let arm = ArmModel::panda();
        let mut bad = q();
        bad[3] = 0.5;
        let mut e = ProprioceptionError::perfect(7);
        assert!(matches!(e.execute_motion(&arm, &bad), Err(Error::LimitViolation { joint: 3, .. })));
    }
}
