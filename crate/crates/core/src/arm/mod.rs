//! Serial-arm kinematics, null-space biased IK and the proprioception error model.
//!
//! Joint-space errors are split into a fixed per-arm bias (accuracy) and a fresh
//! per-motion perturbation (repeatability). Because the bias is fixed in joint space,
//! its Cartesian effect depends on the configuration the arm reaches the target in.

mod ik;
mod model;
mod proprio;

pub use ik::{ik, IkParams};
pub use model::{joints_serde, ArmModel, DhJoint, JointConfig};
pub use proprio::{ErrorModelConfig, Motion, ProprioceptionError};
