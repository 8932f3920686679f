//! Relative corrective trajectories, their execution on an imperfect arm, and the
//! geometric insertion success check.

mod check;
mod execute;
mod trajectory;

pub use check::{check_insertion, ellipse_signed_distance, InsertedObject, InsertionCheck, InsertionTarget};
pub use execute::{execute_insertion, Execution};
pub use trajectory::{apply_offset, plan_relative_trajectory, Trajectory};
