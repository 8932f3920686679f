//! Laser-scan guided dual-arm micro insertion.
//!
//! The crate simulates a sensing arm sweeping a laser line scanner over a
//! small scene, estimates part poses by RANSAC + ICP registration against
//! reference clouds, and plans low-amplitude relative corrections for an
//! assembling arm whose proprioception is accurate only to the millimetre.
//!
//! Module map:
//!
//! * [`geom`]: poses, point clouds, nearest-neighbour index, rigid fitting
//! * [`scansim`]: surface models, virtual line scanner, mesh sampling
//! * [`registration`]: preprocessing, FPFH features, RANSAC, ICP, gated pose estimation
//! * [`arm`]: 7-DoF kinematics, null-space biased IK, proprioception error model
//! * [`insertion`]: relative trajectory planning, execution and success check
//! * [`experiment`]: scenario configs, trials, Monte Carlo reports
//! * [`io`]: PLY clouds, STL/OBJ meshes

// `!(x > 0.0)` is how validation rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod error;
pub mod experiment;
pub mod geom;
pub mod insertion;
pub mod io;
pub mod registration;
pub mod scansim;
pub mod seed;

pub use error::{Error, Result};
pub use geom::{PointCloud, Pose, SpatialIndex};
