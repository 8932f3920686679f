//! Pose estimation by point cloud registration.
//!
//! The outer loop alternates a coarse feature-based RANSAC alignment, an
//! orientation gate against a prior `q0`, and point-to-point ICP, keeping
//! the best-fitness estimate until it drops below `rho_icp`.

mod features;
mod icp;
mod normals;
mod params;
mod pipeline;
mod preprocess;
mod ransac;

pub use features::{compute_features, pair_features, FeatureCloud, DESCRIPTOR_LEN};
pub use icp::{icp_refine, IcpResult};
pub use normals::{estimate_normals, Viewpoint};
pub use params::RegistrationParams;
pub use pipeline::{estimate_pose, Registrar, RegistrationResult};
pub use preprocess::{preprocess, remove_statistical_outliers, voxel_downsample};
pub use ransac::{ransac_register, RansacResult};
