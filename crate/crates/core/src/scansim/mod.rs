//! Virtual laser line scanner.
//!
//! Each profile fans `points_per_profile` parallel rays across the laser
//! line (sensor x axis), travelling along sensor +z; successive profiles
//! are taken at poses along the sweep. Hits are perturbed along the ray by
//! Gaussian depth noise and expressed in the base frame through the
//! *assumed* sensor pose, while the rays themselves are cast from the
//! *actual* pose. The difference between the two is how calibration and
//! arm errors enter the cloud.

mod mesh;
mod sampling;
mod scanner;
mod scene;
mod surface;

pub use mesh::TriangleMesh;
pub use sampling::{sample_mesh, SAMPLING_SEGMENTS};
pub use scanner::{
    linear_sweep, scan_profile, sweep_scan, sweep_scan_tracked, CalibrationError, LabeledCloud, ProfilePose,
    ProfileSample, ScanProfile, ScannerConfig,
};
pub use scene::{Hit, Scene, ScenePart};
pub use surface::SurfaceModel;

/// Minimum triangle area in m² for a triangle to count as non-degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-18;
