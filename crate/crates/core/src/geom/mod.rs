//! Rigid-body geometry shared by every other module.

mod cloud;
mod index;
mod pose;
mod rigid;

pub use cloud::PointCloud;
pub use index::SpatialIndex;
pub use pose::{orientation_distance, quat_distance, transform_cloud, Pose};
pub use rigid::fit_rigid;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type UnitQuaternion = nalgebra::UnitQuaternion<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type Matrix4 = nalgebra::Matrix4<f64>;
