use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Thresholds and tuning for [`super::estimate_pose`]. Lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationParams {
    /// Fitness (mean squared correspondence distance, m²) below which the outer loop stops.
    pub rho_icp: f64,
    /// Maximum geodesic distance between a RANSAC orientation and `q0`, radians.
    pub rho_rot: f64,
    /// Prior orientation of the scanned object, serialised `[w, x, y, z]`.
    #[serde(with = "wxyz")]
    pub q0: UnitQuaternion<f64>,
    pub voxel_size: f64,
    pub outlier_mean_k: usize,
    pub outlier_std_ratio: f64,
    pub normal_k: usize,
    pub feature_radius: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_threshold: f64,
    /// Descriptor matches per scan keypoint that a RANSAC sample may draw from.
    pub ransac_candidates: usize,
    /// Minimum ratio of corresponding edge lengths for a sample to be evaluated.
    pub ransac_edge_similarity: f64,
    pub icp_max_iterations: usize,
    pub icp_max_correspondence_dist: f64,
    pub max_outer_loops: usize,
    /// Point the scan normals are oriented toward (the sensor); `None` uses the world origin.
    pub viewpoint: Option<[f64; 3]>,
}

impl Default for RegistrationParams {
    fn default() -> Self {
        Self {
            rho_icp: 5e-6 * 5e-6,
            rho_rot: std::f64::consts::FRAC_PI_4,
            q0: UnitQuaternion::identity(),
            voxel_size: 30e-6,
            outlier_mean_k: 16,
            outlier_std_ratio: 3.0,
            normal_k: 10,
            feature_radius: 150e-6,
            ransac_iterations: 4000,
            ransac_inlier_threshold: 30e-6,
            ransac_candidates: 3,
            ransac_edge_similarity: 0.9,
            icp_max_iterations: 60,
            icp_max_correspondence_dist: 150e-6,
            max_outer_loops: 10,
            viewpoint: None,
        }
    }
}

impl RegistrationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.rho_icp, "rho_icp"),
            (self.voxel_size, "voxel_size"),
            (self.feature_radius, "feature_radius"),
            (self.ransac_inlier_threshold, "ransac_inlier_threshold"),
            (self.icp_max_correspondence_dist, "icp_max_correspondence_dist"),
            (self.outlier_std_ratio, "outlier_std_ratio"),
        ];
        for (v, name) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rho_rot > 0.0 && self.rho_rot <= std::f64::consts::PI) {
            return Err(Error::invalid(format!("rho_rot must be in (0, π], got {}", self.rho_rot)));
        }
        let counts = [
            (self.outlier_mean_k, "outlier_mean_k"),
            (self.normal_k, "normal_k"),
            (self.ransac_iterations, "ransac_iterations"),
            (self.ransac_candidates, "ransac_candidates"),
            (self.icp_max_iterations, "icp_max_iterations"),
            (self.max_outer_loops, "max_outer_loops"),
        ];
        for (v, name) in counts {
            if v < 1 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.ransac_edge_similarity) {
            return Err(Error::invalid("ransac_edge_similarity must be in [0, 1)"));
        }
        Ok(())
    }
}

pub(crate) mod wxyz {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &UnitQuaternion<f64>, s: S) -> Result<S::Ok, S::Error> {
        let q = q.quaternion();
        [q.w, q.i, q.j, q.k].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<UnitQuaternion<f64>, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(d)?;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(serde::de::Error::custom("quaternion is not unit"));
        }
        Ok(UnitQuaternion::new_normalize(q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_valid_and_bounds_enforced() {
        let p = RegistrationParams::default();
        p.validate().unwrap();
        assert!(RegistrationParams { rho_rot: 0.0, ..p.clone() }.validate().is_err());
        assert!(RegistrationParams { rho_rot: 4.0, ..p.clone() }.validate().is_err());
        assert!(RegistrationParams { rho_icp: 0.0, ..p.clone() }.validate().is_err());
        assert!(RegistrationParams { max_outer_loops: 0, ..p.clone() }.validate().is_err());
        assert!(RegistrationParams { rho_rot: std::f64::consts::PI, ..p }.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let p = RegistrationParams::default();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"q0\":[1.0,0.0,0.0,0.0]"));
        let back: RegistrationParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
