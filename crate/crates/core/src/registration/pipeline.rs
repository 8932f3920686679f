use nalgebra::{Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::features::{compute_features, FeatureCloud};
use super::icp::icp_indexed;
use super::normals::{estimate_normals, Viewpoint};
use super::preprocess::{preprocess, voxel_downsample};
use super::ransac::{match_descriptors, ransac_with};
use super::RegistrationParams;
use crate::geom::orientation_distance;
use crate::seed::derive_seed;
use crate::{Error, PointCloud, Pose, Result, SpatialIndex};

/// Sentinel the best fitness starts from.
const INITIAL_FITNESS: f64 = 1e6;

/// Outcome of [`estimate_pose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Reference (object) frame expressed in the scan frame.
    pub pose: Pose,
    /// Mean squared ICP correspondence distance, m².
    pub fitness: f64,
    pub outer_loops_used: usize,
    pub ransac_inlier_fraction: f64,
    /// Best fitness after each outer loop.
    pub fitness_trace: Vec<f64>,
}

/// Reference cloud prepared once for repeated registrations.
#[derive(Debug, Clone)]
pub struct Registrar {
    params: RegistrationParams,
    /// Full reference, for inlier counting and ICP.
    dense: SpatialIndex,
    features: FeatureCloud,
}

/// PCA normals flipped to agree with the normals the cloud already carries.
fn reestimate_normals(cloud: &PointCloud, k: usize) -> PointCloud {
    let est = estimate_normals(cloud, k, Viewpoint::Point(Point3::origin()));
    let Some(given) = cloud.normals() else { return est };
    let normals: Vec<Vector3<f64>> = est
        .normals()
        .expect("estimated")
        .iter()
        .zip(given)
        .map(|(n, g)| if n.dot(g) < 0.0 { -n } else { *n })
        .collect();
    PointCloud::from_parts_unchecked(cloud.points().to_vec(), Some(normals))
}

impl Registrar {
    /// Downsamples the reference and computes its features. ICP runs against the full cloud.
    pub fn new(reference: &PointCloud, params: &RegistrationParams) -> Result<Self> {
        params.validate()?;
        if reference.is_empty() {
            return Err(Error::invalid("reference cloud is empty"));
        }
        let down = voxel_downsample(reference, params.voxel_size);
        let features = compute_features(&reestimate_normals(&down, params.normal_k), params.feature_radius)?;
        Ok(Self { params: params.clone(), dense: SpatialIndex::new(reference), features })
    }

    pub fn params(&self) -> &RegistrationParams {
        &self.params
    }

    pub fn reference_features(&self) -> &FeatureCloud {
        &self.features
    }

    /// Filters, downsamples and describes a scan the way the outer loop consumes it.
    pub fn prepare_scan(&self, scan: &PointCloud) -> Result<FeatureCloud> {
        let p = &self.params;
        let down = preprocess(scan, p)?;
        let view = Viewpoint::Point(p.viewpoint.map(Point3::from).unwrap_or_else(Point3::origin));
        compute_features(&estimate_normals(&down, p.normal_k, view), p.feature_radius)
    }

    /// Gated RANSAC + ICP loop with a fresh seed per loop.
    ///
    /// Stops as soon as the best fitness reaches `rho_icp`. After `max_outer_loops` the
    /// error carries the best gated estimate, if any.
    pub fn estimate(&self, scan: &PointCloud, seed: u64) -> Result<RegistrationResult> {
        let scan_features = self.prepare_scan(scan)?;
        self.estimate_prepared(&scan_features, seed)
    }

    /// [`Registrar::estimate`] with the gate centred on `prior` instead of the configured `q0`.
    pub fn estimate_with_prior(&self, scan: &PointCloud, prior: Option<UnitQuaternion<f64>>, seed: u64) -> Result<RegistrationResult> {
        let scan_features = self.prepare_scan(scan)?;
        self.estimate_gated(&scan_features, prior.unwrap_or(self.params.q0), seed)
    }

    pub fn estimate_prepared(&self, scan: &FeatureCloud, seed: u64) -> Result<RegistrationResult> {
        self.estimate_gated(scan, self.params.q0, seed)
    }

    fn estimate_gated(&self, scan: &FeatureCloud, q0: UnitQuaternion<f64>, seed: u64) -> Result<RegistrationResult> {
        let p = &self.params;
        let mut best_fitness = INITIAL_FITNESS;
        let mut best: Option<RegistrationResult> = None;
        let mut trace = Vec::with_capacity(p.max_outer_loops);
        let matches = match_descriptors(scan, &self.features, p.ransac_candidates);
        for round in 0..p.max_outer_loops {
            let coarse = ransac_with(scan, &self.features, &matches, &self.dense, p, derive_seed(seed, round as u64))?;
            if orientation_distance(&coarse.pose.orientation, &q0) < p.rho_rot {
                // A diverged ICP simply spends this loop.
                if let Ok(fine) = icp_indexed(&scan.keypoints, &self.dense, &coarse.pose, p) {
                    let gated = orientation_distance(&fine.pose.orientation, &q0) < p.rho_rot;
                    if gated && fine.fitness < best_fitness {
                        best_fitness = fine.fitness;
                        best = Some(RegistrationResult {
                            pose: fine.pose,
                            fitness: fine.fitness,
                            outer_loops_used: round + 1,
                            ransac_inlier_fraction: coarse.inlier_fraction,
                            fitness_trace: Vec::new(),
                        });
                    }
                }
            }
            trace.push(best_fitness);
            if best_fitness <= p.rho_icp {
                let mut r = best.expect("fitness below sentinel implies a result");
                r.outer_loops_used = round + 1;
                r.fitness_trace = trace;
                return Ok(r);
            }
        }
        let best = best.map(|mut r| {
            r.outer_loops_used = p.max_outer_loops;
            r.fitness_trace = trace;
            Box::new(r)
        });
        Err(Error::RegistrationFailed { loops: p.max_outer_loops, best_fitness, best })
    }
}

/// Estimates the pose of `reference` within `scan`.
pub fn estimate_pose(scan: &PointCloud, reference: &PointCloud, params: &RegistrationParams, seed: u64) -> Result<RegistrationResult> {
    if scan.is_empty() {
        return Err(Error::invalid("scan cloud is empty"));
    }
    Registrar::new(reference, params)?.estimate(scan, seed)
}
