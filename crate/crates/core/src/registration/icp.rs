use nalgebra::Point3;
use rayon::prelude::*;

use super::RegistrationParams;
use crate::geom::fit_rigid;
use crate::{Error, PointCloud, Pose, Result, SpatialIndex};

const CONVERGED_TRANSLATION: f64 = 1e-9;
const CONVERGED_ROTATION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Mean squared correspondence distance at the final pose, m².
    pub fitness: f64,
    /// Total reference-to-scan transform: the ICP increment composed onto the coarse pose.
    pub pose: Pose,
    /// Correction found by ICP on top of the coarse alignment.
    pub increment: Pose,
    pub iterations: usize,
    pub correspondences: usize,
    /// Fitness after each iteration's alignment step.
    pub trace: Vec<f64>,
}

/// Pairs each scan point with its nearest reference point within `max_dist`, looking the
/// scan point up under the inverse of `pose`. Returns `(reference, scan)` point pairs.
fn correspond(
    scan: &[Point3<f64>],
    index: &SpatialIndex,
    pose: &Pose,
    max_dist: f64,
) -> (Vec<Point3<f64>>, Vec<Point3<f64>>) {
    let inv = pose.inverse();
    let pairs: Vec<Option<usize>> = scan
        .par_iter()
        .map(|s| index.nearest_within(&inv.transform_point(s), max_dist).map(|(j, _)| j))
        .collect();
    let refs = index.points();
    pairs
        .iter()
        .zip(scan)
        .filter_map(|(j, s)| j.map(|j| (refs[j], *s)))
        .unzip()
}

fn mean_sq(pose: &Pose, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
    src.iter().zip(dst).map(|(r, s)| (pose.transform_point(r) - s).norm_squared()).sum::<f64>() / src.len() as f64
}

/// Point-to-point ICP of `aligned_ref` (the reference already moved by `coarse`) onto `scan`.
///
/// Correspondences run from every scan point to the closest reference point, so a scan that
/// sees only part of the object is handled naturally.
pub fn icp_refine(scan: &PointCloud, aligned_ref: &PointCloud, coarse: &Pose, params: &RegistrationParams) -> Result<IcpResult> {
    if scan.is_empty() || aligned_ref.is_empty() {
        return Err(Error::invalid("ICP needs two non-empty clouds"));
    }
    let index = SpatialIndex::new(aligned_ref);
    let mut r = icp_indexed(scan, &index, &Pose::identity(), params)?;
    r.increment = r.pose;
    r.pose = r.increment.compose(coarse);
    Ok(r)
}

/// ICP against a reference index kept in its own frame, starting from `coarse`. The result's
/// `pose` is the total reference-to-scan transform.
pub(crate) fn icp_indexed(scan: &PointCloud, index: &SpatialIndex, coarse: &Pose, params: &RegistrationParams) -> Result<IcpResult> {
    if scan.is_empty() || index.is_empty() {
        return Err(Error::invalid("ICP needs two non-empty clouds"));
    }
    let max_dist = params.icp_max_correspondence_dist;
    let mut pose = *coarse;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 0..params.icp_max_iterations {
        iterations = it + 1;
        let (src, dst) = correspond(scan.points(), index, &pose, max_dist);
        if src.len() < 3 {
            return Err(Error::Divergence { iteration: it, max_dist });
        }
        let next = fit_rigid(&src, &dst).ok_or(Error::Divergence { iteration: it, max_dist })?;
        trace.push(mean_sq(&next, &src, &dst));
        let step = pose.inverse().compose(&next);
        pose = next;
        if step.position.norm() < CONVERGED_TRANSLATION && step.angle() < CONVERGED_ROTATION {
            break;
        }
    }
    let (src, dst) = correspond(scan.points(), index, &pose, max_dist);
    if src.is_empty() {
        return Err(Error::Divergence { iteration: iterations, max_dist });
    }
    Ok(IcpResult {
        fitness: mean_sq(&pose, &src, &dst),
        increment: pose.compose(&coarse.inverse()),
        pose,
        iterations,
        correspondences: src.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::transform_cloud;
    use crate::scansim::{sample_mesh, SurfaceModel};
    use nalgebra::{UnitQuaternion, Vector3};

    fn plate_cloud(n: usize) -> PointCloud {
        let model = SurfaceModel::EyePlate {
            x_range: [-0.5e-3, 1.3e-3],
            y_range: [-0.3e-3, 0.5e-3],
            thickness: 0.2e-3,
            hole_semi_axes: [175e-6, 150e-6],
        };
        sample_mesh(&model, n, 4).unwrap()
    }

    #[test]
    fn identical_clouds() {
        let c = plate_cloud(3000);
        let r = icp_refine(&c, &c, &Pose::identity(), &RegistrationParams::default()).unwrap();
        assert!(r.fitness <= 1e-18);
        assert!(r.pose.position.norm() < 1e-15 && r.pose.angle() < 1e-12);
    }

    #[test]
    fn recovers_small_translation() {
        let reference = plate_cloud(20000);
        let scan = transform_cloud(&reference, &Pose::from_translation(Vector3::new(200e-6, 0.0, 0.0)));
        let params = RegistrationParams { icp_max_correspondence_dist: 400e-6, icp_max_iterations: 200, ..Default::default() };
        let r = icp_refine(&scan, &reference, &Pose::identity(), &params).unwrap();
        assert!((r.pose.position - Vector3::new(200e-6, 0.0, 0.0)).norm() < 1e-6, "{:?}", r.pose);
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.trace);
        }
    }

    #[test]
    fn composes_with_coarse_pose() {
        let reference = plate_cloud(5000);
        let truth = Pose::new(Vector3::new(1e-3, 2e-3, -1e-3), UnitQuaternion::from_euler_angles(0.2, 0.1, -0.3));
        let scan = transform_cloud(&reference, &truth);
        let coarse = Pose::new(truth.position + Vector3::new(10e-6, -5e-6, 0.0), truth.orientation);
        let aligned = transform_cloud(&reference, &coarse);
        let r = icp_refine(&scan, &aligned, &coarse, &RegistrationParams::default()).unwrap();
        assert!((r.pose.position - truth.position).norm() < 1e-9);
        assert!(crate::geom::orientation_distance(&r.pose.orientation, &truth.orientation) < 1e-8);
    }

    #[test]
    fn no_overlap_diverges() {
        let reference = plate_cloud(500);
        let scan = transform_cloud(&reference, &Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)));
        let r = icp_refine(&scan, &reference, &Pose::identity(), &RegistrationParams::default());
        assert!(matches!(r, Err(Error::Divergence { iteration: 0, .. })));
    }
}
