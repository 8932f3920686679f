use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use std::f64::consts::PI;

use super::normals::{estimate_normals, Viewpoint};
use crate::{Error, PointCloud, Result, SpatialIndex};

const BINS: usize = 11;
pub const DESCRIPTOR_LEN: usize = 3 * BINS;
const MIN_NEIGHBOURS: usize = 5;

/// Keypoints with one FPFH descriptor each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCloud {
    pub keypoints: PointCloud,
    pub descriptors: Vec<[f64; DESCRIPTOR_LEN]>,
}

impl FeatureCloud {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }
}

/// Darboux-frame pair features `(theta, alpha, phi, distance)` between two oriented points.
///
/// The source is whichever point's normal makes the smaller angle with the connecting line,
/// which makes the tuple symmetric in its arguments.
pub fn pair_features(p1: &Point3<f64>, n1: &Vector3<f64>, p2: &Point3<f64>, n2: &Vector3<f64>) -> Option<[f64; 4]> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let a1 = n1.dot(&dp) / dist;
    let a2 = n2.dot(&dp) / dist;
    let (ns, nt, phi) = if a1.abs().clamp(0.0, 1.0).acos() > a2.abs().clamp(0.0, 1.0).acos() {
        dp = -dp;
        (n2, n1, -a2)
    } else {
        (n1, n2, a1)
    };
    let v = dp.cross(ns);
    let vn = v.norm();
    if vn == 0.0 {
        return None;
    }
    let v = v / vn;
    let w = ns.cross(&v);
    let alpha = v.dot(nt);
    let theta = w.dot(nt).atan2(ns.dot(nt));
    Some([theta, alpha, phi, dist])
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * BINS as f64).floor();
    (b.max(0.0) as usize).min(BINS - 1)
}

/// Normalises each of the three sub-histograms to sum to 100.
fn normalise(h: &mut [f64; DESCRIPTOR_LEN]) {
    for part in h.chunks_mut(BINS) {
        let s: f64 = part.iter().sum();
        if s > 0.0 {
            part.iter_mut().for_each(|v| *v *= 100.0 / s);
        }
    }
}

/// FPFH descriptors over `radius`. Normals are estimated (10-NN PCA, toward the origin) if absent.
///
/// Fails when more than half the points have fewer than five neighbours in `radius`;
/// isolated points otherwise get an all-zero descriptor.
pub fn compute_features(cloud: &PointCloud, radius: f64) -> Result<FeatureCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot compute features of an empty cloud"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("feature radius must be positive"));
    }
    let cloud = if cloud.has_normals() {
        cloud.clone()
    } else {
        estimate_normals(cloud, 10, Viewpoint::Point(Point3::origin()))
    };
    let pts = cloud.points();
    let normals = cloud.normals().expect("normals present");
    let index = SpatialIndex::new(&cloud);
    let neighbours: Vec<Vec<(usize, f64)>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, p)| index.within_radius(p, radius).into_iter().filter(|&(j, _)| j != i).collect())
        .collect();
    let sparse = neighbours.iter().filter(|n| n.len() < MIN_NEIGHBOURS).count();
    if sparse * 2 > pts.len() {
        return Err(Error::DegenerateFeature(format!(
            "{sparse} of {} points have fewer than {MIN_NEIGHBOURS} neighbours within {radius} m",
            pts.len()
        )));
    }
    let spfh: Vec<[f64; DESCRIPTOR_LEN]> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut h = [0.0; DESCRIPTOR_LEN];
            for &(j, _) in &neighbours[i] {
                if let Some([theta, alpha, phi, _]) = pair_features(&pts[i], &normals[i], &pts[j], &normals[j]) {
                    h[bin(theta, -PI, PI)] += 1.0;
                    h[BINS + bin(alpha, -1.0, 1.0)] += 1.0;
                    h[2 * BINS + bin(phi, -1.0, 1.0)] += 1.0;
                }
            }
            normalise(&mut h);
            h
        })
        .collect();
    let descriptors = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut h = [0.0; DESCRIPTOR_LEN];
            for &(j, d2) in &neighbours[i] {
                if d2 > 0.0 {
                    let w = 1.0 / d2;
                    for (a, b) in h.iter_mut().zip(&spfh[j]) {
                        *a += w * b;
                    }
                }
            }
            normalise(&mut h);
            for (a, b) in h.iter_mut().zip(&spfh[i]) {
                *a += b;
            }
            h
        })
        .collect();
    Ok(FeatureCloud { keypoints: cloud, descriptors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::transform_cloud;
    use crate::scansim::{sample_mesh, SurfaceModel};
    use crate::Pose;
    use nalgebra::UnitQuaternion;

    #[test]
    fn pair_features_are_symmetric() {
        let (p1, n1) = (Point3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.2, 1.0).normalize());
        let (p2, n2) = (Point3::new(1.0, 0.3, 0.1), Vector3::new(0.5, -0.1, 1.0).normalize());
        let a = pair_features(&p1, &n1, &p2, &n2).unwrap();
        let b = pair_features(&p2, &n2, &p1, &n1).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn deterministic_and_rotation_invariant() {
        let model = SurfaceModel::Cylinder { radius: 1.0, length: 3.0 };
        let cloud = sample_mesh(&model, 3000, 8).unwrap();
        let a = compute_features(&cloud, 0.5).unwrap();
        let b = compute_features(&cloud, 0.5).unwrap();
        assert_eq!(a, b);

        let pose = Pose::new(Vector3::new(0.3, -2.0, 1.1), UnitQuaternion::from_euler_angles(0.4, -1.2, 2.0));
        let moved = compute_features(&transform_cloud(&cloud, &pose), 0.5).unwrap();
        for (da, db) in a.descriptors.iter().zip(&moved.descriptors) {
            for (x, y) in da.iter().zip(db) {
                assert!((x - y).abs() < 1e-6, "{x} {y}");
            }
        }
        assert!(a.descriptors.iter().flatten().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn plane_interior_descriptors_agree() {
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                pts.push(Point3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let normals = vec![Vector3::z(); pts.len()];
        let cloud = PointCloud::with_normals(pts, Some(normals)).unwrap();
        let f = compute_features(&cloud, 0.35).unwrap();
        let interior: Vec<usize> = (0..cloud.len())
            .filter(|&k| {
                let p = cloud.points()[k];
                p.x > 1.0 && p.x < 4.9 && p.y > 1.0 && p.y < 4.9
            })
            .collect();
        let reference = f.descriptors[interior[0]];
        for &k in &interior {
            for (x, y) in f.descriptors[k].iter().zip(&reference) {
                assert!((x - y).abs() <= 0.02 * y.abs().max(1e-12) + 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn radius_too_small() {
        let pts: Vec<_> = (0..50).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::with_normals(pts, Some(vec![Vector3::z(); 50])).unwrap();
        assert!(matches!(compute_features(&cloud, 0.5), Err(Error::DegenerateFeature(_))));
    }
}
