use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;

use crate::{PointCloud, SpatialIndex};

/// What estimated normals are flipped toward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viewpoint {
    Point(Point3<f64>),
    /// Normals point along this direction (sensor at infinity).
    Direction(Vector3<f64>),
}

/// PCA normals over the `k` nearest neighbours (including the point), flipped toward `view`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, view: Viewpoint) -> PointCloud {
    let index = SpatialIndex::new(cloud);
    let pts = cloud.points();
    let normals: Vec<Vector3<f64>> = pts
        .par_iter()
        .map(|p| {
            let nn = index.knn(p, k.max(3));
            let n = pca_normal(nn.iter().map(|&(i, _)| &pts[i]));
            let toward = match view {
                Viewpoint::Point(v) => v - p,
                Viewpoint::Direction(d) => d,
            };
            if n.dot(&toward) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    PointCloud::from_parts_unchecked(pts.to_vec(), Some(normals))
}

fn pca_normal<'a>(pts: impl Iterator<Item = &'a Point3<f64>> + Clone) -> Vector3<f64> {
    let n = pts.clone().count();
    if n < 3 {
        return Vector3::z();
    }
    let c = pts.clone().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let i = eig.eigenvalues.imin();
    let v: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
    let norm = v.norm();
    if norm > 0.0 && norm.is_finite() {
        v / norm
    } else {
        Vector3::z()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_normals_face_viewpoint() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let (x, y) = (i as f64 * 0.01, j as f64 * 0.013);
                pts.push(Point3::new(x, y, 0.5 * x - 0.2 * y));
            }
        }
        let c = estimate_normals(&PointCloud::new(pts).unwrap(), 10, Viewpoint::Point(Point3::new(0.1, 0.1, 5.0)));
        let expect = Vector3::new(-0.5, 0.2, 1.0).normalize();
        for n in c.normals().unwrap() {
            assert!((n - expect).norm() < 1e-9);
        }
        let c = estimate_normals(&c, 10, Viewpoint::Direction(-Vector3::z()));
        assert!(c.normals().unwrap().iter().all(|n| (n + expect).norm() < 1e-9));
    }
}
