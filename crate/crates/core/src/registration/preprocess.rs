use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::RegistrationParams;
use crate::{Error, PointCloud, Result, SpatialIndex};

/// Statistical outlier removal followed by voxel-grid downsampling.
pub fn preprocess(cloud: &PointCloud, params: &RegistrationParams) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot preprocess an empty cloud"));
    }
    let filtered = remove_statistical_outliers(cloud, params.outlier_mean_k, params.outlier_std_ratio);
    let out = voxel_downsample(&filtered, params.voxel_size);
    if out.is_empty() {
        return Err(Error::PreprocessingDegenerate);
    }
    Ok(out)
}

/// Drops points whose mean distance to their `k` nearest neighbours exceeds `mean + std_ratio·std`
/// of that statistic over the whole cloud.
pub fn remove_statistical_outliers(cloud: &PointCloud, k: usize, std_ratio: f64) -> PointCloud {
    let n = cloud.len();
    if n < 2 || k == 0 {
        return cloud.clone();
    }
    let index = SpatialIndex::new(cloud);
    let k = k.min(n - 1);
    let mean_dist: Vec<f64> = cloud
        .points()
        .par_iter()
        .map(|p| {
            // First neighbour is the point itself (or an exact duplicate).
            let nn = index.knn(p, k + 1);
            nn[1..].iter().map(|&(_, d2)| d2.sqrt()).sum::<f64>() / k as f64
        })
        .collect();
    let mu = mean_dist.iter().sum::<f64>() / n as f64;
    let var = mean_dist.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    let limit = mu + std_ratio * var.sqrt();
    cloud.select(|i| mean_dist[i] <= limit)
}

/// One centroid per occupied voxel, in order of each voxel's first point. Normals are averaged.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    struct Acc {
        sum: Vector3<f64>,
        normal: Vector3<f64>,
        first_normal: Vector3<f64>,
        count: usize,
    }
    let mut order: Vec<(i64, i64, i64)> = Vec::new();
    let mut cells: HashMap<(i64, i64, i64), Acc> = HashMap::new();
    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        let n = normals.map_or(Vector3::zeros(), |ns| ns[i]);
        let acc = cells.entry(key).or_insert_with(|| {
            order.push(key);
            Acc { sum: Vector3::zeros(), normal: Vector3::zeros(), first_normal: n, count: 0 }
        });
        acc.sum += p.coords;
        acc.normal += n;
        acc.count += 1;
    }
    let mut points = Vec::with_capacity(order.len());
    let mut out_normals = Vec::with_capacity(order.len());
    for key in &order {
        let acc = &cells[key];
        points.push(Point3::from(acc.sum / acc.count as f64));
        let norm = acc.normal.norm();
        out_normals.push(if norm > 1e-9 { acc.normal / norm } else { acc.first_normal });
    }
    PointCloud::from_parts_unchecked(points, normals.map(|_| out_normals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn params(voxel: f64, ratio: f64) -> RegistrationParams {
        RegistrationParams { voxel_size: voxel, outlier_std_ratio: ratio, outlier_mean_k: 8, ..Default::default() }
    }

    #[test]
    fn single_voxel_collapses_to_centroid() {
        let mut pts = Vec::new();
        for x in [0.1, 0.2] {
            for y in [0.1, 0.2] {
                for z in [0.1, 0.2] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        let out = preprocess(&PointCloud::new(pts).unwrap(), &params(1.0, 1.0)).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.points()[0] - Point3::new(0.15, 0.15, 0.15)).norm() < 1e-15);
    }

    /// Brute-force neighbour statistics for the far-point example.
    fn brute_mean_knn(pts: &[Point3<f64>], i: usize, k: usize) -> f64 {
        let mut d: Vec<f64> = pts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| (q - pts[i]).norm()).collect();
        d.sort_by(f64::total_cmp);
        d[..k].iter().sum::<f64>() / k as f64
    }

    #[test]
    fn far_point_removed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut pts: Vec<_> = (0..10_000)
            .map(|_| Point3::new(rng.random_range(0.0..1e-3), rng.random_range(0.0..1e-3), 0.0))
            .collect();
        let far = Point3::new(10.0 * 1.414e-3, 0.0, 0.0);
        pts.push(far);
        // Independent check that the far point's statistic exceeds the threshold.
        let k = 8;
        let sample: Vec<f64> = (0..pts.len()).step_by(97).map(|i| brute_mean_knn(&pts, i, k)).collect();
        let mu = sample.iter().sum::<f64>() / sample.len() as f64;
        assert!(brute_mean_knn(&pts, pts.len() - 1, k) > 100.0 * mu);

        let cloud = PointCloud::new(pts).unwrap();
        let out = remove_statistical_outliers(&cloud, k, 1.0);
        assert!(!out.points().contains(&far));
        assert!(out.len() > 9_000);
    }

    #[test]
    fn sparse_cloud_unchanged_by_fine_voxels() {
        let mut pts = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                pts.push(Point3::new(x as f64 * 2e-4 + 3e-5, y as f64 * 2e-4 + 3e-5, 0.0));
            }
        }
        let out = preprocess(&PointCloud::new(pts.clone()).unwrap(), &params(1e-4, 10.0)).unwrap();
        assert_eq!(out.len(), pts.len());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        assert!(preprocess(&PointCloud::empty(), &params(1.0, 1.0)).is_err());
    }

    #[test]
    fn voxelisation_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..5000)
            .map(|_| Point3::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3), rng.random_range(0.0..1e-4)))
            .collect();
        let p = params(5e-5, 2.0);
        let once = preprocess(&PointCloud::new(pts).unwrap(), &p).unwrap();
        let twice = preprocess(&once, &p).unwrap();
        let idx = SpatialIndex::new(&once);
        for q in twice.points() {
            let (_, d2) = idx.nearest(q).unwrap();
            assert!(d2.sqrt() <= 1e-12);
        }
    }
}
