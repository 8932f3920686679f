use nalgebra::Point3;
use rand::Rng;

use super::SurfaceModel;
use crate::seed::rng;
use crate::{Error, PointCloud, Result};

/// Segment count used when a primitive is tessellated for sampling.
pub const SAMPLING_SEGMENTS: usize = 256;

/// Area-weighted uniform surface sampling; exactly `count` points with host-triangle normals.
pub fn sample_mesh(model: &SurfaceModel, count: usize, seed: u64) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::invalid("target count must be at least 1"));
    }
    let mesh = model.tessellate(SAMPLING_SEGMENTS);
    if !mesh.indices_valid() {
        return Err(Error::invalid("mesh has out-of-range vertex indices"));
    }
    let tris: Vec<usize> = (0..mesh.triangles.len()).filter(|&i| !mesh.is_degenerate(i)).collect();
    if tris.is_empty() {
        return Err(Error::invalid("mesh has no non-degenerate triangle"));
    }
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for &t in &tris {
        total += mesh.area(t);
        cumulative.push(total);
    }
    let mut rng = rng(seed);
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(tris.len() - 1);
        let [a, b, c] = mesh.triangle(tris[k]);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        points.push(Point3::from(a.coords * wa + b.coords * wb + c.coords * wc));
        normals.push(mesh.raw_normal(tris[k]).normalize());
    }
    PointCloud::with_normals(points, Some(normals))
}
