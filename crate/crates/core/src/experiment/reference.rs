use std::path::Path;

use super::CropBox;
use crate::io::{load_mesh, PlyFormat};
use crate::scansim::{sample_mesh, SurfaceModel, TriangleMesh, SAMPLING_SEGMENTS};
use crate::{Error, PointCloud, Result};

fn triangle_touches(tri: &[nalgebra::Point3<f64>; 3], crop: &CropBox) -> bool {
    (0..3).all(|k| {
        let lo = tri.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = tri.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        hi >= crop.min[k] && lo <= crop.max[k]
    })
}

/// Area-weighted sample of `model` with normals.
///
/// With a crop box, `count` points are drawn over the triangles whose bounds touch the box
/// and only those inside it are kept, so the result can be smaller than `count`.
pub fn make_reference_cloud(model: &SurfaceModel, count: usize, seed: u64, crop: Option<&CropBox>) -> Result<PointCloud> {
    model.validate()?;
    let Some(crop) = crop else {
        return sample_mesh(model, count, seed);
    };
    crop.validate()?;
    let mesh = model.tessellate(SAMPLING_SEGMENTS);
    let kept: Vec<[u32; 3]> = (0..mesh.triangles.len())
        .filter(|&i| triangle_touches(&mesh.triangle(i), crop))
        .map(|i| mesh.triangles[i])
        .collect();
    if kept.is_empty() {
        return Err(Error::invalid("crop box contains no surface"));
    }
    let sub = SurfaceModel::Mesh(TriangleMesh::new(mesh.vertices.clone(), kept));
    let cloud = sample_mesh(&sub, count, seed)?;
    Ok(cloud.select(|i| crop.contains(&cloud.points()[i])))
}

/// Loads an STL/OBJ mesh, samples it and writes a binary PLY.
pub fn make_reference_cloud_file(
    mesh_path: impl AsRef<Path>,
    out_path: impl AsRef<Path>,
    count: usize,
    seed: u64,
    crop: Option<&CropBox>,
) -> Result<PointCloud> {
    let mesh = SurfaceModel::Mesh(load_mesh(mesh_path)?);
    let cloud = make_reference_cloud(&mesh, count, seed, crop)?;
    cloud.save_ply(out_path, PlyFormat::BinaryLittleEndian)?;
    Ok(cloud)
}
