use nalgebra::Point3;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::scansim::TriangleMesh;
use crate::{Error, Result};

/// Loads an STL (ASCII or binary) or OBJ mesh, chosen by extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let mesh = match ext.as_deref() {
        Some("stl") => parse_stl(&bytes)?,
        Some("obj") => parse_obj(std::str::from_utf8(&bytes).map_err(|_| Error::Parse("OBJ is not UTF-8".into()))?)?,
        _ => return Err(Error::Parse(format!("unknown mesh extension for {}", path.display()))),
    };
    if mesh.triangles.is_empty() {
        return Err(Error::DegenerateMesh(format!("{} has no triangles", path.display())));
    }
    Ok(mesh)
}

/// Vertices are merged on exact coordinate equality.
#[derive(Default)]
struct Welder {
    vertices: Vec<Point3<f64>>,
    lookup: HashMap<[u64; 3], u32>,
}

impl Welder {
    fn add(&mut self, p: Point3<f64>) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }
}

fn looks_ascii(bytes: &[u8]) -> bool {
    let head = &bytes[..bytes.len().min(512)];
    let starts_solid = std::str::from_utf8(head).is_ok_and(|s| s.trim_start().starts_with("solid"));
    if !starts_solid {
        return false;
    }
    // Some binary files also begin with "solid"; trust the declared triangle count if it fits.
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if 84 + 50 * n == bytes.len() {
            return false;
        }
    }
    true
}

pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh> {
    let mut welder = Welder::default();
    let mut triangles = Vec::new();
    if looks_ascii(bytes) {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse("STL is not UTF-8".into()))?;
        let mut corners = Vec::with_capacity(3);
        for (n, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.first().copied() {
                Some("vertex") => {
                    if toks.len() != 4 {
                        return Err(Error::Parse(format!("line {}: vertex needs 3 coordinates", n + 1)));
                    }
                    let c: Vec<f64> = toks[1..]
                        .iter()
                        .map(|t| t.parse().map_err(|_| Error::Parse(format!("line {}: bad number {t:?}", n + 1))))
                        .collect::<Result<_>>()?;
                    corners.push(welder.add(Point3::new(c[0], c[1], c[2])));
                }
                Some("endloop") => {
                    if corners.len() != 3 {
                        return Err(Error::Parse(format!("line {}: facet with {} vertices", n + 1, corners.len())));
                    }
                    triangles.push([corners[0], corners[1], corners[2]]);
                    corners.clear();
                }
                _ => {}
            }
        }
    } else {
        if bytes.len() < 84 {
            return Err(Error::Parse("binary STL shorter than its header".into()));
        }
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() < 84 + 50 * n {
            return Err(Error::Parse(format!("binary STL declares {n} triangles but is truncated")));
        }
        for i in 0..n {
            let rec = &bytes[84 + 50 * i..84 + 50 * (i + 1)];
            let f = |k: usize| f32::from_le_bytes(rec[k..k + 4].try_into().unwrap()) as f64;
            let mut tri = [0u32; 3];
            for (v, slot) in tri.iter_mut().enumerate() {
                let o = 12 + 12 * v;
                *slot = welder.add(Point3::new(f(o), f(o + 4), f(o + 8)));
            }
            triangles.push(tri);
        }
    }
    finish(welder.vertices, triangles)
}

/// `v` and `f` records only; polygons are fan-triangulated, `v/vt/vn` and negative indices accepted.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("v") => {
                if toks.len() < 4 {
                    return Err(Error::Parse(format!("line {}: vertex needs 3 coordinates", n + 1)));
                }
                let c: Vec<f64> = toks[1..4]
                    .iter()
                    .map(|t| t.parse().map_err(|_| Error::Parse(format!("line {}: bad number {t:?}", n + 1))))
                    .collect::<Result<_>>()?;
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = toks[1..]
                    .iter()
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| Error::Parse(format!("line {}: bad index {t:?}", n + 1)))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 || resolved >= vertices.len() as i64 {
                            return Err(Error::Parse(format!("line {}: index {i} out of range", n + 1)));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse(format!("line {}: face with fewer than 3 vertices", n + 1)));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    finish(vertices, triangles)
}

fn finish(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<TriangleMesh> {
    if triangles.is_empty() {
        return Err(Error::DegenerateMesh("mesh has no triangles".into()));
    }
    let mesh = TriangleMesh::new(vertices, triangles);
    if !mesh.indices_valid() {
        return Err(Error::Parse("face references a missing vertex".into()));
    }
    Ok(mesh)
}

pub fn write_ascii_stl<W: Write>(mesh: &TriangleMesh, name: &str, mut w: W) -> Result<()> {
    writeln!(w, "solid {name}")?;
    for i in 0..mesh.triangles.len() {
        let n = mesh.raw_normal(i);
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        writeln!(w, "  facet normal {:e} {:e} {:e}\n    outer loop", n.x, n.y, n.z)?;
        for p in mesh.triangle(i) {
            writeln!(w, "      vertex {:e} {:e} {:e}", p.x, p.y, p.z)?;
        }
        writeln!(w, "    endloop\n  endfacet")?;
    }
    writeln!(w, "endsolid {name}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\n\
                       facet normal 0 0 1\nouter loop\nvertex 1 0 0\nvertex 1 1 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";

    #[test]
    fn ascii_stl_welds_vertices() {
        let m = parse_stl(TRI.as_bytes()).unwrap();
        assert_eq!(m.triangles.len(), 2);
        assert_eq!(m.vertices.len(), 4);
    }

    #[test]
    fn binary_stl() {
        let mut b = vec![0u8; 80];
        b.extend_from_slice(&1u32.to_le_bytes());
        for v in [0.0f32, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 0.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&[0, 0]);
        let m = parse_stl(&b).unwrap();
        assert_eq!(m.vertices[1], Point3::new(2.0, 0.0, 0.0));
        assert!((m.area(0) - 2.0).abs() < 1e-12);
        b.truncate(100);
        assert!(parse_stl(&b).is_err());
    }

    #[test]
    fn obj_faces() {
        let m = parse_obj("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
        assert!(parse_obj("v 0 0 0\n").is_err());
    }

    #[test]
    fn stl_writer_round_trip() {
        let m = parse_stl(TRI.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_ascii_stl(&m, "x", &mut buf).unwrap();
        let back = parse_stl(&buf).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
    }
}
