use nalgebra::{Point3, Vector3};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::{Error, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Writes `x y z [nx ny nz]` vertices as 64-bit floats.
pub fn write_ply<W: Write>(cloud: &PointCloud, format: PlyFormat, mut w: W) -> Result<()> {
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    writeln!(w, "ply\nformat {fmt} 1.0\nelement vertex {}", cloud.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property double {p}")?;
    }
    if cloud.has_normals() {
        for p in ["nx", "ny", "nz"] {
            writeln!(w, "property double {p}")?;
        }
    }
    writeln!(w, "end_header")?;
    let normals = cloud.normals();
    for (i, p) in cloud.points().iter().enumerate() {
        let mut row = vec![p.x, p.y, p.z];
        if let Some(ns) = normals {
            row.extend_from_slice(ns[i].as_slice());
        }
        match format {
            PlyFormat::Ascii => {
                let s: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(w, "{}", s.join(" "))?;
            }
            PlyFormat::BinaryLittleEndian => {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    F32,
    F64,
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            other => return Err(Error::Parse(format!("unsupported PLY property type {other:?}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::F32 | Scalar::I32 | Scalar::U32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], big: bool) -> f64 {
        macro_rules! get {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().unwrap();
                (if big { <$t>::from_be_bytes(arr) } else { <$t>::from_le_bytes(arr) }) as f64
            }};
        }
        match self {
            Scalar::F32 => get!(f32, 4),
            Scalar::F64 => get!(f64, 8),
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => get!(i16, 2),
            Scalar::U16 => get!(u16, 2),
            Scalar::I32 => get!(i32, 4),
            Scalar::U32 => get!(u32, 4),
        }
    }
}

/// Reads the vertex element of an ASCII or binary PLY. `x y z` are required;
/// `nx ny nz` are used when all three are present. Other elements must follow the vertices.
pub fn read_ply<R: Read>(r: R) -> Result<PointCloud> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let next_line = |r: &mut BufReader<R>, line: &mut String| -> Result<()> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(Error::Parse("unexpected end of PLY header".into()));
        }
        Ok(())
    };
    next_line(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Parse("missing ply magic".into()));
    }
    let mut format = None;
    let mut count = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    loop {
        next_line(&mut r, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", f, _] => format = Some(f.to_string()),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if count.is_some() {
                        return Err(Error::Parse("duplicate vertex element".into()));
                    }
                    count = Some(n.parse::<usize>().map_err(|_| Error::Parse(format!("bad vertex count {n:?}")))?);
                } else if count.is_none() {
                    return Err(Error::Parse("elements before the vertex element are not supported".into()));
                }
            }
            ["property", "list", ..] if in_vertex => return Err(Error::Parse("list properties on vertices are not supported".into())),
            ["property", ty, name] if in_vertex => props.push((name.to_string(), Scalar::parse(ty)?)),
            ["property", ..] => {}
            _ => return Err(Error::Parse(format!("unrecognised PLY header line {:?}", line.trim()))),
        }
    }
    let count = count.ok_or_else(|| Error::Parse("no vertex element".into()))?;
    let find = |n: &str| props.iter().position(|(p, _)| p == n);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(Error::Parse("vertex element lacks x/y/z".into()));
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    match format.as_deref() {
        Some("ascii") => {
            for i in 0..count {
                next_line(&mut r, &mut line).map_err(|_| Error::Parse(format!("PLY ends at vertex {i} of {count}")))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("vertex {i}: bad value {t:?}"))))
                    .collect::<Result<_>>()?;
                if vals.len() < props.len() {
                    return Err(Error::Parse(format!("vertex {i}: {} values for {} properties", vals.len(), props.len())));
                }
                rows.push(vals);
            }
        }
        Some(f @ ("binary_little_endian" | "binary_big_endian")) => {
            let big = f == "binary_big_endian";
            let stride: usize = props.iter().map(|(_, s)| s.size()).sum();
            let mut buf = vec![0u8; stride];
            for i in 0..count {
                r.read_exact(&mut buf).map_err(|_| Error::Parse(format!("PLY ends at vertex {i} of {count}")))?;
                let mut off = 0;
                let mut vals = Vec::with_capacity(props.len());
                for (_, s) in &props {
                    vals.push(s.decode(&buf[off..], big));
                    off += s.size();
                }
                rows.push(vals);
            }
        }
        other => return Err(Error::Parse(format!("unsupported PLY format {other:?}"))),
    }
    let points = rows.iter().map(|v| Point3::new(v[ix], v[iy], v[iz])).collect();
    let normals = normal_idx.map(|[a, b, c]| {
        rows.iter()
            .map(|v| {
                let n = Vector3::new(v[a], v[b], v[c]);
                // Files written with f32 normals are unit only to ~1e-7.
                let len = n.norm();
                if len > 0.0 && (len - 1.0).abs() > 1e-12 && (len - 1.0).abs() < 1e-4 {
                    n / len
                } else {
                    n
                }
            })
            .collect()
    });
    PointCloud::with_normals(points, normals)
}

impl PointCloud {
    pub fn load_ply(path: impl AsRef<Path>) -> Result<Self> {
        read_ply(std::fs::File::open(path)?)
    }

    pub fn save_ply(&self, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
        write_ply(self, format, std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud::with_normals(
            vec![Point3::new(1e-6, -2.5, 3.0), Point3::new(0.1, 0.2, 0.30000000000000004)],
            Some(vec![Vector3::x(), Vector3::new(0.0, 0.6, 0.8)]),
        )
        .unwrap()
    }

    #[test]
    fn round_trips_exactly() {
        for fmt in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply(&sample(), fmt, &mut buf).unwrap();
            assert_eq!(read_ply(buf.as_slice()).unwrap(), sample());
        }
        let plain = sample().without_normals();
        let mut buf = Vec::new();
        write_ply(&plain, PlyFormat::Ascii, &mut buf).unwrap();
        assert_eq!(read_ply(buf.as_slice()).unwrap(), plain);
    }

    #[test]
    fn reads_float_binary_with_extra_elements() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment x\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [[1.0f32, 2.0, 3.0], [4.0, 5.0, 6.0]] {
            for c in v {
                data.extend_from_slice(&c.to_le_bytes());
            }
            data.push(255);
        }
        let c = read_ply(data.as_slice()).unwrap();
        assert_eq!(c.points()[1], Point3::new(4.0, 5.0, 6.0));
        assert!(!c.has_normals());
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_ply(&b"plx\n"[..]).is_err());
        assert!(read_ply(&b"ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 2 3\n"[..]).is_err());
        assert!(read_ply(&b"ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nend_header\n1\n"[..]).is_err());
        assert!(read_ply(&b"ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n1 nan 3\n"[..]).is_err());
    }
}
