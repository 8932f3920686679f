use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::TriangleMesh;
use crate::{Error, Result};

/// Geometry of a scene part, expressed in the part's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceModel {
    Mesh(TriangleMesh),
    /// Axis-aligned box centred on the origin.
    Box { half_extents: [f64; 3] },
    /// Capped cylinder along local z, centred on the origin.
    Cylinder { radius: f64, length: f64 },
    /// Plate spanning `x_range × y_range × [-thickness/2, thickness/2]` with an
    /// elliptical through-hole centred on the origin along local z.
    /// `hole_semi_axes` are measured along local x and y.
    EyePlate {
        x_range: [f64; 2],
        y_range: [f64; 2],
        thickness: f64,
        hole_semi_axes: [f64; 2],
    },
}

impl SurfaceModel {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            SurfaceModel::Mesh(m) => {
                if m.triangles.is_empty() || !m.indices_valid() {
                    return Err(Error::DegenerateMesh("empty mesh or bad vertex index".into()));
                }
                if let Some(i) = (0..m.triangles.len()).find(|&i| m.is_degenerate(i)) {
                    return Err(Error::DegenerateMesh(format!("triangle {i} has area {:e} m²", m.area(i))));
                }
                Ok(())
            }
            SurfaceModel::Box { half_extents } => half_extents.iter().try_for_each(|&h| pos(h, "box half extent")),
            SurfaceModel::Cylinder { radius, length } => {
                pos(*radius, "cylinder radius")?;
                pos(*length, "cylinder length")
            }
            SurfaceModel::EyePlate { x_range, y_range, thickness, hole_semi_axes } => {
                pos(*thickness, "plate thickness")?;
                pos(hole_semi_axes[0], "hole semi-axis")?;
                pos(hole_semi_axes[1], "hole semi-axis")?;
                if !(x_range[0] < -hole_semi_axes[0] && x_range[1] > hole_semi_axes[0])
                    || !(y_range[0] < -hole_semi_axes[1] && y_range[1] > hole_semi_axes[1])
                {
                    return Err(Error::invalid("hole must lie strictly inside the plate"));
                }
                Ok(())
            }
        }
    }

    /// Closest hit of the local-frame ray `origin + t·dir` with `0 < t <= t_max`.
    /// Returns `t` and the outward surface normal at the hit.
    pub fn ray_intersect(&self, o: &Point3<f64>, d: &Vector3<f64>, t_max: f64) -> Option<(f64, Vector3<f64>)> {
        let mut best: Option<(f64, Vector3<f64>)> = None;
        let mut offer = |t: f64, n: Vector3<f64>| {
            if t > 0.0 && t <= t_max && best.is_none_or(|b| t < b.0) {
                best = Some((t, n));
            }
        };
        match self {
            SurfaceModel::Mesh(m) => return m.ray_intersect(o, d, t_max),
            SurfaceModel::Box { half_extents: h } => {
                box_faces(o, d, [-h[0], h[0]], [-h[1], h[1]], [-h[2], h[2]], |_, _| true, &mut offer);
            }
            SurfaceModel::Cylinder { radius, length } => {
                let hz = length / 2.0;
                for (t, p) in quadratic_hits(o, d, 1.0 / radius, 1.0 / radius) {
                    if p.z.abs() <= hz {
                        offer(t, Vector3::new(p.x, p.y, 0.0).normalize());
                    }
                }
                for (z, nz) in [(hz, 1.0), (-hz, -1.0)] {
                    if let Some(t) = plane_t(o.z, d.z, z) {
                        let p = o + d * t;
                        if p.x * p.x + p.y * p.y <= radius * radius {
                            offer(t, Vector3::new(0.0, 0.0, nz));
                        }
                    }
                }
            }
            SurfaceModel::EyePlate { x_range, y_range, thickness, hole_semi_axes: [a, b] } => {
                let hz = thickness / 2.0;
                let outside_hole = |x: f64, y: f64| (x / a).powi(2) + (y / b).powi(2) >= 1.0;
                box_faces(o, d, *x_range, *y_range, [-hz, hz], outside_hole, &mut offer);
                for (t, p) in quadratic_hits(o, d, 1.0 / a, 1.0 / b) {
                    if p.z.abs() <= hz {
                        // Wall normal points into the hole, away from the material.
                        offer(t, -Vector3::new(p.x / (a * a), p.y / (b * b), 0.0).normalize());
                    }
                }
            }
        }
        best
    }

    /// Triangle approximation; curved boundaries use `segments` divisions.
    pub fn tessellate(&self, segments: usize) -> TriangleMesh {
        let segments = segments.max(8);
        let mut b = MeshBuilder::default();
        match self {
            SurfaceModel::Mesh(m) => return m.clone(),
            SurfaceModel::Box { half_extents: h } => {
                b.cuboid([-h[0], h[0]], [-h[1], h[1]], [-h[2], h[2]]);
            }
            SurfaceModel::Cylinder { radius: r, length } => {
                let hz = length / 2.0;
                let ring = |z: f64| -> Vec<Point3<f64>> {
                    (0..segments)
                        .map(|i| {
                            let t = TAU * i as f64 / segments as f64;
                            Point3::new(r * t.cos(), r * t.sin(), z)
                        })
                        .collect()
                };
                let (lo, hi) = (ring(-hz), ring(hz));
                for i in 0..segments {
                    let j = (i + 1) % segments;
                    let mid = Point3::from((lo[i].coords + hi[j].coords) / 2.0);
                    let out = Vector3::new(mid.x, mid.y, 0.0);
                    b.quad(lo[i], lo[j], hi[j], hi[i], out);
                    b.tri(Point3::new(0.0, 0.0, hz), hi[i], hi[j], Vector3::z());
                    b.tri(Point3::new(0.0, 0.0, -hz), lo[j], lo[i], -Vector3::z());
                }
            }
            SurfaceModel::EyePlate { x_range, y_range, thickness, hole_semi_axes: [a, b_] } => {
                let hz = thickness / 2.0;
                // Polar angles: uniform plus the four rectangle corners so the ring covers the face exactly.
                let mut angles: Vec<f64> = (0..segments).map(|i| TAU * i as f64 / segments as f64).collect();
                for (x, y) in [
                    (x_range[1], y_range[1]),
                    (x_range[0], y_range[1]),
                    (x_range[0], y_range[0]),
                    (x_range[1], y_range[0]),
                ] {
                    angles.push(y.atan2(x).rem_euclid(TAU));
                }
                angles.sort_by(f64::total_cmp);
                angles.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
                let ellipse = |t: f64| {
                    let r = 1.0 / ((t.cos() / a).powi(2) + (t.sin() / b_).powi(2)).sqrt();
                    (r * t.cos(), r * t.sin())
                };
                let rect = |t: f64| {
                    let (c, s) = (t.cos(), t.sin());
                    let mut k = f64::INFINITY;
                    if c > 0.0 {
                        k = k.min(x_range[1] / c);
                    } else if c < 0.0 {
                        k = k.min(x_range[0] / c);
                    }
                    if s > 0.0 {
                        k = k.min(y_range[1] / s);
                    } else if s < 0.0 {
                        k = k.min(y_range[0] / s);
                    }
                    (k * c, k * s)
                };
                let n = angles.len();
                for i in 0..n {
                    let (t0, t1) = (angles[i], angles[(i + 1) % n]);
                    let (e0, e1, r0, r1) = (ellipse(t0), ellipse(t1), rect(t0), rect(t1));
                    for (z, nz) in [(hz, 1.0), (-hz, -1.0)] {
                        let p = |(x, y): (f64, f64)| Point3::new(x, y, z);
                        b.quad(p(e0), p(r0), p(r1), p(e1), Vector3::new(0.0, 0.0, nz));
                    }
                    let (m0, m1) = (Point3::new(e0.0, e0.1, 0.0), Point3::new(e1.0, e1.1, 0.0));
                    let inward = -(m0.coords + m1.coords);
                    b.quad(
                        Point3::new(e0.0, e0.1, -hz),
                        Point3::new(e1.0, e1.1, -hz),
                        Point3::new(e1.0, e1.1, hz),
                        Point3::new(e0.0, e0.1, hz),
                        inward,
                    );
                }
                b.cuboid_sides(*x_range, *y_range, [-hz, hz]);
            }
        }
        b.finish()
    }

    /// Signed residual of the surface's implicit equation at a local point, in metres.
    /// Zero on the surface. Only defined for analytic primitives.
    pub fn surface_residual(&self, p: &Point3<f64>) -> Option<f64> {
        match self {
            SurfaceModel::Mesh(_) => None,
            SurfaceModel::Box { half_extents: h } => {
                let q = Vector3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
                Some(q.map(|c| c.max(0.0)).norm() + q.max().min(0.0))
            }
            SurfaceModel::Cylinder { radius, length } => {
                let side = (p.x.hypot(p.y) - radius).abs();
                let cap = (p.z.abs() - length / 2.0).abs();
                Some(if p.z.abs() <= length / 2.0 + 1e-15 && side <= cap {
                    side
                } else {
                    cap.max(p.x.hypot(p.y) - radius)
                })
            }
            SurfaceModel::EyePlate { .. } => None,
        }
    }
}

fn plane_t(o: f64, d: f64, plane: f64) -> Option<f64> {
    if d == 0.0 {
        None
    } else {
        Some((plane - o) / d)
    }
}

/// Hits of the ray with the elliptic cylinder `(x·sx)² + (y·sy)² = 1`.
fn quadratic_hits(o: &Point3<f64>, d: &Vector3<f64>, sx: f64, sy: f64) -> Vec<(f64, Point3<f64>)> {
    let (ox, oy, dx, dy) = (o.x * sx, o.y * sy, d.x * sx, d.y * sy);
    let qa = dx * dx + dy * dy;
    if qa == 0.0 {
        return Vec::new();
    }
    let qb = 2.0 * (ox * dx + oy * dy);
    let qc = ox * ox + oy * oy - 1.0;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable roots.
    let sq = disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * sq);
    let mut roots = vec![q / qa];
    if q != 0.0 {
        roots.push(qc / q);
    }
    roots.into_iter().map(|t| (t, o + d * t)).collect()
}

fn box_faces(
    o: &Point3<f64>,
    d: &Vector3<f64>,
    xr: [f64; 2],
    yr: [f64; 2],
    zr: [f64; 2],
    keep_z_face: impl Fn(f64, f64) -> bool,
    offer: &mut impl FnMut(f64, Vector3<f64>),
) {
    let ranges = [xr, yr, zr];
    for axis in 0..3 {
        for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
            let Some(t) = plane_t(o[axis], d[axis], ranges[axis][side]) else { continue };
            let p = o + d * t;
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            if p[u] < ranges[u][0] || p[u] > ranges[u][1] || p[v] < ranges[v][0] || p[v] > ranges[v][1] {
                continue;
            }
            if axis == 2 && !keep_z_face(p.x, p.y) {
                continue;
            }
            let mut n = Vector3::zeros();
            n[axis] = sign;
            offer(t, n);
        }
    }
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl MeshBuilder {
    /// Adds a triangle, flipping its winding so the normal agrees with `outward`.
    fn tri(&mut self, a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, outward: Vector3<f64>) {
        let n = (b - a).cross(&(c - a));
        let base = self.vertices.len() as u32;
        self.vertices.extend([a, b, c]);
        if n.dot(&outward) >= 0.0 {
            self.triangles.push([base, base + 1, base + 2]);
        } else {
            self.triangles.push([base, base + 2, base + 1]);
        }
    }

    fn quad(&mut self, a: Point3<f64>, b: Point3<f64>, c: Point3<f64>, d: Point3<f64>, outward: Vector3<f64>) {
        for (p, q, r) in [(a, b, c), (a, c, d)] {
            if (q - p).cross(&(r - p)).norm() > 0.0 {
                self.tri(p, q, r, outward);
            }
        }
    }

    fn cuboid(&mut self, xr: [f64; 2], yr: [f64; 2], zr: [f64; 2]) {
        self.cuboid_sides(xr, yr, zr);
        for (z, nz) in [(zr[0], -1.0), (zr[1], 1.0)] {
            self.quad(
                Point3::new(xr[0], yr[0], z),
                Point3::new(xr[1], yr[0], z),
                Point3::new(xr[1], yr[1], z),
                Point3::new(xr[0], yr[1], z),
                Vector3::new(0.0, 0.0, nz),
            );
        }
    }

    /// The four faces perpendicular to x and y.
    fn cuboid_sides(&mut self, xr: [f64; 2], yr: [f64; 2], zr: [f64; 2]) {
        for (x, nx) in [(xr[0], -1.0), (xr[1], 1.0)] {
            self.quad(
                Point3::new(x, yr[0], zr[0]),
                Point3::new(x, yr[1], zr[0]),
                Point3::new(x, yr[1], zr[1]),
                Point3::new(x, yr[0], zr[1]),
                Vector3::new(nx, 0.0, 0.0),
            );
        }
        for (y, ny) in [(yr[0], -1.0), (yr[1], 1.0)] {
            self.quad(
                Point3::new(xr[0], y, zr[0]),
                Point3::new(xr[1], y, zr[0]),
                Point3::new(xr[1], y, zr[1]),
                Point3::new(xr[0], y, zr[1]),
                Vector3::new(0.0, ny, 0.0),
            );
        }
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.triangles)
    }
}
