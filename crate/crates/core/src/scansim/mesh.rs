use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::MIN_TRIANGLE_AREA;

/// Indexed triangle mesh; counter-clockwise winding faces outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    #[serde(skip)]
    bvh: Option<Bvh>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles, bvh: None }
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Un-normalised normal (length = 2·area).
    pub fn raw_normal(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self, i: usize) -> f64 {
        0.5 * self.raw_normal(i).norm()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        !(self.area(i) > MIN_TRIANGLE_AREA)
    }

    pub fn indices_valid(&self) -> bool {
        let n = self.vertices.len() as u32;
        self.triangles.iter().all(|t| t.iter().all(|&v| v < n))
    }

    pub fn transformed(&self, pose: &crate::Pose) -> Self {
        Self::new(
            self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            self.triangles.clone(),
        )
    }

    /// Builds the acceleration structure used by [`TriangleMesh::ray_intersect`].
    pub fn build_bvh(&mut self) {
        if self.bvh.is_none() {
            self.bvh = Some(Bvh::build(self));
        }
    }

    /// Closest hit along `origin + t·dir`, `0 < t <= t_max`: `(t, unit normal facing the ray)`.
    pub fn ray_intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<(f64, Vector3<f64>)> {
        let mut best: Option<(f64, usize)> = None;
        let visit = |i: usize, best: &mut Option<(f64, usize)>| {
            let lim = best.map_or(t_max, |b| b.0);
            if let Some(t) = moller_trumbore(&self.triangle(i), origin, dir) {
                if t > 0.0 && t <= lim && best.is_none_or(|b| t < b.0) {
                    *best = Some((t, i));
                }
            }
        };
        match &self.bvh {
            Some(bvh) => bvh.traverse(origin, dir, t_max, &mut |i, b| visit(i, b), &mut best),
            None => {
                for i in 0..self.triangles.len() {
                    visit(i, &mut best);
                }
            }
        }
        best.map(|(t, i)| {
            let n = self.raw_normal(i).normalize();
            (t, if n.dot(dir) > 0.0 { -n } else { n })
        })
    }
}

fn moller_trumbore(tri: &[Point3<f64>; 3], o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

#[derive(Debug, Clone, PartialEq)]
struct BvhNode {
    lo: Point3<f64>,
    hi: Point3<f64>,
    // Leaf when `count > 0`: triangles `order[first..first+count]`; otherwise children `first`, `first+1`.
    first: usize,
    count: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

impl Bvh {
    fn build(mesh: &TriangleMesh) -> Self {
        let n = mesh.triangles.len();
        let centroids: Vec<Point3<f64>> = (0..n)
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..n).collect() };
        if n > 0 {
            bvh.nodes.push(BvhNode { lo: Point3::origin(), hi: Point3::origin(), first: 0, count: 0 });
            bvh.split(mesh, &centroids, 0, 0, n);
        }
        bvh
    }

    fn split(&mut self, mesh: &TriangleMesh, centroids: &[Point3<f64>], node: usize, start: usize, end: usize) {
        let (mut lo, mut hi) = (Point3::from([f64::INFINITY; 3]), Point3::from([f64::NEG_INFINITY; 3]));
        for &t in &self.order[start..end] {
            for v in mesh.triangle(t) {
                lo = lo.inf(&v);
                hi = hi.sup(&v);
            }
        }
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        if end - start <= 4 {
            self.nodes[node].first = start;
            self.nodes[node].count = end - start;
            return;
        }
        let ext = hi - lo;
        let axis = ext.imax();
        let mid = (start + end) / 2;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
        let left = self.nodes.len();
        let blank = BvhNode { lo, hi, first: 0, count: 0 };
        self.nodes.push(blank.clone());
        self.nodes.push(blank);
        self.nodes[node].first = left;
        self.nodes[node].count = 0;
        self.split(mesh, centroids, left, start, mid);
        self.split(mesh, centroids, left + 1, mid, end);
    }

    fn traverse<B>(
        &self,
        o: &Point3<f64>,
        d: &Vector3<f64>,
        t_max: f64,
        visit: &mut impl FnMut(usize, &mut B),
        state: &mut B,
    ) {
        let inv = Vector3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if !slab_hit(&n.lo, &n.hi, o, &inv, t_max) {
                continue;
            }
            if n.count > 0 {
                for &t in &self.order[n.first..n.first + n.count] {
                    visit(t, state);
                }
            } else {
                stack.push(n.first);
                stack.push(n.first + 1);
            }
        }
    }
}

fn slab_hit(lo: &Point3<f64>, hi: &Point3<f64>, o: &Point3<f64>, inv: &Vector3<f64>, t_max: f64) -> bool {
    let pad = 1e-12 * (hi - lo).norm().max(1e-9);
    let (mut t0, mut t1) = (0.0f64, t_max);
    for a in 0..3 {
        let mut ta = (lo[a] - pad - o[a]) * inv[a];
        let mut tb = (hi[a] + pad - o[a]) * inv[a];
        if ta.is_nan() || tb.is_nan() {
            // Ray parallel to the slab and origin on its plane.
            continue;
        }
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}
