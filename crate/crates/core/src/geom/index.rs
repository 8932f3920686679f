use nalgebra::Point3;

use super::PointCloud;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable kd-tree over a set of points.
///
/// Queries break distance ties by the lowest point index, so results are
/// identical to a linear scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Candidate ordering used by every query: distance first, then index.
#[inline]
fn better(d: f64, i: usize, best_d: f64, best_i: usize) -> bool {
    d < best_d || (d == best_d && i < best_i)
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = points.len();
            build(&points, &mut order, 0, n, &mut nodes);
        }
        Self { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Index and squared distance of the closest point.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    /// Closest point no farther than `radius` (inclusive). Much cheaper than [`Self::nearest`]
    /// for queries far from the cloud.
    pub fn nearest_within(&self, q: &Point3<f64>, radius: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() || !(radius >= 0.0) {
            return None;
        }
        let mut best = (usize::MAX, radius * radius);
        self.nearest_rec(0, q, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, node: usize, q: &Point3<f64>, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if better(d, i, best.1, best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points as `(index, squared distance)`, ascending.
    pub fn knn(&self, q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        self.knn_rec(0, q, k, &mut heap);
        heap
    }

    fn worst(heap: &[(usize, f64)], k: usize) -> f64 {
        if heap.len() < k {
            f64::INFINITY
        } else {
            heap[heap.len() - 1].1
        }
    }

    fn knn_rec(&self, node: usize, q: &Point3<f64>, k: usize, heap: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if heap.len() == k {
                        let (wi, wd) = heap[k - 1];
                        if !better(d, i, wd, wi) {
                            continue;
                        }
                        heap.pop();
                    }
                    let pos = heap
                        .iter()
                        .position(|&(hi, hd)| better(d, i, hd, hi))
                        .unwrap_or(heap.len());
                    heap.insert(pos, (i, d));
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                if diff * diff <= Self::worst(heap, k) {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    /// All points within `radius` (inclusive), sorted by distance then index.
    pub fn within_radius(&self, q: &Point3<f64>, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_rec(0, q, radius * radius, &mut out);
        }
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn radius_rec(&self, node: usize, q: &Point3<f64>, r2: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d <= r2 {
                        out.push((i, d));
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.radius_rec(left, q, r2, out);
                }
                if diff > 0.0 || diff * diff <= r2 {
                    self.radius_rec(right, q, r2, out);
                }
            }
        }
    }
}

fn build(points: &[Point3<f64>], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &mut order[start..end];
    let (lo, hi) = slice.iter().fold(
        ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]),
        |(mut lo, mut hi), &i| {
            for a in 0..3 {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
            (lo, hi)
        },
    );
    let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap();
    if hi[axis] - lo[axis] == 0.0 {
        // All points coincide.
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let value = points[slice[mid]][axis];
    // Left holds coordinates <= value, right holds >= value; queries descend by `diff <= 0`.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}
