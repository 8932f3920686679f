use nalgebra::{Point3, Vector3};

use crate::{Error, Result};

const NORMAL_TOL: f64 = 1e-6;

/// Ordered 3-D points in metres, optionally with unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        Self::with_normals(points, None)
    }

    /// Validates finiteness and, when present, normal count and unit length.
    pub fn with_normals(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(Error::invalid(format!(
                    "{} normals for {} points",
                    ns.len(),
                    points.len()
                )));
            }
            if let Some(i) = ns
                .iter()
                .position(|n| !n.iter().all(|c| c.is_finite()) || (n.norm() - 1.0).abs() > NORMAL_TOL)
            {
                return Err(Error::invalid(format!("normal {i} is not unit length")));
            }
        }
        Ok(Self { points, normals })
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Self {
        debug_assert!(normals.as_ref().is_none_or(|n| n.len() == points.len()));
        Self { points, normals }
    }

    pub fn empty() -> Self {
        Self::default()
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

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn into_parts(self) -> (Vec<Point3<f64>>, Option<Vec<Vector3<f64>>>) {
        (self.points, self.normals)
    }

    pub fn without_normals(&self) -> Self {
        Self::from_parts_unchecked(self.points.clone(), None)
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |a, p| a + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Keeps the points whose index satisfies `keep`.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Self {
        let points = idx.iter().map(|&i| self.points[i]).collect();
        let normals = self.normals.as_ref().map(|ns| idx.iter().map(|&i| ns[i]).collect());
        Self::from_parts_unchecked(points, normals)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    pub fn extend(&mut self, other: &PointCloud) -> Result<()> {
        match (&mut self.normals, &other.normals) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (None, None) => {}
            _ if self.points.is_empty() => self.normals = other.normals.clone(),
            _ => return Err(Error::invalid("cannot merge clouds with and without normals")),
        }
        self.points.extend_from_slice(&other.points);
        Ok(())
    }
}
