use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::SurfaceModel;
use crate::{Error, Pose, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePart {
    pub id: String,
    pub surface: SurfaceModel,
    /// Part frame in the world.
    pub pose: Pose,
}

/// Rigid parts placed in the world frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub parts: Vec<ScenePart>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub part: usize,
    /// World-frame outward normal.
    pub normal: Vector3<f64>,
}

impl Scene {
    pub fn new(parts: Vec<ScenePart>) -> Result<Self> {
        let mut scene = Self { parts };
        scene.validate()?;
        scene.prepare();
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.parts.iter().enumerate() {
            if self.parts[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::invalid(format!("duplicate part id {:?}", p.id)));
            }
            p.surface.validate()?;
        }
        Ok(())
    }

    /// Builds acceleration structures for mesh parts.
    pub fn prepare(&mut self) {
        for p in &mut self.parts {
            if let SurfaceModel::Mesh(m) = &mut p.surface {
                m.build_bvh();
            }
        }
    }

    pub fn part_index(&self, id: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.id == id)
    }

    /// Nearest hit over all parts; occlusion is resolved by smallest `t`.
    pub fn raycast(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, part) in self.parts.iter().enumerate() {
            let lo = part.pose.inverse_transform_point(origin);
            let ld = part.pose.orientation.inverse() * dir;
            let lim = best.map_or(t_max, |b| b.t);
            if let Some((t, n)) = part.surface.ray_intersect(&lo, &ld, lim) {
                if best.is_none_or(|b| t < b.t) {
                    best = Some(Hit { t, part: i, normal: part.pose.orientation * n });
                }
            }
        }
        best
    }
}
