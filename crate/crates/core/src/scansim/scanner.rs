use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::seed::{derive_seed, rng};
use crate::{Error, PointCloud, Pose, Result};

/// Line scanner parameters. Lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScannerConfig {
    pub points_per_profile: usize,
    /// Width of the laser line along sensor x.
    pub lateral_span: f64,
    /// Std of the Gaussian depth error along each ray.
    pub depth_noise_std: f64,
    /// Lateral grid the ray positions are snapped to.
    pub lateral_resolution: f64,
    /// Distance from the emitter to the middle of the measuring range; rays reach `2·standoff`.
    pub standoff: f64,
    /// Sensor displacement between profiles.
    pub sweep_step: f64,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        Self {
            points_per_profile: 2048,
            lateral_span: 2047.0 * 12e-6,
            depth_noise_std: 1.5e-6,
            lateral_resolution: 12e-6,
            standoff: 0.05,
            sweep_step: 25e-6,
        }
    }
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_profile < 2 {
            return Err(Error::invalid("points_per_profile must be at least 2"));
        }
        for (v, name) in [
            (self.lateral_span, "lateral_span"),
            (self.lateral_resolution, "lateral_resolution"),
            (self.standoff, "standoff"),
            (self.sweep_step, "sweep_step"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be strictly positive")));
            }
        }
        if !(self.depth_noise_std >= 0.0 && self.depth_noise_std.is_finite()) {
            return Err(Error::invalid("depth_noise_std must be non-negative"));
        }
        Ok(())
    }

    /// Sensor-frame x coordinates of the rays, snapped to the lateral grid and strictly increasing.
    pub fn lateral_positions(&self) -> Vec<f64> {
        let n = self.points_per_profile;
        let x0 = -self.lateral_span / 2.0;
        let pitch = self.lateral_span / (n - 1) as f64;
        let res = self.lateral_resolution;
        let mut last = i64::MIN;
        (0..n)
            .map(|i| {
                let k = ((i as f64 * pitch) / res).round() as i64;
                let k = k.max(last.saturating_add(1));
                last = k;
                x0 + k as f64 * res
            })
            .collect()
    }
}

/// Error between the assumed and the true sensor mounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationError {
    /// True sensor frame expressed in the assumed one: `true = assumed ∘ offset`.
    pub sensor_mount_offset: Pose,
}

impl Default for CalibrationError {
    fn default() -> Self {
        Self::none()
    }
}

impl CalibrationError {
    pub fn none() -> Self {
        Self { sensor_mount_offset: Pose::identity() }
    }

    /// Translation of `translation` metres and rotation of `angle` radians about fixed, non-axis directions.
    pub fn with_magnitude(translation: f64, angle: f64) -> Self {
        let dir = Vector3::new(1.0, -2.0, 0.5).normalize();
        let axis = nalgebra::Unit::new_normalize(Vector3::new(-0.3, 0.4, 1.0));
        Self {
            sensor_mount_offset: Pose::new(dir * translation, nalgebra::UnitQuaternion::from_axis_angle(&axis, angle)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensor_mount_offset.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("calibration offset must be finite"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    /// Sensor-frame point.
    pub point: Point3<f64>,
    /// Index of the scene part that returned the ray.
    pub part: usize,
}

/// One laser line; samples sorted by strictly increasing sensor x. Missed rays are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanProfile {
    pub samples: Vec<ProfileSample>,
}

/// Sensor pose for one profile: where the system believes the sensor is, and where it really is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePose {
    pub assumed: Pose,
    pub actual: Pose,
}

/// Scan output with the part index of every point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: Vec<usize>,
}

impl LabeledCloud {
    pub fn part(&self, part: usize) -> PointCloud {
        self.cloud.select(|i| self.labels[i] == part)
    }
}

/// Casts one profile from the true sensor pose. Points are returned in the sensor frame.
pub fn scan_profile(scene: &Scene, sensor: &Pose, cfg: &ScannerConfig, rng: &mut impl Rng) -> ScanProfile {
    let noise = Normal::new(0.0, cfg.depth_noise_std).expect("validated std");
    let dir_w = sensor.transform_vector(&Vector3::z());
    let range = 2.0 * cfg.standoff;
    let mut samples = Vec::new();
    for x in cfg.lateral_positions() {
        let origin_s = Point3::new(x, 0.0, 0.0);
        let origin_w = sensor.transform_point(&origin_s);
        if let Some(hit) = scene.raycast(&origin_w, &dir_w, range) {
            let depth = if cfg.depth_noise_std > 0.0 { hit.t + noise.sample(rng) } else { hit.t };
            samples.push(ProfileSample { point: Point3::new(x, 0.0, depth), part: hit.part });
        }
    }
    ScanProfile { samples }
}

/// Sweeps the scanner over `poses`, one profile each, and assembles the base-frame cloud.
///
/// Profile `i` draws its noise from a stream derived from `(seed, i)`, so the
/// result is identical for any thread count.
pub fn sweep_scan_tracked(scene: &Scene, poses: &[ProfilePose], cfg: &ScannerConfig, seed: u64) -> Result<LabeledCloud> {
    if poses.is_empty() {
        return Err(Error::invalid("scanner trajectory is empty"));
    }
    if scene.parts.is_empty() {
        return Err(Error::invalid("scene has no parts"));
    }
    cfg.validate()?;
    let profiles: Vec<ScanProfile> = poses
        .par_iter()
        .enumerate()
        .map(|(i, pp)| scan_profile(scene, &pp.actual, cfg, &mut rng(derive_seed(seed, i as u64))))
        .collect();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (pp, prof) in poses.iter().zip(&profiles) {
        for s in &prof.samples {
            points.push(pp.assumed.transform_point(&s.point));
            labels.push(s.part);
        }
    }
    Ok(LabeledCloud { cloud: PointCloud::new(points)?, labels })
}

/// Scans along assumed sensor poses `trajectory`; rays leave from `assumed ∘ mount_offset`.
pub fn sweep_scan(
    scene: &Scene,
    trajectory: &[Pose],
    cfg: &ScannerConfig,
    cal: &CalibrationError,
    seed: u64,
) -> Result<PointCloud> {
    cal.validate()?;
    let poses: Vec<ProfilePose> = trajectory
        .iter()
        .map(|a| ProfilePose { assumed: *a, actual: a.compose(&cal.sensor_mount_offset) })
        .collect();
    Ok(sweep_scan_tracked(scene, &poses, cfg, seed)?.cloud)
}

/// Sensor poses translated along the sensor y axis from `from` to `to` (metres) in `step` increments.
pub fn linear_sweep(center: &Pose, from: f64, to: f64, step: f64) -> Vec<Pose> {
    if !(step > 0.0) || to < from {
        return Vec::new();
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|i| center.compose(&Pose::from_translation(Vector3::new(0.0, from + i as f64 * step, 0.0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scansim::{ScenePart, SurfaceModel};

    #[test]
    fn lateral_positions_are_grid_aligned_and_increasing() {
        let cfg = ScannerConfig::default();
        let xs = cfg.lateral_positions();
        assert_eq!(xs.len(), 2048);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert!((xs[1] - xs[0] - 12e-6).abs() < 1e-15);
        // Pitch finer than the grid still yields distinct rays.
        let tight = ScannerConfig { lateral_span: 1e-3, ..cfg };
        let xs = tight.lateral_positions();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(ScannerConfig::default().validate().is_ok());
        assert!(ScannerConfig { points_per_profile: 1, ..Default::default() }.validate().is_err());
        assert!(ScannerConfig { sweep_step: 0.0, ..Default::default() }.validate().is_err());
        assert!(ScannerConfig { standoff: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empty_inputs() {
        let scene = Scene::new(vec![ScenePart {
            id: "b".into(),
            surface: SurfaceModel::Box { half_extents: [1.0; 3] },
            pose: Pose::identity(),
        }])
        .unwrap();
        let cfg = ScannerConfig::default();
        assert!(matches!(
            sweep_scan(&scene, &[], &cfg, &CalibrationError::none(), 0),
            Err(Error::InvalidArgument(_))
        ));
        // Looking away from the box: no hits, empty cloud.
        let away = Pose::from_translation(Vector3::new(0.0, 0.0, 5.0));
        let c = sweep_scan(&scene, &[away], &cfg, &CalibrationError::none(), 0).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn linear_sweep_counts() {
        let s = linear_sweep(&Pose::identity(), -1e-3, 1e-3, 25e-6);
        assert_eq!(s.len(), 81);
        assert!((s[80].position.y - 1e-3).abs() < 1e-15);
    }
}
