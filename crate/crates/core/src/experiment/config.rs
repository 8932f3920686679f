use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use super::Strategy;
use crate::arm::{joints_serde, ArmModel, ErrorModelConfig, IkParams, JointConfig};
use crate::insertion::InsertionTarget;
use crate::registration::RegistrationParams;
use crate::scansim::{CalibrationError, ScannerConfig, ScenePart, SurfaceModel};
use crate::{Error, Pose, Result};

/// Axis-aligned box; points on the boundary count as inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CropBox {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn validate(&self) -> Result<()> {
        if (0..3).all(|k| self.min[k].is_finite() && self.max[k].is_finite() && self.min[k] <= self.max[k]) {
            Ok(())
        } else {
            Err(Error::Config("crop box needs finite min <= max on every axis".into()))
        }
    }
}

/// The part held by the assembling arm. Its tip frame is the arm's tool frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub surface: SurfaceModel,
    /// Part frame relative to the tip frame.
    pub part_in_tip: Pose,
    pub tip_radius: f64,
    /// Points sampled for the reference cloud (before cropping).
    pub reference_points: usize,
    /// Tip-frame region kept in the reference cloud.
    #[serde(default)]
    pub reference_crop: Option<CropBox>,
}

/// The static part with the hole. Must be an eye plate; the hole is its local z axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub surface: SurfaceModel,
    /// Plate frame relative to the true tip frame at the moment the insertion pose was recorded.
    pub pose_in_tip: Pose,
    pub reference_points: usize,
    /// Plate-frame region kept in the reference cloud.
    #[serde(default)]
    pub reference_crop: Option<CropBox>,
}

impl TargetSpec {
    /// Hole geometry of a plate placed at `pose`.
    pub fn hole(&self, pose: &Pose, depth: f64) -> Result<InsertionTarget> {
        let SurfaceModel::EyePlate { hole_semi_axes, .. } = &self.surface else {
            return Err(Error::Config("target surface must be an eye_plate".into()));
        };
        Ok(InsertionTarget {
            hole_center: Point3::from(pose.position),
            hole_axis: pose.transform_vector(&Vector3::z()),
            hole_u_axis: pose.transform_vector(&Vector3::x()),
            hole_semi_axes: *hole_semi_axes,
            part_clearance_depth: depth,
        })
    }
}

/// Where the sensing arm holds the scanner, relative to the recorded insertion pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    /// Sweep centre sensor pose in the frame of `recorded_insertion_pose`.
    pub sensor_in_insertion: Pose,
    /// Sweep extent along the sensor y axis, metres from the centre.
    pub sweep_from: f64,
    pub sweep_to: f64,
    /// Sensing arm posture used as IK start and bias for the sweep.
    #[serde(with = "joints_serde")]
    pub sensing_config: JointConfig,
}

fn default_retries() -> usize {
    1
}

/// Everything one experiment needs. Lengths in metres, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub master_seed: u64,
    /// Arm instances (seeds) per initial condition.
    pub trials_per_condition: usize,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_retries")]
    pub rescan_retries: usize,

    pub object: ObjectSpec,
    pub target: TargetSpec,
    /// Static clutter; scanned but never registered.
    #[serde(default)]
    pub extra_parts: Vec<ScenePart>,

    /// Tool frame is the object tip.
    pub assembling_arm: ArmModel,
    /// Tool frame is the nominal scanner frame.
    pub sensing_arm: ArmModel,
    pub error_model: ErrorModelConfig,
    pub ik: IkParams,

    pub scanner: ScannerConfig,
    pub calibration: CalibrationError,
    pub scan: ScanPlan,
    pub target_registration: RegistrationParams,
    pub object_registration: RegistrationParams,
    pub reference_seed: u64,

    #[serde(with = "joints_serde")]
    pub ic1: JointConfig,
    #[serde(with = "joints_serde")]
    pub ic2: JointConfig,
    #[serde(with = "joints_serde::list")]
    pub initial_configs: Vec<JointConfig>,
    /// Tool pose the controller reported when the insertion was recorded at `ic1`.
    pub recorded_insertion_pose: Pose,

    /// Back-off along the tip axis before scanning.
    pub retract_distance: f64,
    /// How far past the hole centre the corrected tip is sent.
    pub insertion_depth: f64,
    pub trajectory_steps: usize,
    pub trajectory_duration: f64,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials_per_condition == 0 {
            return bad("trials_per_condition must be at least 1".into());
        }
        if self.strategies.is_empty() {
            return bad("no strategy selected".into());
        }
        if self.initial_configs.is_empty() {
            return bad("initial_configs is empty".into());
        }
        self.assembling_arm.validate().map_err(config_err)?;
        self.sensing_arm.validate().map_err(config_err)?;
        self.error_model.validate().map_err(config_err)?;
        self.scanner.validate().map_err(config_err)?;
        self.calibration.validate().map_err(config_err)?;
        self.target_registration.validate().map_err(config_err)?;
        self.object_registration.validate().map_err(config_err)?;
        self.object.surface.validate().map_err(config_err)?;
        self.target.surface.validate().map_err(config_err)?;
        self.target.hole(&Pose::identity(), self.insertion_depth).map_err(config_err)?;
        for c in [&self.object.reference_crop, &self.target.reference_crop].into_iter().flatten() {
            c.validate()?;
        }
        if !(self.object.tip_radius >= 0.0) {
            return bad("object tip_radius must be non-negative".into());
        }
        if self.object.reference_points == 0 || self.target.reference_points == 0 {
            return bad("reference point counts must be at least 1".into());
        }
        for p in &self.extra_parts {
            p.surface.validate().map_err(config_err)?;
        }
        if self.trajectory_steps < 2 || !(self.trajectory_duration > 0.0) {
            return bad("trajectory needs at least 2 steps and a positive duration".into());
        }
        if !(self.retract_distance >= 0.0) || !(self.insertion_depth >= 0.0) {
            return bad("retract_distance and insertion_depth must be non-negative".into());
        }
        if !(self.scan.sweep_to >= self.scan.sweep_from) {
            return bad("sweep_to must not be below sweep_from".into());
        }
        let arm = &self.assembling_arm;
        let joints = [("ic1", &self.ic1), ("ic2", &self.ic2)]
            .into_iter()
            .chain(self.initial_configs.iter().map(|q| ("initial config", q)));
        for (what, q) in joints {
            if q.len() != arm.dof() {
                return bad(format!("{what} has {} joints, arm has {}", q.len(), arm.dof()));
            }
            arm.check_limits(q).map_err(|e| Error::Config(format!("{what}: {e}")))?;
        }
        if self.scan.sensing_config.len() != self.sensing_arm.dof() {
            return bad("sensing_config does not match the sensing arm".into());
        }
        self.sensing_arm.check_limits(&self.scan.sensing_config).map_err(config_err)?;

        let rec = arm.fk(&self.ic1)?;
        let p_ins = &self.recorded_insertion_pose;
        if (rec.position - p_ins.position).norm() > 1e-6 || rec.orientation.angle_to(&p_ins.orientation) > 1e-5 {
            return bad("recorded_insertion_pose is not the forward kinematics of ic1".into());
        }
        let mut last = -1.0;
        for (i, q) in self.initial_configs.iter().enumerate() {
            let d = (arm.fk(q)?.position - p_ins.position).norm();
            if d <= last {
                return bad(format!(
                    "initial config {i} is {d:.6} m from the insertion pose, not farther than config {}",
                    i.saturating_sub(1)
                ));
            }
            last = d;
        }
        Ok(())
    }
}
