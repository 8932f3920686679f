//! Ready-made needle-threading and USB-analog scenarios.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use super::{CropBox, ObjectSpec, ScanPlan, ScenarioConfig, Strategy, TargetSpec};
use crate::arm::{ik, ArmModel, ErrorModelConfig, IkParams, JointConfig};
use crate::registration::RegistrationParams;
use crate::scansim::{CalibrationError, ScannerConfig, SurfaceModel};
use crate::{Pose, Result};

/// Recorded insertion posture of the assembling arm.
const IC1: [f64; 7] = [0.0, 0.15, 0.0, -2.4, 0.0, 2.6, 0.8];
/// Joint shift from IC1 whose IK-resolved posture serves as IC2: joint 1 turned by about a
/// quarter turn, the shoulder and wrist folding round to keep the tip in place.
const IC2_SHIFT: [f64; 7] = [1.43, 1.05, -1.53, 0.11, 1.35, -0.72, -0.82];
/// Initial configurations are `IC1 + i·STEP` for `i = 1..=10`.
const INITIAL_STEP: [f64; 7] = [0.075, -0.06, 0.09, 0.075, -0.09, 0.06, 0.105];
/// Rough sensing-arm posture near the sweep centre; refined by IK.
const SENSING_GUESS: [f64; 7] = [0.17, 0.33, 0.16, -2.23, -1.86, 2.33, -1.52];

fn sensing_arm() -> ArmModel {
    let mut arm = ArmModel::panda();
    arm.base_pose = Pose::new(
        Vector3::new(0.9, -0.5, 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 120f64.to_radians()),
    );
    arm
}

fn holding(protrusion: f64) -> ArmModel {
    let mut arm = ArmModel::panda();
    arm.tool = arm.tool.compose(&Pose::from_translation(Vector3::new(0.0, 0.0, protrusion)));
    arm
}

fn ik_params() -> IkParams {
    IkParams { null_space_gain: 0.02, ..Default::default() }
}

/// Sensor looking at `look` (insertion frame), tilted 60° about the tip x axis so it sees
/// the front of the plate and the side of the held part.
fn sensor_pose(look: Vector3<f64>, standoff: f64) -> Pose {
    let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 60f64.to_radians());
    Pose::new(look - (rot * Vector3::z()) * standoff, rot)
}

struct Layout {
    name: &'static str,
    protrusion: f64,
    object: ObjectSpec,
    target: TargetSpec,
    look: Vector3<f64>,
    sweep: [f64; 2],
    scanner: ScannerConfig,
    target_registration: RegistrationParams,
    object_registration: RegistrationParams,
    retract: f64,
    depth: f64,
}

fn assemble(l: Layout) -> Result<ScenarioConfig> {
    let arm = holding(l.protrusion);
    let ik_p = ik_params();
    let ic1 = DVector::from_row_slice(&IC1);
    let p_ins = arm.fk(&ic1)?;
    let shifted = &ic1 + DVector::from_row_slice(&IC2_SHIFT);
    let ic2 = ik(&arm, &p_ins, &shifted, &shifted, &IkParams { max_iterations: 5000, ..ik_p.clone() })?;
    let step = DVector::from_row_slice(&INITIAL_STEP);
    let initial_configs: Vec<JointConfig> = (1..=10).map(|i| &ic1 + &step * i as f64).collect();

    let sensing = sensing_arm();
    let sensor = sensor_pose(l.look, l.scanner.standoff);
    let guess = DVector::from_row_slice(&SENSING_GUESS);
    let sensing_config = ik(&sensing, &p_ins.compose(&sensor), &guess, &guess, &IkParams { max_iterations: 5000, ..ik_p.clone() })?;

    let cfg = ScenarioConfig {
        name: l.name.into(),
        master_seed: 2024,
        trials_per_condition: 10,
        strategies: Strategy::ALL.to_vec(),
        rescan_retries: 1,
        object: l.object,
        target: l.target,
        extra_parts: Vec::new(),
        assembling_arm: arm,
        sensing_arm: sensing,
        error_model: ErrorModelConfig::default(),
        ik: ik_p,
        scanner: l.scanner,
        calibration: CalibrationError::with_magnitude(50e-6, 0.3f64.to_radians()),
        scan: ScanPlan { sensor_in_insertion: sensor, sweep_from: l.sweep[0], sweep_to: l.sweep[1], sensing_config },
        target_registration: l.target_registration,
        object_registration: l.object_registration,
        reference_seed: 7,
        ic1,
        ic2,
        initial_configs,
        recorded_insertion_pose: p_ins,
        retract_distance: l.retract,
        insertion_depth: l.depth,
        trajectory_steps: 50,
        trajectory_duration: 2.0,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// 150µm thread through a 350×300µm eye.
pub fn needle() -> Result<ScenarioConfig> {
    let length = 10e-3;
    let fine = RegistrationParams {
        rho_icp: 6e-6 * 6e-6,
        // Point-to-point ICP creeps slowly along the plate faces.
        icp_max_iterations: 200,
        icp_max_correspondence_dist: 300e-6,
        ..Default::default()
    };
    assemble(Layout {
        name: "needle",
        protrusion: 15e-3,
        object: ObjectSpec {
            surface: SurfaceModel::Cylinder { radius: 75e-6, length },
            part_in_tip: Pose::from_translation(Vector3::new(0.0, 0.0, -length / 2.0)),
            tip_radius: 75e-6,
            reference_points: 100_000,
            // The half of the thread facing the scanner, up to just short of the far end.
            reference_crop: Some(CropBox { min: [-1e-3, -20e-6, -9.8e-3], max: [1e-3, 1e-3, 1e-3] }),
        },
        target: TargetSpec {
            surface: SurfaceModel::EyePlate {
                x_range: [-0.5e-3, 1.3e-3],
                y_range: [-0.3e-3, 0.5e-3],
                thickness: 0.2e-3,
                hole_semi_axes: [175e-6, 150e-6],
            },
            pose_in_tip: Pose::from_translation(Vector3::new(0.0, 0.0, -0.3e-3)),
            reference_points: 100_000,
            // The far face is never seen by the scanner.
            reference_crop: Some(CropBox { min: [-1.0; 3], max: [1.0, 1.0, 0.09e-3] }),
        },
        look: Vector3::new(0.0, 0.0, -0.6e-3),
        sweep: [-10e-3, 9e-3],
        scanner: ScannerConfig::default(),
        target_registration: fine.clone(),
        object_registration: RegistrationParams {
            rho_icp: 8e-6 * 8e-6,
            // Loose enough for spins about the thread axis, tight enough to drop end-for-end flips.
            rho_rot: std::f64::consts::FRAC_PI_2,
            voxel_size: 20e-6,
            feature_radius: 100e-6,
            ransac_inlier_threshold: 20e-6,
            icp_max_iterations: 100,
            icp_max_correspondence_dist: 100e-6,
            ..fine
        },
        retract: 1e-3,
        depth: 0.3e-3,
    })
}

/// 4.5mm round plug into a 5.5×5mm socket: 0.5mm clearance across the narrow axis.
pub fn usb() -> Result<ScenarioConfig> {
    let length = 20e-3;
    let coarse = RegistrationParams {
        rho_icp: 30e-6 * 30e-6,
        voxel_size: 300e-6,
        feature_radius: 1.5e-3,
        ransac_inlier_threshold: 300e-6,
        icp_max_iterations: 100,
        icp_max_correspondence_dist: 1.5e-3,
        // Much of the socket face is flat, so good matches sit further down the list.
        ransac_candidates: 8,
        ransac_iterations: 10000,
        ..Default::default()
    };
    assemble(Layout {
        name: "usb",
        protrusion: length,
        object: ObjectSpec {
            surface: SurfaceModel::Cylinder { radius: 2.25e-3, length },
            part_in_tip: Pose::from_translation(Vector3::new(0.0, 0.0, -length / 2.0)),
            tip_radius: 2.25e-3,
            reference_points: 400_000,
            reference_crop: Some(CropBox { min: [-5e-3, -0.6e-3, -19.5e-3], max: [5e-3, 5e-3, 1e-3] }),
        },
        target: TargetSpec {
            surface: SurfaceModel::EyePlate {
                x_range: [-6e-3, 9e-3],
                y_range: [-4e-3, 6e-3],
                thickness: 3e-3,
                hole_semi_axes: [2.75e-3, 2.5e-3],
            },
            pose_in_tip: Pose::from_translation(Vector3::new(0.0, 0.0, -2e-3)),
            reference_points: 400_000,
            reference_crop: Some(CropBox { min: [-1.0; 3], max: [1.0, 1.0, 1.4e-3] }),
        },
        look: Vector3::new(0.0, 0.0, -3e-3),
        sweep: [-12e-3, 11e-3],
        scanner: ScannerConfig { sweep_step: 100e-6, ..Default::default() },
        target_registration: coarse.clone(),
        object_registration: RegistrationParams { rho_rot: std::f64::consts::FRAC_PI_2, ..coarse },
        retract: 5e-3,
        depth: 2e-3,
    })
}
