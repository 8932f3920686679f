use nalgebra::{DVector, Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::{make_reference_cloud, ScenarioConfig};
use crate::arm::{ik, JointConfig, Motion, ProprioceptionError};
use crate::insertion::{check_insertion, execute_insertion, plan_relative_trajectory, InsertedObject, InsertionCheck};
use crate::registration::{Registrar, RegistrationResult};
use crate::scansim::{linear_sweep, sweep_scan_tracked, LabeledCloud, ProfilePose, Scene, ScenePart};
use crate::seed::{derive_labeled, derive_seed};
use crate::{geom::transform_cloud, Error, PointCloud, Pose, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ProprioIc1,
    ProprioIc2,
    LaserCorrected,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::ProprioIc1, Strategy::ProprioIc2, Strategy::LaserCorrected];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::ProprioIc1 => "proprio_ic1",
            Strategy::ProprioIc2 => "proprio_ic2",
            Strategy::LaserCorrected => "laser_corrected",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))
    }
}

/// One row of the report. `seed` alone, with the strategy and initial index, replays the trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub strategy: Strategy,
    pub initial_index: usize,
    /// Arm-instance seed.
    pub seed: u64,
    pub success: bool,
    /// Succeeded without any rescan.
    pub raw_success: bool,
    /// Signed distance to the hole edge at the final check; negative is a miss.
    pub miss_margin: Option<f64>,
    pub approach_angle: Option<f64>,
    pub retries_used: usize,
    pub scans: usize,
    pub target_fitness: Option<f64>,
    pub object_fitness: Option<f64>,
    pub failure: Option<String>,
}

/// Steps of one trial, for `replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Instance { target_pose: Pose, assembling_bias: Vec<f64>, sensing_bias: Vec<f64> },
    Approach { bias: String, commanded: Vec<f64>, reported: Pose, actual: Pose, check: InsertionCheck },
    Retract { commanded: Vec<f64>, reported: Pose, actual: Pose },
    Scan { attempt: usize, profiles: usize, target_points: usize, object_points: usize },
    Registration { part: String, result: Option<RegistrationResult>, error: Option<String> },
    Correction { p_obj: Pose, p_target: Pose, final_reported: Pose, final_actual: Pose, check: InsertionCheck },
    Failure { cause: String },
}

/// Per-run shared state: reference clouds, prepared registrars and the sensing sweep.
pub struct Harness {
    cfg: ScenarioConfig,
    target_reference: PointCloud,
    object_reference: PointCloud,
    target_registrar: Registrar,
    object_registrar: Registrar,
    /// Commanded sensing-arm configuration per profile.
    sweep_path: Vec<JointConfig>,
}

/// Arm instance: fixed biases and where the target was really placed.
struct Instance {
    assembling_bias: JointConfig,
    sensing_bias: JointConfig,
    target_pose: Pose,
}

struct Outcome {
    record: TrialRecord,
    trace: Vec<TraceEvent>,
}

/// Tip of a registered round part.
///
/// The registration fixes the part axis well but can slide along it, since the side of a
/// rod looks the same everywhere. The tip is taken as the scanned point furthest along the
/// registered axis, projected onto it.
fn tip_on_axis(pose: &Pose, dir: &Vector3<f64>, scan: &PointCloud) -> Vector3<f64> {
    let mut axis = pose.transform_vector(&Vector3::z());
    if axis.dot(dir) < 0.0 {
        axis = -axis;
    }
    let reach = scan
        .points()
        .iter()
        .map(|s| axis.dot(&(s.coords - pose.position)))
        .fold(f64::NEG_INFINITY, f64::max);
    pose.position + axis * reach
}

fn tip_of(pose: &Pose, radius: f64) -> InsertedObject {
    InsertedObject {
        tip_position: Point3::from(pose.position),
        tip_direction: pose.transform_vector(&Vector3::z()),
        tip_radius: radius,
    }
}

impl Harness {
    /// Validates the config and builds everything shared by its trials.
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let p_ins = cfg.recorded_insertion_pose;
        let target_nominal = p_ins.compose(&cfg.target.pose_in_tip);
        let sensor_center = p_ins.compose(&cfg.scan.sensor_in_insertion);
        let view = sensor_center.position;

        let target_reference =
            make_reference_cloud(&cfg.target.surface, cfg.target.reference_points, derive_labeled(cfg.reference_seed, "target", 0), cfg.target.reference_crop.as_ref())?;
        let object_part = make_reference_cloud(
            &cfg.object.surface,
            cfg.object.reference_points,
            derive_labeled(cfg.reference_seed, "object", 0),
            None,
        )?;
        // The object reference lives in the tip frame so its estimated pose is the tip pose.
        let object_tip = transform_cloud(&object_part, &cfg.object.part_in_tip);
        let object_reference = match &cfg.object.reference_crop {
            Some(c) => object_tip.select(|i| c.contains(&object_tip.points()[i])),
            None => object_tip,
        };
        if object_reference.is_empty() {
            return Err(Error::Config("object reference crop keeps no points".into()));
        }

        let mut tp = cfg.target_registration.clone();
        tp.q0 = target_nominal.orientation;
        tp.viewpoint.get_or_insert([view.x, view.y, view.z]);
        let mut op = cfg.object_registration.clone();
        op.viewpoint.get_or_insert([view.x, view.y, view.z]);
        let target_registrar = Registrar::new(&target_reference, &tp)?;
        let object_registrar = Registrar::new(&object_reference, &op)?;

        let sensing = &cfg.sensing_arm;
        let s = &cfg.scanner;
        let mut q = cfg.scan.sensing_config.clone();
        let mut sweep_path = Vec::new();
        for pose in linear_sweep(&sensor_center, cfg.scan.sweep_from, cfg.scan.sweep_to, s.sweep_step) {
            q = ik(sensing, &pose, &cfg.scan.sensing_config, &q, &cfg.ik)
                .map_err(|e| Error::Config(format!("sensing arm cannot follow the sweep: {e}")))?;
            sweep_path.push(q.clone());
        }
        Ok(Self { cfg: cfg.clone(), target_reference, object_reference, target_registrar, object_registrar, sweep_path })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn target_reference(&self) -> &PointCloud {
        &self.target_reference
    }

    /// Tip-frame reference of the object.
    pub fn object_reference(&self) -> &PointCloud {
        &self.object_reference
    }

    /// Sweep over the recorded scene with error-free arms: target where it was recorded,
    /// object tip backed off by the retract distance. Only scanner noise and the mount
    /// calibration error remain. Labels are 0 for the target, 1 for the object, then extra parts.
    pub fn scan_nominal(&self, seed: u64) -> Result<LabeledCloud> {
        let cfg = &self.cfg;
        let p_ins = cfg.recorded_insertion_pose;
        let inst = Instance {
            assembling_bias: DVector::zeros(cfg.assembling_arm.dof()),
            sensing_bias: DVector::zeros(cfg.sensing_arm.dof()),
            target_pose: p_ins.compose(&cfg.target.pose_in_tip),
        };
        let tip = Pose::new(p_ins.position - p_ins.transform_vector(&Vector3::z()) * cfg.retract_distance, p_ins.orientation);
        let scene = self.scene(&inst, &tip)?;
        let mount = &cfg.calibration.sensor_mount_offset;
        let poses: Vec<ProfilePose> = self
            .sweep_path
            .iter()
            .map(|q| {
                let p = cfg.sensing_arm.fk_unchecked(q);
                ProfilePose { assumed: p, actual: p.compose(mount) }
            })
            .collect();
        sweep_scan_tracked(&scene, &poses, &cfg.scanner, seed)
    }

    /// Seed of arm instance `trial`.
    pub fn instance_seed(&self, trial: usize) -> u64 {
        derive_seed(self.cfg.master_seed, trial as u64)
    }

    fn instance(&self, seed: u64) -> Result<Instance> {
        let cfg = &self.cfg;
        let arm = &cfg.assembling_arm;
        let mut rec_err = ProprioceptionError::new(&cfg.error_model, arm.dof(), derive_labeled(seed, "assembling", 0))?;
        // Recording: the part is placed where the tip really was at ic1.
        let recorded = rec_err.execute_motion(arm, &cfg.ic1)?;
        let sensing_err =
            ProprioceptionError::new(&cfg.error_model, cfg.sensing_arm.dof(), derive_labeled(seed, "sensing", 0))?;
        Ok(Instance {
            assembling_bias: rec_err.joint_bias().clone(),
            sensing_bias: sensing_err.joint_bias().clone(),
            target_pose: recorded.actual.compose(&cfg.target.pose_in_tip),
        })
    }

    fn scene(&self, inst: &Instance, tip_actual: &Pose) -> Result<Scene> {
        let cfg = &self.cfg;
        let mut parts = vec![
            ScenePart { id: "target".into(), surface: cfg.target.surface.clone(), pose: inst.target_pose },
            ScenePart { id: "object".into(), surface: cfg.object.surface.clone(), pose: tip_actual.compose(&cfg.object.part_in_tip) },
        ];
        parts.extend(cfg.extra_parts.iter().cloned());
        Scene::new(parts)
    }

    fn check(&self, inst: &Instance, tip_actual: &Pose) -> Result<InsertionCheck> {
        let hole = self.cfg.target.hole(&inst.target_pose, self.cfg.insertion_depth)?;
        check_insertion(&tip_of(tip_actual, self.cfg.object.tip_radius), &hole)
    }

    /// Runs one trial. Errors only for an invalid strategy or index; in-trial failures are data.
    pub fn run_trial(&self, strategy: Strategy, initial_index: usize, trial: usize) -> Result<TrialRecord> {
        Ok(self.run(strategy, initial_index, self.instance_seed(trial))?.record)
    }

    /// Like [`Harness::run_trial`] for an explicit seed, also returning the step trace.
    pub fn run_trial_traced(
        &self,
        strategy: Strategy,
        initial_index: usize,
        seed: u64,
    ) -> Result<(TrialRecord, Vec<TraceEvent>)> {
        let o = self.run(strategy, initial_index, seed)?;
        Ok((o.record, o.trace))
    }

    fn run(&self, strategy: Strategy, initial_index: usize, seed: u64) -> Result<Outcome> {
        let cfg = &self.cfg;
        let Some(start) = cfg.initial_configs.get(initial_index) else {
            return Err(Error::invalid(format!("initial index {initial_index} out of range")));
        };
        let mut rec = TrialRecord {
            strategy,
            initial_index,
            seed,
            success: false,
            raw_success: false,
            miss_margin: None,
            approach_angle: None,
            retries_used: 0,
            scans: 0,
            target_fitness: None,
            object_fitness: None,
            failure: None,
        };
        let mut trace = Vec::new();
        let inst = self.instance(seed)?;
        trace.push(TraceEvent::Instance {
            target_pose: inst.target_pose,
            assembling_bias: inst.assembling_bias.as_slice().to_vec(),
            sensing_bias: inst.sensing_bias.as_slice().to_vec(),
        });
        let trial_seed = derive_labeled(seed, strategy.label(), initial_index as u64);
        let result = self.attempt(strategy, start, &inst, trial_seed, &mut rec, &mut trace);
        if let Err(e) = result {
            let cause = e.to_string();
            trace.push(TraceEvent::Failure { cause: cause.clone() });
            rec.success = false;
            rec.raw_success = false;
            rec.failure = Some(cause);
        }
        Ok(Outcome { record: rec, trace })
    }

    fn attempt(
        &self,
        strategy: Strategy,
        start: &JointConfig,
        inst: &Instance,
        trial_seed: u64,
        rec: &mut TrialRecord,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<()> {
        let cfg = &self.cfg;
        let arm = &cfg.assembling_arm;
        let noise = cfg.error_model.repeat_noise_std;
        let mut err = ProprioceptionError::with_bias(inst.assembling_bias.clone(), noise, derive_labeled(trial_seed, "assembling", 0));
        let mut sensing_err =
            ProprioceptionError::with_bias(inst.sensing_bias.clone(), noise, derive_labeled(trial_seed, "sensing", 0));

        let (bias, bias_name) = match strategy {
            Strategy::ProprioIc1 => (&cfg.ic1, "ic1"),
            Strategy::ProprioIc2 | Strategy::LaserCorrected => (&cfg.ic2, "ic2"),
        };
        let commanded = ik(arm, &cfg.recorded_insertion_pose, bias, start, &cfg.ik)?;
        let m = err.execute_motion(arm, &commanded)?;
        let check = self.check(inst, &m.actual)?;
        trace.push(TraceEvent::Approach {
            bias: bias_name.into(),
            commanded: commanded.as_slice().to_vec(),
            reported: m.reported,
            actual: m.actual,
            check,
        });
        rec.miss_margin = Some(check.margin);
        rec.approach_angle = Some(check.approach_angle);
        rec.success = check.success;
        rec.raw_success = check.success;
        if check.success || strategy != Strategy::LaserCorrected {
            return Ok(());
        }

        let mut q = commanded;
        let mut last_error = None;
        for attempt in 0..=cfg.rescan_retries {
            rec.retries_used = attempt;
            let attempt_seed = derive_seed(trial_seed, attempt as u64);
            match self.correct(inst, &mut err, &mut sensing_err, &q, attempt, attempt_seed, rec, trace) {
                Ok((check, q_end)) => {
                    rec.miss_margin = Some(check.margin);
                    rec.approach_angle = Some(check.approach_angle);
                    rec.success = check.success;
                    rec.raw_success = check.success && attempt == 0;
                    last_error = None;
                    q = q_end;
                    if check.success {
                        return Ok(());
                    }
                }
                Err(e) => {
                    trace.push(TraceEvent::Failure { cause: e.to_string() });
                    last_error = Some(e);
                }
            }
        }
        match last_error {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Retract, scan, register both parts and run the relative correction from `q`.
    #[allow(clippy::too_many_arguments)]
    fn correct(
        &self,
        inst: &Instance,
        err: &mut ProprioceptionError,
        sensing_err: &mut ProprioceptionError,
        q: &JointConfig,
        attempt: usize,
        seed: u64,
        rec: &mut TrialRecord,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<(InsertionCheck, JointConfig)> {
        let cfg = &self.cfg;
        let arm = &cfg.assembling_arm;

        let here = arm.fk(q)?;
        let back = Pose::new(here.position - here.transform_vector(&Vector3::z()) * cfg.retract_distance, here.orientation);
        let q_r = ik(arm, &back, q, q, &cfg.ik)?;
        let m_r: Motion = err.execute_motion(arm, &q_r)?;
        trace.push(TraceEvent::Retract { commanded: q_r.as_slice().to_vec(), reported: m_r.reported, actual: m_r.actual });

        let scene = self.scene(inst, &m_r.actual)?;
        let motions = sensing_err.execute_path(&cfg.sensing_arm, &self.sweep_path)?;
        let mount = &cfg.calibration.sensor_mount_offset;
        let poses: Vec<ProfilePose> = motions
            .iter()
            .map(|m| ProfilePose { assumed: m.reported, actual: m.actual.compose(mount) })
            .collect();
        let labeled = sweep_scan_tracked(&scene, &poses, &cfg.scanner, derive_labeled(seed, "scan", 0))?;
        rec.scans += 1;
        let target_scan = labeled.part(0);
        let object_scan = labeled.part(1);
        trace.push(TraceEvent::Scan {
            attempt,
            profiles: poses.len(),
            target_points: target_scan.len(),
            object_points: object_scan.len(),
        });

        let target = self.register(&self.target_registrar, &target_scan, None, derive_labeled(seed, "target", 0), "target", trace);
        let object = self.register(
            &self.object_registrar,
            &object_scan,
            Some(m_r.reported.orientation),
            derive_labeled(seed, "object", 0),
            "object",
            trace,
        );
        if let Ok(t) = &target {
            rec.target_fitness = Some(t.fitness);
        }
        if let Ok(o) = &object {
            rec.object_fitness = Some(o.fitness);
        }
        let (target, object) = (target?, object?);

        let dir = m_r.reported.transform_vector(&Vector3::z());
        let mut axis = target.pose.transform_vector(&Vector3::z());
        if axis.dot(&dir) < 0.0 {
            axis = -axis;
        }
        let p_obj = Pose::new(tip_on_axis(&object.pose, &dir, &object_scan), m_r.reported.orientation);
        let p_target = Pose::new(target.pose.position + axis * cfg.insertion_depth, m_r.reported.orientation);
        let traj = plan_relative_trajectory(&p_obj, &p_target, cfg.trajectory_steps, cfg.trajectory_duration)?;
        let exec = execute_insertion(arm, err, &traj, &q_r, &q_r, &cfg.ik)?;
        let check = self.check(inst, &exec.final_actual)?;
        trace.push(TraceEvent::Correction {
            p_obj,
            p_target,
            final_reported: exec.final_reported,
            final_actual: exec.final_actual,
            check,
        });
        let q_end = exec.joint_path.last().cloned().unwrap_or(q_r);
        Ok((check, q_end))
    }

    fn register(
        &self,
        registrar: &Registrar,
        scan: &PointCloud,
        prior: Option<nalgebra::UnitQuaternion<f64>>,
        seed: u64,
        part: &str,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<RegistrationResult> {
        let r = if scan.is_empty() {
            Err(Error::invalid(format!("scan contains no {part} points")))
        } else {
            registrar.estimate_with_prior(scan, prior, seed)
        };
        let (result, error) = match &r {
            Ok(x) => (Some(x.clone()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        trace.push(TraceEvent::Registration { part: part.into(), result, error });
        r
    }
}

/// Builds a harness and runs a single trial from an explicit seed.
pub fn run_trial(cfg: &ScenarioConfig, strategy: Strategy, initial_index: usize, seed: u64) -> Result<TrialRecord> {
    Ok(Harness::new(cfg)?.run_trial_traced(strategy, initial_index, seed)?.0)
}
