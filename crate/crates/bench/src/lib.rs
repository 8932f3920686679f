//! Shared fixtures for the benches.

use microinsert::experiment::{needle, Harness, ScenarioConfig};
use microinsert::scansim::{linear_sweep, sweep_scan, CalibrationError, Scene, ScenePart};
use microinsert::{PointCloud, Pose};
use nalgebra::{UnitQuaternion, Vector3};

/// The needle scenario and its prepared harness.
pub fn needle_harness() -> (ScenarioConfig, Harness) {
    let cfg = needle().expect("needle scenario");
    let h = Harness::new(&cfg).expect("harness");
    (cfg, h)
}

/// Scan of the needle plate, slightly displaced from its reference frame.
pub fn plate_scan(cfg: &ScenarioConfig) -> PointCloud {
    let truth = Pose::new(Vector3::new(120e-6, -80e-6, 40e-6), UnitQuaternion::from_euler_angles(0.05, -0.08, 0.12));
    let scene = Scene::new(vec![ScenePart { id: "plate".into(), surface: cfg.target.surface.clone(), pose: truth }]).unwrap();
    let tilt = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 60f64.to_radians());
    let sensor = Pose::new(Vector3::new(0.0, 0.0, -0.3e-3) - (tilt * Vector3::z()) * cfg.scanner.standoff, tilt);
    let sweep = linear_sweep(&sensor, -3e-3, 3e-3, cfg.scanner.sweep_step);
    sweep_scan(&scene, &sweep, &cfg.scanner, &CalibrationError::none(), 1).unwrap()
}
