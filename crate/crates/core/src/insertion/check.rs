use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest tip-to-axis angle still counted as an insertion.
pub const MAX_APPROACH_ANGLE: f64 = std::f64::consts::FRAC_PI_6;

/// Elliptical hole the object must pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionTarget {
    pub hole_center: Point3<f64>,
    /// Unit normal of the hole plane.
    pub hole_axis: Vector3<f64>,
    /// Unit in-plane direction of the first semi-axis.
    pub hole_u_axis: Vector3<f64>,
    /// Semi-axes along `hole_u_axis` and `hole_axis × hole_u_axis`.
    pub hole_semi_axes: [f64; 2],
    /// How far past the hole plane the tip should end up.
    pub part_clearance_depth: f64,
}

/// The tip of the object being inserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertedObject {
    pub tip_position: Point3<f64>,
    pub tip_direction: Vector3<f64>,
    pub tip_radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionCheck {
    pub success: bool,
    /// Signed distance from the tip ray's hole-plane crossing to the hole shrunk by the
    /// tip radius; positive inside.
    pub margin: f64,
    /// Angle between the tip direction and the hole axis (either sense), radians.
    pub approach_angle: f64,
}

impl InsertionTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.hole_semi_axes[0] > 0.0 && self.hole_semi_axes[1] > 0.0) {
            return Err(Error::invalid("hole semi-axes must be positive"));
        }
        if (self.hole_axis.norm() - 1.0).abs() > 1e-9 || (self.hole_u_axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("hole axes must be unit vectors"));
        }
        if self.hole_axis.dot(&self.hole_u_axis).abs() > 1e-9 {
            return Err(Error::invalid("hole_u_axis must lie in the hole plane"));
        }
        if !(self.part_clearance_depth >= 0.0) {
            return Err(Error::invalid("part_clearance_depth must be non-negative"));
        }
        Ok(())
    }
}

impl InsertedObject {
    pub fn validate(&self) -> Result<()> {
        if !(self.tip_radius >= 0.0) {
            return Err(Error::invalid("tip radius must be non-negative"));
        }
        if (self.tip_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("tip direction must be a unit vector"));
        }
        Ok(())
    }
}

/// Signed distance from `(u, v)` to the ellipse with semi-axes `(a, b)`, positive inside.
///
/// Uses the robust bisection on the closest-point equation, exact to rounding.
pub fn ellipse_signed_distance(u: f64, v: f64, a: f64, b: f64) -> f64 {
    let inside = (u / a).powi(2) + (v / b).powi(2) < 1.0;
    // Work in the first quadrant with the larger semi-axis first.
    let (e0, e1, y0, y1) = if a >= b { (a, b, u.abs(), v.abs()) } else { (b, a, v.abs(), u.abs()) };
    let d = quadrant_distance(e0, e1, y0, y1);
    if inside {
        d
    } else {
        -d
    }
}

fn quadrant_distance(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let s = root(r0, z0, z1, g);
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            ((x0 - y0).powi(2) + (x1 - y1).powi(2)).sqrt()
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xd = numer / denom;
            let x0 = e0 * xd;
            let x1 = e1 * (1.0 - xd * xd).max(0.0).sqrt();
            ((x0 - y0).powi(2) + x1 * x1).sqrt()
        } else {
            (y0 - e0).abs()
        }
    }
}

fn root(r0: f64, z0: f64, z1: f64, mut g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Follows the tip ray to the hole plane and measures how far inside the tip-radius-shrunk
/// ellipse it crosses. Success needs a strictly positive margin and an approach angle under
/// 30°. A point exactly on the boundary fails.
pub fn check_insertion(obj: &InsertedObject, target: &InsertionTarget) -> Result<InsertionCheck> {
    obj.validate()?;
    target.validate()?;
    let axis = target.hole_axis;
    let cos = obj.tip_direction.dot(&axis);
    if cos.abs() < 1e-12 {
        return Err(Error::DegenerateApproach);
    }
    let t = (target.hole_center - obj.tip_position).dot(&axis) / cos;
    let crossing = obj.tip_position + obj.tip_direction * t;
    let rel = crossing - target.hole_center;
    let v_axis = axis.cross(&target.hole_u_axis);
    let (u, v) = (rel.dot(&target.hole_u_axis), rel.dot(&v_axis));
    let a = target.hole_semi_axes[0] - obj.tip_radius;
    let b = target.hole_semi_axes[1] - obj.tip_radius;
    let margin = if a > 0.0 && b > 0.0 {
        ellipse_signed_distance(u, v, a, b)
    } else {
        a.min(b) - u.hypot(v)
    };
    let approach_angle = cos.abs().min(1.0).acos();
    Ok(InsertionCheck { success: margin > 0.0 && approach_angle < MAX_APPROACH_ANGLE, margin, approach_angle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Pose;
    use nalgebra::UnitQuaternion;

    fn target() -> InsertionTarget {
        InsertionTarget {
            hole_center: Point3::origin(),
            hole_axis: Vector3::z(),
            hole_u_axis: Vector3::x(),
            hole_semi_axes: [150e-6, 175e-6],
            part_clearance_depth: 0.0,
        }
    }

    fn tip(x: f64, y: f64, r: f64) -> InsertedObject {
        InsertedObject { tip_position: Point3::new(x, y, -1e-3), tip_direction: Vector3::z(), tip_radius: r }
    }

    #[test]
    fn centred_tip_margin() {
        let c = check_insertion(&tip(0.0, 0.0, 75e-6), &target()).unwrap();
        assert!(c.success);
        assert!((c.margin - 75e-6).abs() < 1e-15);
    }

    #[test]
    fn offset_along_minor_axis() {
        let c = check_insertion(&tip(200e-6, 0.0, 75e-6), &target()).unwrap();
        assert!(!c.success);
        assert!((c.margin + 125e-6).abs() < 1e-15);
    }

    #[test]
    fn boundary_is_failure() {
        let c = check_insertion(&tip(150e-6, 0.0, 0.0), &target()).unwrap();
        assert_eq!(c.margin, 0.0);
        assert!(!c.success);
    }

    #[test]
    fn steep_or_parallel_approach() {
        let mut o = tip(0.0, 0.0, 0.0);
        o.tip_direction = Vector3::new(1.0, 0.0, 1.0).normalize();
        let c = check_insertion(&o, &target()).unwrap();
        assert!(!c.success && (c.approach_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        o.tip_direction = Vector3::x();
        assert!(matches!(check_insertion(&o, &target()), Err(Error::DegenerateApproach)));
    }

    #[test]
    fn distance_matches_dense_boundary_sampling() {
        let (a, b) = (150e-6, 220e-6);
        let n = 200_000;
        let boundary: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64 * std::f64::consts::TAU;
                (a * t.cos(), b * t.sin())
            })
            .collect();
        for &(u, v) in &[(0.0, 0.0), (50e-6, 60e-6), (-140e-6, 10e-6), (300e-6, -100e-6), (0.0, -400e-6), (1e-6, 219e-6)] {
            let brute = boundary.iter().map(|&(x, y)| (x - u).hypot(y - v)).fold(f64::INFINITY, f64::min);
            let d = ellipse_signed_distance(u, v, a, b);
            assert!((d.abs() - brute).abs() < 1e-8, "({u},{v}): {d} vs {brute}");
            assert_eq!(d > 0.0, (u / a).powi(2) + (v / b).powi(2) < 1.0);
        }
    }

    #[test]
    fn rigid_invariance() {
        let pose = Pose::new(Vector3::new(0.3, -0.1, 0.7), UnitQuaternion::from_euler_angles(0.4, 1.1, -0.3));
        let o = InsertedObject {
            tip_position: Point3::new(30e-6, -20e-6, -2e-3),
            tip_direction: Vector3::new(0.05, 0.02, 1.0).normalize(),
            tip_radius: 75e-6,
        };
        let t = target();
        let base = check_insertion(&o, &t).unwrap();
        let o2 = InsertedObject {
            tip_position: pose.transform_point(&o.tip_position),
            tip_direction: pose.transform_vector(&o.tip_direction),
            tip_radius: o.tip_radius,
        };
        let t2 = InsertionTarget {
            hole_center: pose.transform_point(&t.hole_center),
            hole_axis: pose.transform_vector(&t.hole_axis),
            hole_u_axis: pose.transform_vector(&t.hole_u_axis),
            ..t
        };
        let moved = check_insertion(&o2, &t2).unwrap();
        assert!((base.margin - moved.margin).abs() < 1e-12);
        assert_eq!(base.success, moved.success);
    }
}
