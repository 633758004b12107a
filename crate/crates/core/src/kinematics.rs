//! Analytic position kinematics for a three-revolute articulated arm.
//!
//! Convention: joint 1 yaws the arm about the vertical axis, joints 2 and 3 pitch
//! the upper arm and forearm. The shoulder sits at height `l1` above the base.
//!
//! ```text
//! r  = l2 cos(q2) + l3 cos(q2 + q3)
//! x1 = r cos(q1)
//! x2 = r sin(q1)
//! x3 = l1 + l2 sin(q2) + l3 sin(q2 + q3)
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};

const REACH_REL_TOL: f64 = 1e-12;
const AXIS_TOL: f64 = 1e-9;

/// End-effector position in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianPoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl CartesianPoint {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        let d = [self.x1 - other.x1, self.x2 - other.x2, self.x3 - other.x3];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }
}

/// Joint vector in radians: base yaw, shoulder pitch, elbow pitch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl JointAngles {
    pub const fn new(q1: f64, q2: f64, q3: f64) -> Self {
        Self { q1, q2, q3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }
}

/// Which of the two mirror elbow solutions the inverse map returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ElbowBranch {
    /// `q3 <= 0`.
    #[default]
    ElbowA,
    /// `q3 >= 0`.
    ElbowB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotGeometry {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub elbow_branch: ElbowBranch,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        Self {
            l1: 70.0,
            l2: 70.0,
            l3: 70.0,
            elbow_branch: ElbowBranch::ElbowA,
        }
    }
}

impl RobotGeometry {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self> {
        for (name, l) in [("l1", l1), ("l2", l2), ("l3", l3)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid(format!(
                    "link length {name} must be positive, got {l}"
                )));
            }
        }
        Ok(Self {
            l1,
            l2,
            l3,
            elbow_branch: ElbowBranch::default(),
        })
    }

    pub fn with_branch(mut self, branch: ElbowBranch) -> Self {
        self.elbow_branch = branch;
        self
    }

    pub fn forward_kinematics(&self, q: &JointAngles) -> CartesianPoint {
        let q23 = q.q2 + q.q3;
        let r = self.l2 * q.q2.cos() + self.l3 * q23.cos();
        CartesianPoint {
            x1: r * q.q1.cos(),
            x2: r * q.q1.sin(),
            x3: self.l1 + self.l2 * q.q2.sin() + self.l3 * q23.sin(),
        }
    }

    /// Squared distance from the shoulder joint to `x`.
    fn shoulder_dist_sq(&self, x: &CartesianPoint) -> f64 {
        let s = x.x3 - self.l1;
        x.x1 * x.x1 + x.x2 * x.x2 + s * s
    }

    pub fn is_reachable(&self, x: &CartesianPoint) -> bool {
        if !x.is_finite() {
            return false;
        }
        let d2 = self.shoulder_dist_sq(x);
        let outer = (self.l2 + self.l3).powi(2);
        let inner = (self.l2 - self.l3).powi(2);
        d2 <= outer * (1.0 + REACH_REL_TOL) && d2 >= inner * (1.0 - REACH_REL_TOL)
    }

    pub fn inverse_kinematics(&self, x: &CartesianPoint) -> Result<JointAngles> {
        let unreachable = || Error::UnreachableTarget {
            x1: x.x1,
            x2: x.x2,
            x3: x.x3,
        };
        if !x.is_finite() {
            return Err(unreachable());
        }
        let r = x.x1.hypot(x.x2);
        if r < AXIS_TOL && x.x1 == 0.0 && x.x2 == 0.0 {
            return Err(Error::DegenerateAxis);
        }
        let s = x.x3 - self.l1;
        let (l2, l3) = (self.l2, self.l3);
        let d = (r * r + s * s - l2 * l2 - l3 * l3) / (2.0 * l2 * l3);
        if d.abs() > 1.0 + REACH_REL_TOL {
            return Err(unreachable());
        }
        let d = d.clamp(-1.0, 1.0);
        let sin_mag = (1.0 - d * d).sqrt();
        let q3 = match self.elbow_branch {
            ElbowBranch::ElbowA => (-sin_mag).atan2(d),
            ElbowBranch::ElbowB => sin_mag.atan2(d),
        };
        let q1 = x.x2.atan2(x.x1);
        let q2 = s.atan2(r) - (l3 * q3.sin()).atan2(l2 + l3 * q3.cos());
        Ok(JointAngles::new(q1, wrap_angle(q2), q3))
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: CartesianPoint, b: CartesianPoint, tol: f64) -> bool {
        a.distance(&b) < tol
    }

    #[test]
    fn fk_examples() {
        let g = RobotGeometry::default();
        let p = g.forward_kinematics(&JointAngles::new(FRAC_PI_2, 0.0, 0.0));
        assert!(close(p, CartesianPoint::new(0.0, 140.0, 70.0), 1e-12));
        let p = g.forward_kinematics(&JointAngles::new(0.0, -FRAC_PI_2, 0.0));
        assert!(close(p, CartesianPoint::new(0.0, 0.0, -70.0), 1e-12));
        let p = g.forward_kinematics(&JointAngles::new(0.0, 0.0, -FRAC_PI_2));
        assert!(close(p, CartesianPoint::new(70.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn ik_examples() {
        let g = RobotGeometry::default();
        let q = g
            .inverse_kinematics(&CartesianPoint::new(70.0, 0.0, 0.0))
            .unwrap();
        assert!(q.q1.abs() < 1e-12 && q.q2.abs() < 1e-12);
        assert!((q.q3 + FRAC_PI_2).abs() < 1e-12);

        let q = g
            .inverse_kinematics(&CartesianPoint::new(0.0, 140.0, 70.0))
            .unwrap();
        assert!((q.q1 - FRAC_PI_2).abs() < 1e-12);
        assert!(q.q2.abs() < 1e-7 && q.q3.abs() < 1e-7);

        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(300.0, 0.0, 0.0)),
            Err(Error::UnreachableTarget { .. })
        ));
    }

    #[test]
    fn ik_on_base_axis_is_degenerate() {
        let g = RobotGeometry::default();
        assert!(matches!(
            g.inverse_kinematics(&CartesianPoint::new(0.0, 0.0, 100.0)),
            Err(Error::DegenerateAxis)
        ));
    }

    #[test]
    fn reachability() {
        let g = RobotGeometry::default();
        assert!(g.is_reachable(&CartesianPoint::new(70.0, 0.0, 0.0)));
        assert!(!g.is_reachable(&CartesianPoint::new(300.0, 0.0, 0.0)));
        assert!(!g.is_reachable(&CartesianPoint::new(f64::NAN, 0.0, 0.0)));
        // Unequal links leave a hole around the shoulder.
        let g = RobotGeometry::new(70.0, 70.0, 30.0).unwrap();
        assert!(!g.is_reachable(&CartesianPoint::new(10.0, 0.0, 70.0)));
        assert!(g.is_reachable(&CartesianPoint::new(50.0, 0.0, 70.0)));
    }

    #[test]
    fn elbow_branches_mirror() {
        let x = CartesianPoint::new(40.0, 55.0, 20.0);
        let a = RobotGeometry::default();
        let b = a.with_branch(ElbowBranch::ElbowB);
        let qa = a.inverse_kinematics(&x).unwrap();
        let qb = b.inverse_kinematics(&x).unwrap();
        assert!(qa.q3 <= 0.0 && qb.q3 >= 0.0);
        assert!((qa.q3 + qb.q3).abs() < 1e-12);
        assert!(close(a.forward_kinematics(&qa), x, 1e-9));
        assert!(close(b.forward_kinematics(&qb), x, 1e-9));
    }

    #[test]
    fn rejects_bad_links() {
        assert!(RobotGeometry::new(70.0, 0.0, 70.0).is_err());
        assert!(RobotGeometry::new(-1.0, 70.0, 70.0).is_err());
        assert!(RobotGeometry::new(70.0, 70.0, f64::INFINITY).is_err());
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    }
}
