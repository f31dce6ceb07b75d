use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointConfig, Pose};
use crate::error::{Error, Result};

/// Standard Denavit-Hartenberg row: `Rz(theta) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub fn transform(&self, angle: f64) -> Isometry3<f64> {
        let theta = angle + self.theta_offset;
        let (s, c) = theta.sin_cos();
        let rotation = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        Isometry3::from_parts(Translation3::new(self.a * c, self.a * s, self.d), rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lo: f64,
    pub hi: f64,
}

/// A capsule rigidly attached to one of the arm frames.
///
/// Frame 0 is the base frame, frame `i` the frame after joint `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCapsule {
    pub frame: usize,
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
}

/// Kinematic and collision model of a 6-DOF arm of the UR family
/// (three parallel middle axes, spherical-offset wrist).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    #[serde(default)]
    pub name: String,
    pub dh_parameters: [DhRow; 6],
    pub joint_limits: [JointLimit; 6],
    /// Collision geometry.
    pub capsules: Vec<LinkCapsule>,
    /// Nominal link geometry the capsules must enclose.
    #[serde(default)]
    pub visual_geometry: Vec<LinkCapsule>,
    pub base_pose: Pose,
    /// Upper bound on the flange distance from the base origin.
    pub reach_radius: f64,
    #[serde(default)]
    pub home: Option<JointConfig>,
}

const UR5_JSON: &str = include_str!("../../data/ur5.json");

impl ArmModel {
    /// The bundled UR5-class model.
    pub fn ur5() -> Self {
        Self::from_json(UR5_JSON).expect("bundled ur5 model is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ArmModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (j, lim) in self.joint_limits.iter().enumerate() {
            if !(lim.lo < lim.hi) {
                return Err(Error::InvalidModel(format!(
                    "joint {j}: lower limit {} not below upper limit {}",
                    lim.lo, lim.hi
                )));
            }
        }
        for cap in self.capsules.iter().chain(&self.visual_geometry) {
            if cap.frame > 6 {
                return Err(Error::InvalidModel(format!(
                    "capsule attached to frame {} (max 6)",
                    cap.frame
                )));
            }
            if !(cap.radius > 0.0) {
                return Err(Error::InvalidModel("capsule radius must be positive".into()));
            }
        }
        if !(self.reach_radius > 0.0) {
            return Err(Error::InvalidModel("reach_radius must be positive".into()));
        }
        // The analytic solver assumes the UR layout.
        let dh = &self.dh_parameters;
        let alphas = [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0];
        let layout_ok = dh.iter().zip(alphas).all(|(row, al)| (row.alpha - al).abs() < 1e-9)
            && dh[0].a.abs() < 1e-12
            && dh[3].a.abs() < 1e-12
            && dh[4].a.abs() < 1e-12
            && dh[5].a.abs() < 1e-12
            && dh[1].d.abs() < 1e-12
            && dh[2].d.abs() < 1e-12
            && dh[1].a.abs() > 1e-9
            && dh[2].a.abs() > 1e-9
            && dh[5].d.abs() > 1e-9;
        if !layout_ok {
            return Err(Error::InvalidModel(
                "DH table does not have the UR-family layout required by the analytic solver"
                    .into(),
            ));
        }
        Ok(())
    }

    /// World transforms of frames 0 (base) through 6 (flange).
    pub fn link_frames(&self, config: &JointConfig) -> [Isometry3<f64>; 7] {
        let mut frames = [Isometry3::identity(); 7];
        frames[0] = self.base_pose.to_isometry();
        for (j, row) in self.dh_parameters.iter().enumerate() {
            frames[j + 1] = frames[j] * row.transform(config.0[j]);
        }
        frames
    }

    pub fn forward_kinematics(&self, config: &JointConfig) -> Pose {
        let mut t = self.base_pose.to_isometry();
        for (row, &q) in self.dh_parameters.iter().zip(config.0.iter()) {
            t *= row.transform(q);
        }
        Pose::from_isometry(&t)
    }

    /// Closed interval test on every joint.
    pub fn within_limits(&self, config: &JointConfig) -> bool {
        config
            .0
            .iter()
            .zip(&self.joint_limits)
            .all(|(&q, lim)| q >= lim.lo && q <= lim.hi)
    }

    pub fn limit_midpoint(&self) -> JointConfig {
        let mut mid = [0.0; 6];
        for (m, lim) in mid.iter_mut().zip(&self.joint_limits) {
            *m = 0.5 * (lim.lo + lim.hi);
        }
        JointConfig(mid)
    }

    /// Capsule endpoints and radius posed in world coordinates for `config`.
    pub fn posed_capsules(&self, config: &JointConfig) -> Vec<PosedCapsule> {
        let frames = self.link_frames(config);
        self.capsules
            .iter()
            .map(|cap| {
                let f = &frames[cap.frame];
                PosedCapsule {
                    frame: cap.frame,
                    a: f * nalgebra::Point3::from(Vector3::from(cap.a)),
                    b: f * nalgebra::Point3::from(Vector3::from(cap.b)),
                    radius: cap.radius,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PosedCapsule {
    pub frame: usize,
    pub a: nalgebra::Point3<f64>,
    pub b: nalgebra::Point3<f64>,
    pub radius: f64,
}
