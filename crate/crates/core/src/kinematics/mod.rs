//! Kinematic model of the target arm: forward kinematics, closed-form
//! inverse kinematics, joint limits and the configuration metric.

mod ik;
mod model;
mod pose;

use serde::{Deserialize, Serialize};

pub use ik::{analytic_ik, same_branch, wrap_angle, DEDUP_EPS, DEGENERATE_EPS};
pub use model::{ArmModel, DhRow, JointLimit, LinkCapsule, PosedCapsule};
pub use pose::{quaternion_angle, Pose};

/// Six joint angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; 6]);

impl JointConfig {
    pub fn zeros() -> Self {
        Self([0.0; 6])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|q| q.is_finite())
    }
}

impl From<[f64; 6]> for JointConfig {
    fn from(v: [f64; 6]) -> Self {
        Self(v)
    }
}

/// Metric on joint space. Angles are never wrapped: physical travel counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfigMetric {
    /// Largest single-joint change.
    #[default]
    Chebyshev,
    WeightedL2 { weights: [f64; 6] },
}

impl ConfigMetric {
    pub fn distance(&self, a: &JointConfig, b: &JointConfig) -> f64 {
        match self {
            ConfigMetric::Chebyshev => config_distance(a, b),
            ConfigMetric::WeightedL2 { weights } => a
                .0
                .iter()
                .zip(&b.0)
                .zip(weights)
                .map(|((x, y), w)| w * (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Chebyshev distance `max_j |a_j - b_j|`.
pub fn config_distance(a: &JointConfig, b: &JointConfig) -> f64 {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn forward_kinematics(model: &ArmModel, config: &JointConfig) -> Pose {
    model.forward_kinematics(config)
}

pub fn within_limits(model: &ArmModel, config: &JointConfig) -> bool {
    model.within_limits(config)
}
