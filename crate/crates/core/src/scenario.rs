//! Bundled wall scenario: a table with a wall across it and a weld seam
//! just behind the wall.

use nalgebra::{UnitQuaternion, Vector3};

use crate::cdmp::TaskTrajectory;
use crate::collision::Environment;
use crate::error::Result;
use crate::kinematics::{ArmModel, Pose};
use crate::taskspace::{GridSpec, TaskGraph};

pub const WALL_ENV_JSON: &str = include_str!("../data/wall_env.json");
pub const WALL_GRID_JSON: &str = include_str!("../data/wall_grid.json");

/// Seam endpoints, behind the wall and below its top edge.
pub const SEAM_START: [f64; 3] = [0.6, -0.2, 0.2];
pub const SEAM_END: [f64; 3] = [0.6, 0.2, 0.2];

/// Pitch of the tool toward the wall for the pitched-back seam, radians.
pub const PITCH_BACK: f64 = -40.0 * std::f64::consts::PI / 180.0;

pub struct Scenario {
    pub model: ArmModel,
    pub env: Environment,
    pub grid_spec: GridSpec,
    pub graph: TaskGraph,
}

pub fn wall() -> Result<Scenario> {
    let grid_spec = GridSpec::from_json(WALL_GRID_JSON)?;
    Ok(Scenario {
        model: ArmModel::ur5(),
        env: Environment::from_json(WALL_ENV_JSON)?,
        graph: grid_spec.build()?,
        grid_spec,
    })
}

/// Tool pointing straight down.
pub fn downward() -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(0.0, 1.0, 0.0, 0.0))
}

/// Downward tool pitched about its own y axis.
pub fn pitched(angle: f64) -> UnitQuaternion<f64> {
    downward() * UnitQuaternion::from_scaled_axis(Vector3::new(0.0, angle, 0.0))
}

fn min_jerk(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Straight seam with minimum-jerk timing at a fixed tool orientation.
pub fn seam(orientation: UnitQuaternion<f64>, duration: f64, dt: f64) -> Result<TaskTrajectory> {
    let a = Vector3::from(SEAM_START);
    let b = Vector3::from(SEAM_END);
    let n = (duration / dt).round().max(1.0) as usize;
    let poses = (0..=n)
        .map(|k| Pose::new(a.lerp(&b, min_jerk(k as f64 / n as f64)), orientation))
        .collect();
    TaskTrajectory::uniform(poses, dt)
}
