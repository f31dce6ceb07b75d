//! Motion generation: task trajectory to joint trajectory, guided by the
//! configurations mapped in a region.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdmp::TaskTrajectory;
use crate::collision::{in_collision, Environment};
use crate::error::{Error, Result};
use crate::kinematics::{analytic_ik, config_distance, ArmModel, JointConfig, Pose};
use crate::planner::Region;
use crate::taskspace::{orientation_similarity, pose_metric, TaskGraph, NEAREST_ROTATION_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReproductionParams {
    /// Mapped configurations consulted per sample.
    pub k: usize,
    /// Largest accepted joint change between consecutive samples, radians.
    pub max_step: f64,
}

impl ReproductionParams {
    /// Defaults for a region planned with `epsilon`: `k = 4`, `max_step = 1.5 epsilon`.
    pub fn for_epsilon(epsilon: f64) -> Self {
        Self { k: 4, max_step: 1.5 * epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParams("max_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub t: f64,
    /// `None` where the sample pose has no IK solution.
    pub config: Option<JointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointTrajectory {
    pub samples: Vec<JointSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub success: bool,
    pub max_joint_jump: f64,
    pub out_of_region_samples: Vec<usize>,
    pub collision_samples: Vec<usize>,
    pub unreachable_samples: Vec<usize>,
}

/// Output file: joint trajectory plus report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub trajectory: JointTrajectory,
    pub report: ReproductionReport,
}

impl Reproduction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reproduction serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

fn check_graph(region: &Region, graph: &TaskGraph) -> Result<()> {
    let expected = graph.graph_ref();
    if region.graph_ref != expected {
        return Err(Error::GraphMismatch { expected, found: region.graph_ref.clone() });
    }
    Ok(())
}

/// Indices of the `k` region poses nearest to `x`; ties go to lower indices.
fn nearest_mapped(region: &Region, graph: &TaskGraph, x: &Pose, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = region
        .pose_indices
        .iter()
        .map(|&i| (pose_metric(&graph.grid.poses[i], x, NEAREST_ROTATION_WEIGHT), i))
        .collect();
    let k = k.min(scored.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    scored.select_nth_unstable_by(k - 1, cmp);
    scored.truncate(k);
    scored.sort_by(cmp);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// The motion generator: picks, per sample, the IK solution closest to any
/// of the `k` nearest mapped configurations. Failures are reported, never
/// repaired.
pub fn reproduce(
    traj: &TaskTrajectory,
    region: &Region,
    graph: &TaskGraph,
    model: &ArmModel,
    env: &Environment,
    params: &ReproductionParams,
) -> Result<(JointTrajectory, ReproductionReport)> {
    params.validate()?;
    check_graph(region, graph)?;
    if env.revision != region.env_revision {
        return Err(Error::StaleRegion { env: env.revision, region: region.env_revision });
    }
    struct Step {
        config: Option<JointConfig>,
        in_region: bool,
        colliding: bool,
    }
    let steps: Vec<Step> = traj
        .samples()
        .par_iter()
        .map(|s| {
            let in_region = region.contains(crate::taskspace::nearest_pose(&graph.grid, &s.pose));
            let anchors: Vec<&JointConfig> = nearest_mapped(region, graph, &s.pose, params.k)
                .into_iter()
                .filter_map(|i| region.config(i))
                .collect();
            let mut best: Option<(f64, JointConfig)> = None;
            for q in analytic_ik(model, &s.pose) {
                let d = anchors
                    .iter()
                    .map(|a| config_distance(&q, a))
                    .fold(f64::INFINITY, f64::min);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
            let config = best.map(|(_, q)| q);
            let colliding = config.map_or(false, |q| in_collision(model, &q, env));
            Step { config, in_region, colliding }
        })
        .collect();

    let mut report = ReproductionReport {
        success: false,
        max_joint_jump: 0.0,
        out_of_region_samples: Vec::new(),
        collision_samples: Vec::new(),
        unreachable_samples: Vec::new(),
    };
    let mut prev: Option<JointConfig> = None;
    for (i, step) in steps.iter().enumerate() {
        if !step.in_region {
            report.out_of_region_samples.push(i);
        }
        if step.colliding {
            report.collision_samples.push(i);
        }
        match step.config {
            None => report.unreachable_samples.push(i),
            Some(q) => {
                if let Some(p) = prev {
                    report.max_joint_jump = report.max_joint_jump.max(config_distance(&p, &q));
                }
                prev = Some(q);
            }
        }
    }
    report.success = report.out_of_region_samples.is_empty()
        && report.collision_samples.is_empty()
        && report.unreachable_samples.is_empty()
        && report.max_joint_jump <= params.max_step;
    let trajectory = JointTrajectory {
        samples: traj
            .samples()
            .iter()
            .zip(&steps)
            .map(|(s, step)| JointSample { t: s.t, config: step.config })
            .collect(),
    };
    Ok((trajectory, report))
}

/// Per sample: is the nearest orientation-similar grid pose in the region?
/// Samples further than half a spacing outside the grid bounds are false.
pub fn validate_demo(traj: &TaskTrajectory, region: &Region, graph: &TaskGraph, similarity_threshold: f64) -> Vec<bool> {
    let grid = &graph.grid;
    let margin = grid.spacing() / 2.0;
    traj.samples()
        .par_iter()
        .map(|s| {
            if !grid.bounds().contains(&s.pose.position, margin) {
                return false;
            }
            let mut best: Option<(f64, usize)> = None;
            for (i, p) in grid.poses.iter().enumerate() {
                if orientation_similarity(&s.pose, p) < similarity_threshold {
                    continue;
                }
                let d = pose_metric(p, &s.pose, NEAREST_ROTATION_WEIGHT);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
            best.map_or(false, |(_, i)| region.contains(i))
        })
        .collect()
}
