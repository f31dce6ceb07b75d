//! Live guidance: which grid voxels to show as blocked for the current tool
//! pose, why each is blocked, and compact frame-to-frame diffs.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{in_collision, Environment};
use crate::error::{Error, Result};
use crate::kinematics::{analytic_ik, ArmModel, Pose};
use crate::planner::Region;
use crate::taskspace::{orientation_similarity, TaskGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolPose {
    pub pose: Pose,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceParams {
    /// Minimum forward-axis dot product for a voxel to be shown.
    pub similarity_threshold: f64,
    /// Voxels closer than this are fully opaque, meters.
    pub opacity_near_distance: f64,
    /// Radius of the cleared column above the tool, meters.
    pub overhead_clear_radius: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self {
            similarity_threshold: 30f64.to_radians().cos(),
            opacity_near_distance: 0.1,
            overhead_clear_radius: 0.08,
        }
    }
}

/// Least opacity, reached at three times the near distance.
pub const MIN_OPACITY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelClass {
    /// No IK solution.
    Unreachable,
    /// Every IK solution collides.
    CollisionAllIk,
    /// Free IK exists but no branch stays within epsilon of the region.
    LargeConfigChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockedVoxel {
    pub pose_index: usize,
    pub class: VoxelClass,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceFrame {
    /// Sorted by pose index.
    pub blocked: Vec<BlockedVoxel>,
    pub tool: ToolPose,
    pub region_revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpacityChange {
    pub pose_index: usize,
    pub opacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDiff {
    pub added: Vec<BlockedVoxel>,
    pub removed: Vec<usize>,
    pub changed_opacity: Vec<OpacityChange>,
    pub tool: ToolPose,
    pub region_revision: u64,
}

impl FrameDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed_opacity.is_empty()
    }
}

pub fn opacity(distance: f64, near: f64) -> f64 {
    if distance <= near {
        1.0
    } else if distance >= 3.0 * near {
        MIN_OPACITY
    } else {
        1.0 - (1.0 - MIN_OPACITY) * (distance - near) / (2.0 * near)
    }
}

/// True if `p` lies in the column strictly above the tool.
pub fn overhead_cleared(tool: &Pose, p: &Pose, radius: f64) -> bool {
    let d = p.position - tool.position;
    d.z > 0.0 && (d.x * d.x + d.y * d.y).sqrt() <= radius
}

/// Classifies a voxel from its full IK set, ignoring region membership.
pub fn classify_pose(model: &ArmModel, env: &Environment, pose: &Pose) -> VoxelClass {
    let sols = analytic_ik(model, pose);
    if sols.is_empty() {
        VoxelClass::Unreachable
    } else if sols.iter().all(|q| in_collision(model, q, env)) {
        VoxelClass::CollisionAllIk
    } else {
        VoxelClass::LargeConfigChange
    }
}

/// Classifies a pose outside `region`. Region members are rejected.
pub fn classify_voxel(
    pose_index: usize,
    region: &Region,
    graph: &TaskGraph,
    model: &ArmModel,
    env: &Environment,
) -> Result<VoxelClass> {
    if region.contains(pose_index) {
        return Err(Error::PoseInRegion(pose_index));
    }
    let pose = graph
        .grid
        .poses
        .get(pose_index)
        .ok_or_else(|| Error::InvalidGrid(format!("pose index {pose_index} out of range")))?;
    Ok(classify_pose(model, env, pose))
}

/// Classification cache keyed by (pose, environment revision).
///
/// One cache serves one arm model and grid.
#[derive(Debug, Default)]
pub struct Classifier {
    cache: RwLock<HashMap<(usize, u64), VoxelClass>>,
}

impl Classifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn classify(
        &self,
        pose_index: usize,
        region: &Region,
        graph: &TaskGraph,
        model: &ArmModel,
        env: &Environment,
    ) -> Result<VoxelClass> {
        if region.contains(pose_index) {
            return Err(Error::PoseInRegion(pose_index));
        }
        let key = (pose_index, env.revision);
        if let Some(c) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*c);
        }
        let c = classify_voxel(pose_index, region, graph, model, env)?;
        self.cache.write().expect("cache lock").insert(key, c);
        Ok(c)
    }

    /// Classifies every pose outside `region` ahead of time.
    pub fn warm(&self, region: &Region, graph: &TaskGraph, model: &ArmModel, env: &Environment) {
        let missing: Vec<usize> = {
            let cache = self.cache.read().expect("cache lock");
            (0..graph.grid.len())
                .filter(|i| !region.contains(*i) && !cache.contains_key(&(*i, env.revision)))
                .collect()
        };
        let classes: Vec<(usize, VoxelClass)> = missing
            .into_par_iter()
            .map(|i| (i, classify_pose(model, env, &graph.grid.poses[i])))
            .collect();
        let mut cache = self.cache.write().expect("cache lock");
        cache.retain(|(_, rev), _| *rev >= env.revision);
        for (i, c) in classes {
            cache.insert((i, env.revision), c);
        }
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Computes the blocked voxel set for one tool pose.
pub fn blocked_voxels(
    graph: &TaskGraph,
    region: &Region,
    tool: &ToolPose,
    params: &GuidanceParams,
    model: &ArmModel,
    env: &Environment,
    classifier: &Classifier,
) -> Result<GuidanceFrame> {
    let expected = graph.graph_ref();
    if region.graph_ref != expected {
        return Err(Error::GraphMismatch { expected, found: region.graph_ref.clone() });
    }
    if env.revision != region.env_revision {
        return Err(Error::StaleRegion { env: env.revision, region: region.env_revision });
    }
    let grid = &graph.grid;
    let similar: Vec<bool> = grid
        .orientation_set
        .iter()
        .map(|q| {
            let probe = Pose::new(nalgebra::Vector3::zeros(), *q);
            orientation_similarity(&tool.pose, &probe) >= params.similarity_threshold
        })
        .collect();
    let mut member = vec![false; grid.len()];
    for &i in &region.pose_indices {
        member[i] = true;
    }
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            !member[i]
                && similar[grid.orientation_index(i)]
                && !overhead_cleared(&tool.pose, &grid.poses[i], params.overhead_clear_radius)
        })
        .collect();
    let mut blocked = Vec::with_capacity(candidates.len());
    for i in candidates {
        let class = classifier.classify(i, region, graph, model, env)?;
        let d = grid.poses[i].position_distance(&tool.pose);
        blocked.push(BlockedVoxel {
            pose_index: i,
            class,
            opacity: opacity(d, params.opacity_near_distance),
        });
    }
    Ok(GuidanceFrame {
        blocked,
        tool: *tool,
        region_revision: region.env_revision,
    })
}

pub fn frame_diff(prev: &GuidanceFrame, next: &GuidanceFrame) -> Result<FrameDiff> {
    if prev.region_revision != next.region_revision {
        return Err(Error::RevisionMismatch {
            prev: prev.region_revision,
            next: next.region_revision,
        });
    }
    let old: BTreeMap<usize, &BlockedVoxel> = prev.blocked.iter().map(|b| (b.pose_index, b)).collect();
    let new: BTreeMap<usize, &BlockedVoxel> = next.blocked.iter().map(|b| (b.pose_index, b)).collect();
    let mut diff = FrameDiff {
        added: Vec::new(),
        removed: Vec::new(),
        changed_opacity: Vec::new(),
        tool: next.tool,
        region_revision: next.region_revision,
    };
    for (i, b) in &new {
        match old.get(i) {
            None => diff.added.push(**b),
            // Classes only change with the region revision.
            Some(a) if a.class != b.class => diff.added.push(**b),
            Some(a) if a.opacity != b.opacity => diff.changed_opacity.push(OpacityChange {
                pose_index: *i,
                opacity: b.opacity,
            }),
            Some(_) => {}
        }
    }
    for i in old.keys() {
        if !new.contains_key(i) {
            diff.removed.push(*i);
        }
    }
    Ok(diff)
}

pub fn apply_diff(prev: &GuidanceFrame, diff: &FrameDiff) -> Result<GuidanceFrame> {
    if prev.region_revision != diff.region_revision {
        return Err(Error::RevisionMismatch {
            prev: prev.region_revision,
            next: diff.region_revision,
        });
    }
    let mut map: BTreeMap<usize, BlockedVoxel> = prev.blocked.iter().map(|b| (b.pose_index, *b)).collect();
    for i in &diff.removed {
        map.remove(i);
    }
    for b in &diff.added {
        map.insert(b.pose_index, *b);
    }
    for c in &diff.changed_opacity {
        if let Some(b) = map.get_mut(&c.pose_index) {
            b.opacity = c.opacity;
        }
    }
    Ok(GuidanceFrame {
        blocked: map.into_values().collect(),
        tool: diff.tool,
        region_revision: diff.region_revision,
    })
}
