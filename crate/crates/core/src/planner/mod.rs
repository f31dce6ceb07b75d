//! Region planning: subspaces of the task graph that admit an
//! epsilon-bounded configuration mapping, and their online maintenance.

mod growth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{in_collision, Environment};
use crate::error::{Error, Result};
use crate::kinematics::{analytic_ik, config_distance, ArmModel, JointConfig, Pose};
use crate::taskspace::TaskGraph;

pub use growth::{largest_component, plan_subspaces, MappingProblem, Subspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Bound on configuration distance across a graph edge, radians.
    pub epsilon: f64,
    pub num_restarts: usize,
    pub num_subspace_rounds: usize,
    pub revisit_penalty: f64,
    pub random_seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            epsilon: 0.35,
            num_restarts: 8,
            num_subspace_rounds: 3,
            revisit_penalty: 1.0,
            random_seed: 0,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.num_restarts == 0 {
            return Err(Error::InvalidParams("num_restarts must be at least 1".into()));
        }
        if !(self.revisit_penalty >= 0.0) {
            return Err(Error::InvalidParams("revisit_penalty must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GHAMapping {
    pub assignment: BTreeMap<usize, JointConfig>,
    pub total_path_cost: f64,
}

impl GHAMapping {
    pub fn get(&self, pose: usize) -> Option<&JointConfig> {
        self.assignment.get(&pose)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub pose_indices: BTreeSet<usize>,
    pub mapping: GHAMapping,
    pub epsilon: f64,
    pub env_revision: u64,
    pub graph_ref: String,
}

impl Region {
    pub fn len(&self) -> usize {
        self.pose_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pose_indices.is_empty()
    }

    pub fn contains(&self, pose: usize) -> bool {
        self.pose_indices.contains(&pose)
    }

    pub fn config(&self, pose: usize) -> Option<&JointConfig> {
        self.mapping.get(pose)
    }

    pub fn to_file(&self) -> RegionFile {
        RegionFile {
            graph_ref: self.graph_ref.clone(),
            epsilon: self.epsilon,
            env_revision: self.env_revision,
            total_path_cost: self.mapping.total_path_cost,
            entries: self
                .mapping
                .assignment
                .iter()
                .map(|(&pose_index, &config)| RegionEntry { pose_index, config })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("region serializes")
    }

    /// Parses a region file and checks it was built on `graph`.
    pub fn from_json(text: &str, graph: &TaskGraph) -> Result<Self> {
        let file: RegionFile = serde_json::from_str(text)?;
        file.into_region(graph)
    }

    pub fn load(path: impl AsRef<Path>, graph: &TaskGraph) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, graph)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub pose_index: usize,
    pub config: JointConfig,
}

/// On-disk region representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub graph_ref: String,
    pub epsilon: f64,
    pub env_revision: u64,
    #[serde(default)]
    pub total_path_cost: f64,
    pub entries: Vec<RegionEntry>,
}

impl RegionFile {
    pub fn into_region(self, graph: &TaskGraph) -> Result<Region> {
        let expected = graph.graph_ref();
        if self.graph_ref != expected {
            return Err(Error::GraphMismatch { expected, found: self.graph_ref });
        }
        let mut assignment = BTreeMap::new();
        for e in self.entries {
            if e.pose_index >= graph.grid.len() {
                return Err(Error::InvalidGrid(format!("pose index {} out of range", e.pose_index)));
            }
            if !e.config.is_finite() {
                return Err(Error::InvalidParams(format!("non-finite config at pose {}", e.pose_index)));
            }
            if assignment.insert(e.pose_index, e.config).is_some() {
                return Err(Error::InvalidParams(format!("pose {} mapped twice", e.pose_index)));
            }
        }
        let mapping = GHAMapping { total_path_cost: total_cost(&assignment, graph), assignment };
        Ok(Region {
            pose_indices: mapping.assignment.keys().copied().collect(),
            mapping,
            epsilon: self.epsilon,
            env_revision: self.env_revision,
            graph_ref: self.graph_ref,
        })
    }
}

/// In-limit, collision-free IK solutions for `pose`, in solver order.
pub fn valid_configurations(model: &ArmModel, env: &Environment, pose: &Pose) -> Vec<JointConfig> {
    analytic_ik(model, pose)
        .into_iter()
        .filter(|q| !in_collision(model, q, env))
        .collect()
}

/// The arm planning problem over a task graph.
pub struct ArmProblem<'a> {
    graph: &'a TaskGraph,
    candidates: Vec<Vec<JointConfig>>,
}

impl<'a> ArmProblem<'a> {
    pub fn new(model: &ArmModel, env: &Environment, graph: &'a TaskGraph) -> Self {
        let candidates = graph
            .grid
            .poses
            .par_iter()
            .map(|p| valid_configurations(model, env, p))
            .collect();
        Self { graph, candidates }
    }
}

impl MappingProblem for ArmProblem<'_> {
    type Config = JointConfig;

    fn pose_count(&self) -> usize {
        self.candidates.len()
    }

    fn neighbors(&self, pose: usize) -> &[usize] {
        self.graph.neighbors(pose)
    }

    fn candidates(&self, pose: usize) -> &[JointConfig] {
        &self.candidates[pose]
    }

    fn distance(&self, a: &JointConfig, b: &JointConfig) -> f64 {
        config_distance(a, b)
    }
}

pub fn plan_regions(
    model: &ArmModel,
    env: &Environment,
    graph: &TaskGraph,
    params: &PlannerParams,
) -> Result<Vec<Region>> {
    params.validate()?;
    if graph.grid.is_empty() {
        return Err(Error::InvalidGrid("graph has no poses".into()));
    }
    let problem = ArmProblem::new(model, env, graph);
    let graph_ref = graph.graph_ref();
    Ok(plan_subspaces(&problem, params)
        .into_iter()
        .map(|s| Region {
            pose_indices: s.assignment.keys().copied().collect(),
            mapping: GHAMapping { assignment: s.assignment, total_path_cost: s.total_path_cost },
            epsilon: params.epsilon,
            env_revision: env.revision,
            graph_ref: graph_ref.clone(),
        })
        .collect())
}

/// Largest region; ties by lower total path cost, then list order.
pub fn select_primary_region(regions: &[Region]) -> Result<&Region> {
    let mut best: Option<&Region> = None;
    for r in regions {
        best = match best {
            Some(b)
                if b.len() > r.len()
                    || (b.len() == r.len() && b.mapping.total_path_cost <= r.mapping.total_path_cost) =>
            {
                Some(b)
            }
            _ => Some(r),
        };
    }
    best.ok_or(Error::NoRegions)
}

/// Drops mapped configurations that collide in `env`, then keeps the largest
/// connected remainder. Never adds poses or changes surviving configs.
pub fn update_region(region: &Region, model: &ArmModel, env: &Environment, graph: &TaskGraph) -> Result<Region> {
    if env.revision < region.env_revision {
        return Err(Error::StaleEnvironment { env: env.revision, region: region.env_revision });
    }
    let expected = graph.graph_ref();
    if region.graph_ref != expected {
        return Err(Error::GraphMismatch { expected, found: region.graph_ref.clone() });
    }
    let entries: Vec<(usize, JointConfig)> = region.mapping.assignment.iter().map(|(&p, &q)| (p, q)).collect();
    let free: Vec<bool> = entries.par_iter().map(|(_, q)| !in_collision(model, q, env)).collect();
    let mut members = vec![false; graph.grid.len()];
    for ((p, _), ok) in entries.iter().zip(&free) {
        members[*p] = *ok;
    }
    let keep = largest_component(&members, |p| graph.neighbors(p));
    let assignment: BTreeMap<usize, JointConfig> =
        keep.iter().map(|p| (*p, region.mapping.assignment[p])).collect();
    Ok(Region {
        pose_indices: keep.into_iter().collect(),
        mapping: GHAMapping { total_path_cost: total_cost(&assignment, graph), assignment },
        epsilon: region.epsilon,
        env_revision: env.revision,
        graph_ref: region.graph_ref.clone(),
    })
}

pub fn edge_cost(assignment: &BTreeMap<usize, JointConfig>, edge: (usize, usize)) -> Result<f64> {
    let a = assignment.get(&edge.0).ok_or(Error::UnmappedPose(edge.0))?;
    let b = assignment.get(&edge.1).ok_or(Error::UnmappedPose(edge.1))?;
    Ok(config_distance(a, b))
}

/// Sum of edge costs over graph edges with both endpoints mapped.
pub fn total_cost(assignment: &BTreeMap<usize, JointConfig>, graph: &TaskGraph) -> f64 {
    let mut total = 0.0;
    for (&p, a) in assignment {
        for &q in graph.neighbors(p) {
            if q > p {
                if let Some(b) = assignment.get(&q) {
                    total += config_distance(a, b);
                }
            }
        }
    }
    total
}
