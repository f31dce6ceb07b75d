//! Discretized SE(3) task space and the neighbor graph over it.

use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::{quaternion_angle, Pose};

/// Default weight (m/rad) of the angular term in [`nearest_pose`].
pub const NEAREST_ROTATION_WEIGHT: f64 = 0.1;

const LATTICE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - margin && p[i] <= self.max[i] + margin)
    }
}

/// Lattice parameters of a task grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub bounds: Bounds,
    pub spacing: f64,
    /// Nominal tool orientation `(w, x, y, z)`.
    pub nominal_orientation: [f64; 4],
    /// Rotation vectors (radians, tool frame) applied on top of the nominal.
    #[serde(default)]
    pub orientation_offsets: Vec<[f64; 3]>,
}

/// Grid spec file: lattice parameters plus the graph ball radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(flatten)]
    pub grid: GridParams,
    pub ball_radius: f64,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Content hash identifying the grid and graph this spec produces.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("grid spec serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn build(&self) -> Result<TaskGraph> {
        let grid = TaskGrid::from_params(self.grid.clone())?;
        build_graph(grid, self.ball_radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGrid {
    pub params: GridParams,
    pub poses: Vec<Pose>,
    pub orientation_set: Vec<UnitQuaternion<f64>>,
    /// Lattice points along x, y, z.
    pub dims: [usize; 3],
}

impl TaskGrid {
    pub fn from_params(params: GridParams) -> Result<Self> {
        if !(params.spacing > 0.0) || !params.spacing.is_finite() {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        let b = params.bounds;
        if (0..3).any(|i| !(b.max[i] >= b.min[i])) {
            return Err(Error::InvalidGrid("bounds are empty".into()));
        }
        let q = params.nominal_orientation;
        let nominal = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        let mut orientation_set = vec![nominal];
        for off in &params.orientation_offsets {
            orientation_set.push(nominal * UnitQuaternion::from_scaled_axis(Vector3::from(*off)));
        }
        let dims: [usize; 3] =
            std::array::from_fn(|i| ((b.max[i] - b.min[i]) / params.spacing + LATTICE_EPS).floor() as usize + 1);
        let mut poses = Vec::with_capacity(dims.iter().product::<usize>() * orientation_set.len());
        for ix in 0..dims[0] {
            for iy in 0..dims[1] {
                for iz in 0..dims[2] {
                    let p = Vector3::new(
                        b.min[0] + ix as f64 * params.spacing,
                        b.min[1] + iy as f64 * params.spacing,
                        b.min[2] + iz as f64 * params.spacing,
                    );
                    for o in &orientation_set {
                        poses.push(Pose::new(p, *o));
                    }
                }
            }
        }
        Ok(Self {
            params,
            poses,
            orientation_set,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn bounds(&self) -> Bounds {
        self.params.bounds
    }

    pub fn spacing(&self) -> f64 {
        self.params.spacing
    }

    pub fn orientation_count(&self) -> usize {
        self.orientation_set.len()
    }

    pub fn orientation_index(&self, pose_index: usize) -> usize {
        pose_index % self.orientation_set.len()
    }

    pub fn lattice_index(&self, pose_index: usize) -> [usize; 3] {
        let cell = pose_index / self.orientation_set.len();
        let iz = cell % self.dims[2];
        let iy = (cell / self.dims[2]) % self.dims[1];
        let ix = cell / (self.dims[2] * self.dims[1]);
        [ix, iy, iz]
    }

    pub fn index_of(&self, lattice: [usize; 3], orientation: usize) -> usize {
        ((lattice[0] * self.dims[1] + lattice[1]) * self.dims[2] + lattice[2]) * self.orientation_set.len()
            + orientation
    }

    /// Orientation pairs connected by graph edges: entries whose angular
    /// distance is the smallest nonzero one in the set.
    pub fn orientation_adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.orientation_set.len();
        let mut min_sep = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = quaternion_angle(&self.orientation_set[i], &self.orientation_set[j]);
                if d > 1e-12 {
                    min_sep = min_sep.min(d);
                }
            }
        }
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                let d = quaternion_angle(&self.orientation_set[i], &self.orientation_set[j]);
                adj[i][j] = i == j || d <= 1e-12 || d <= min_sep * (1.0 + 1e-9);
            }
        }
        adj
    }
}

/// Regular lattice of positions times the orientation set.
pub fn build_grid(
    bounds: Bounds,
    position_spacing: f64,
    nominal_orientation: UnitQuaternion<f64>,
    orientation_offsets: &[[f64; 3]],
) -> Result<TaskGrid> {
    let q = nominal_orientation.quaternion();
    TaskGrid::from_params(GridParams {
        bounds,
        spacing: position_spacing,
        nominal_orientation: [q.w, q.i, q.j, q.k],
        orientation_offsets: orientation_offsets.to_vec(),
    })
}

/// Undirected ball graph over a task grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    pub grid: TaskGrid,
    pub ball_radius: f64,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
}

impl TaskGraph {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            grid: self.grid.params.clone(),
            ball_radius: self.ball_radius,
        }
    }

    /// Content hash of the grid and graph parameters.
    pub fn graph_ref(&self) -> String {
        self.spec().content_hash()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Connects poses within `ball_radius` whose orientations are identical or
/// adjacent in the orientation set.
pub fn build_graph(grid: TaskGrid, ball_radius: f64) -> Result<TaskGraph> {
    if !(ball_radius > 0.0) {
        return Err(Error::InvalidGrid("ball radius must be positive".into()));
    }
    let reach = (ball_radius / grid.spacing()).floor() as i64 + 1;
    let mut offsets = Vec::new();
    for dx in -reach..=reach {
        for dy in -reach..=reach {
            for dz in -reach..=reach {
                offsets.push([dx, dy, dz]);
            }
        }
    }
    let orient_adj = grid.orientation_adjacency();
    let n_orient = grid.orientation_count();
    let mut adjacency = vec![Vec::new(); grid.len()];
    for (i, neighbors) in adjacency.iter_mut().enumerate() {
        let li = grid.lattice_index(i);
        let oi = grid.orientation_index(i);
        for off in &offsets {
            let mut lj = [0usize; 3];
            let mut inside = true;
            for a in 0..3 {
                let v = li[a] as i64 + off[a];
                if v < 0 || v >= grid.dims[a] as i64 {
                    inside = false;
                    break;
                }
                lj[a] = v as usize;
            }
            if !inside {
                continue;
            }
            let base = grid.index_of(lj, 0);
            if grid.poses[i].position_distance(&grid.poses[base]) > ball_radius {
                continue;
            }
            for oj in 0..n_orient {
                let j = base + oj;
                if j != i && orient_adj[oi][oj] {
                    neighbors.push(j);
                }
            }
        }
        neighbors.sort_unstable();
    }
    Ok(TaskGraph {
        grid,
        ball_radius,
        adjacency,
    })
}

/// Position distance plus `rotation_weight` times angular distance.
pub fn pose_metric(a: &Pose, b: &Pose, rotation_weight: f64) -> f64 {
    a.position_distance(b) + rotation_weight * a.angular_distance(b)
}

/// Index of the grid pose closest to `query`; ties go to the lowest index.
pub fn nearest_pose(grid: &TaskGrid, query: &Pose) -> usize {
    nearest_pose_weighted(grid, query, NEAREST_ROTATION_WEIGHT)
}

pub fn nearest_pose_weighted(grid: &TaskGrid, query: &Pose, rotation_weight: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in grid.poses.iter().enumerate() {
        let d = pose_metric(p, query, rotation_weight);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Dot product of the two tool forward (z) axes.
pub fn orientation_similarity(a: &Pose, b: &Pose) -> f64 {
    a.forward_axis().dot(&b.forward_axis()).clamp(-1.0, 1.0)
}
