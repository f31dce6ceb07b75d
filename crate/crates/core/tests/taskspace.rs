mod common;

use std::collections::BTreeSet;

use guided_lfd::kinematics::{quaternion_angle, Pose};
use guided_lfd::taskspace::{nearest_pose, pose_metric, Bounds, GridParams, GridSpec, TaskGraph, NEAREST_ROTATION_WEIGHT};
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

fn spec(ball_radius: f64, offsets: Vec<[f64; 3]>) -> GridSpec {
    GridSpec {
        grid: GridParams {
            bounds: Bounds { min: [0.2, -0.1, 0.1], max: [0.4, 0.1, 0.25] },
            spacing: 0.05,
            nominal_orientation: [0.0, 1.0, 0.0, 0.0],
            orientation_offsets: offsets,
        },
        ball_radius,
    }
}

fn brute_force_edges(graph: &TaskGraph) -> BTreeSet<(usize, usize)> {
    let grid = &graph.grid;
    let set = &grid.orientation_set;
    let mut min_sep = f64::INFINITY;
    for a in set {
        for b in set {
            let d = quaternion_angle(a, b);
            if d > 1e-12 {
                min_sep = min_sep.min(d);
            }
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            let (a, b) = (&grid.poses[i], &grid.poses[j]);
            let rot = a.angular_distance(b);
            if a.position_distance(b) <= graph.ball_radius && (rot <= 1e-12 || rot <= min_sep * (1.0 + 1e-9)) {
                edges.insert((i, j));
            }
        }
    }
    edges
}

#[test]
fn graph_matches_brute_force() {
    let offsets = vec![[0.0, 0.2, 0.0], [0.0, -0.2, 0.0], [0.2, 0.0, 0.0]];
    for radius in [0.04, 0.0501, 0.08, 0.09, 0.12] {
        let graph = spec(radius, offsets.clone()).build().unwrap();
        let ours: BTreeSet<(usize, usize)> = graph.edges().collect();
        assert_eq!(ours, brute_force_edges(&graph), "radius {radius}");
        for i in 0..graph.grid.len() {
            for &j in graph.neighbors(i) {
                assert!(graph.neighbors(j).contains(&i));
            }
        }
    }
}

#[test]
fn interior_neighbor_counts() {
    // Single orientation: face neighbors, then edge diagonals.
    for (radius, expected) in [(0.0501, 6), (0.08, 18), (0.09, 26)] {
        let graph = spec(radius, Vec::new()).build().unwrap();
        let i = graph.grid.index_of([2, 2, 1], 0);
        assert_eq!(graph.neighbors(i).len(), expected, "radius {radius}");
    }
}

#[test]
fn bundled_grid_is_within_budget() {
    let s = common::wall();
    assert!(s.graph.grid.len() <= 20_000);
    assert_eq!(s.graph.edges().count(), s.graph.edge_count());
    assert_eq!(s.graph.graph_ref(), s.grid_spec.content_hash());
}

fn linear_scan(graph: &TaskGraph, q: &Pose) -> usize {
    let mut scored: Vec<(f64, usize)> = graph
        .grid
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| (pose_metric(p, q, NEAREST_ROTATION_WEIGHT), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored[0].1
}

proptest! {
    #[test]
    fn nearest_pose_matches_scan(
        x in 0.1f64..0.5, y in -0.2f64..0.2, z in 0.0f64..0.35,
        rx in -0.5f64..0.5, ry in -0.5f64..0.5, rz in -0.5f64..0.5,
    ) {
        let graph = spec(0.0501, vec![[0.0, 0.2, 0.0], [0.0, -0.2, 0.0]]).build().unwrap();
        let q = Pose::new(
            Vector3::new(x, y, z),
            graph.grid.orientation_set[0] * UnitQuaternion::from_scaled_axis(Vector3::new(rx, ry, rz)),
        );
        prop_assert_eq!(nearest_pose(&graph.grid, &q), linear_scan(&graph, &q));
    }

    #[test]
    fn grid_poses_are_their_own_nearest(k in 0usize..1000) {
        let graph = spec(0.0501, vec![[0.0, 0.2, 0.0]]).build().unwrap();
        let i = k % graph.grid.len();
        prop_assert_eq!(nearest_pose(&graph.grid, &graph.grid.poses[i]), i);
    }

    #[test]
    fn lattice_index_roundtrips(k in 0usize..10_000) {
        let graph = spec(0.0501, vec![[0.0, 0.2, 0.0], [0.0, -0.2, 0.0]]).build().unwrap();
        let i = k % graph.grid.len();
        prop_assert_eq!(graph.grid.index_of(graph.grid.lattice_index(i), graph.grid.orientation_index(i)), i);
    }
}
