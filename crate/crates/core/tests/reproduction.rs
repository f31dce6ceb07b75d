mod common;

use std::sync::OnceLock;

use guided_lfd::collision::{in_collision, Shape};
use guided_lfd::guidance::GuidanceParams;
use guided_lfd::kinematics::{analytic_ik, config_distance};
use guided_lfd::planner::Region;
use guided_lfd::reproduction::{reproduce, validate_demo, ReproductionParams};
use guided_lfd::scenario::{downward, pitched, seam, Scenario, PITCH_BACK};
use guided_lfd::taskspace::{orientation_similarity, pose_metric, NEAREST_ROTATION_WEIGHT};
use guided_lfd::{cdmp::TaskTrajectory, Error};
use proptest::prelude::*;

fn shared() -> &'static (Scenario, Region) {
    static WALL: OnceLock<(Scenario, Region)> = OnceLock::new();
    WALL.get_or_init(|| {
        let s = common::wall();
        let r = common::wall_region(&s);
        (s, r)
    })
}

fn params(region: &Region) -> ReproductionParams {
    ReproductionParams::for_epsilon(region.epsilon)
}

#[test]
fn downward_seam_behind_wall_fails() {
    let (s, region) = shared();
    let traj = seam(downward(), 4.0, 0.02).unwrap();
    let (_, report) = reproduce(&traj, region, &s.graph, &s.model, &s.env, &params(region)).unwrap();
    assert!(!report.success);
    assert!(!report.out_of_region_samples.is_empty());
}

#[test]
fn pitched_seam_behind_wall_succeeds() {
    let (s, region) = shared();
    let traj = seam(pitched(PITCH_BACK), 4.0, 0.02).unwrap();
    let (joints, report) = reproduce(&traj, region, &s.graph, &s.model, &s.env, &params(region)).unwrap();
    assert!(report.success, "{report:?}");
    assert!(report.max_joint_jump <= 1.5 * region.epsilon);
    for (sample, js) in traj.samples().iter().zip(&joints.samples) {
        let q = js.config.expect("every sample solved");
        let fk = s.model.forward_kinematics(&q);
        assert!(fk.position_distance(&sample.pose) <= 1e-6);
        assert!(fk.angular_distance(&sample.pose) <= 1e-6);
        assert!(!in_collision(&s.model, &q, &s.env));
    }
}

/// Straightforward restatement of the motion generator.
fn oracle(traj: &TaskTrajectory, s: &Scenario, region: &Region, k: usize) -> Vec<(Option<[f64; 6]>, bool)> {
    traj.samples()
        .iter()
        .map(|smp| {
            let grid = &s.graph.grid;
            let mut all: Vec<(f64, usize)> =
                (0..grid.len()).map(|i| (pose_metric(&grid.poses[i], &smp.pose, NEAREST_ROTATION_WEIGHT), i)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let in_region = region.contains(all[0].1);
            let anchors: Vec<_> = all.iter().filter(|(_, i)| region.contains(*i)).take(k).map(|(_, i)| region.config(*i).unwrap()).collect();
            let mut best: Option<(f64, [f64; 6])> = None;
            for q in analytic_ik(&s.model, &smp.pose) {
                let d = anchors.iter().map(|a| config_distance(&q, a)).fold(f64::INFINITY, f64::min);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, q.0));
                }
            }
            (best.map(|b| b.1), in_region)
        })
        .collect()
}

#[test]
fn selection_matches_oracle() {
    let (s, region) = shared();
    for q in [downward(), pitched(PITCH_BACK), pitched(-0.2)] {
        let traj = seam(q, 2.0, 0.05).unwrap();
        let (joints, report) = reproduce(&traj, region, &s.graph, &s.model, &s.env, &params(region)).unwrap();
        let expected = oracle(&traj, s, region, 4);
        for (i, ((cfg, in_region), js)) in expected.iter().zip(&joints.samples).enumerate() {
            assert_eq!(js.config.map(|c| c.0), *cfg, "sample {i}");
            assert_eq!(!report.out_of_region_samples.contains(&i), *in_region, "sample {i}");
        }
    }
}

#[test]
fn reproduction_is_deterministic() {
    let (s, region) = shared();
    let traj = seam(pitched(PITCH_BACK), 2.0, 0.02).unwrap();
    let a = reproduce(&traj, region, &s.graph, &s.model, &s.env, &params(region)).unwrap();
    let b = reproduce(&traj, region, &s.graph, &s.model, &s.env, &params(region)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stale_region_is_refused() {
    let (s, region) = shared();
    let env = s.env.add_object("ball", Shape::Sphere { center: [2.0, 2.0, 2.0], radius: 0.1 }).unwrap();
    let traj = seam(pitched(PITCH_BACK), 1.0, 0.05).unwrap();
    let err = reproduce(&traj, region, &s.graph, &s.model, &env, &params(region)).unwrap_err();
    assert!(matches!(err, Error::StaleRegion { env: 1, region: 0 }));
}

fn validate_oracle(traj: &TaskTrajectory, s: &Scenario, region: &Region, threshold: f64) -> Vec<bool> {
    let grid = &s.graph.grid;
    let b = grid.bounds();
    let half = grid.spacing() / 2.0;
    traj.samples()
        .iter()
        .map(|smp| {
            let p = smp.pose.position;
            if (0..3).any(|i| p[i] < b.min[i] - half || p[i] > b.max[i] + half) {
                return false;
            }
            let best = (0..grid.len())
                .filter(|&i| orientation_similarity(&smp.pose, &grid.poses[i]) >= threshold)
                .min_by(|&i, &j| {
                    pose_metric(&grid.poses[i], &smp.pose, NEAREST_ROTATION_WEIGHT)
                        .total_cmp(&pose_metric(&grid.poses[j], &smp.pose, NEAREST_ROTATION_WEIGHT))
                        .then(i.cmp(&j))
                });
            best.map_or(false, |i| region.contains(i))
        })
        .collect()
}

#[test]
fn demo_validation_matches_oracle() {
    let (s, region) = shared();
    let threshold = GuidanceParams::default().similarity_threshold;
    for q in [downward(), pitched(PITCH_BACK)] {
        let traj = seam(q, 2.0, 0.05).unwrap();
        let ours = validate_demo(&traj, region, &s.graph, threshold);
        assert_eq!(ours, validate_oracle(&traj, s, region, threshold));
    }
    let pitched_ok = validate_demo(&seam(pitched(PITCH_BACK), 2.0, 0.05).unwrap(), region, &s.graph, threshold);
    assert!(pitched_ok.iter().all(|v| *v));
    let down = validate_demo(&seam(downward(), 2.0, 0.05).unwrap(), region, &s.graph, threshold);
    assert!(down.iter().any(|v| !*v));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn validation_matches_oracle_off_grid(
        x in 0.1f64..0.8, y in -0.4f64..0.4, z in 0.0f64..0.5, pitch in -0.8f64..0.8,
    ) {
        let (s, region) = shared();
        let pose = guided_lfd::kinematics::Pose::new(nalgebra::Vector3::new(x, y, z), pitched(pitch));
        let traj = TaskTrajectory::uniform(vec![pose, pose], 0.1).unwrap();
        let threshold = GuidanceParams::default().similarity_threshold;
        prop_assert_eq!(validate_demo(&traj, region, &s.graph, threshold), validate_oracle(&traj, s, region, threshold));
    }
}
