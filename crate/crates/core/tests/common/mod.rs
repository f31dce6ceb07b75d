#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use guided_lfd::cdmp::TaskTrajectory;
use guided_lfd::kinematics::{analytic_ik, ArmModel, JointConfig, Pose};
use guided_lfd::planner::{plan_regions, select_primary_region, MappingProblem, PlannerParams, Region};
use guided_lfd::scenario::{self, downward, pitched, seam, Scenario, PITCH_BACK};
use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use rand::Rng;
use serde_json::json;

pub fn random_config<R: Rng>(model: &ArmModel, rng: &mut R) -> JointConfig {
    JointConfig(std::array::from_fn(|j| rng.gen_range(model.joint_limits[j].lo..model.joint_limits[j].hi)))
}

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(v[0], v[1], v[2], v[3]));
        }
    }
}

fn pose_error(target: &Pose, at: &Pose) -> Vector6<f64> {
    let dp = target.position - at.position;
    let dr = (target.orientation * at.orientation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Central-difference geometric Jacobian (linear; angular in the base frame).
pub fn numeric_jacobian(model: &ArmModel, q: &JointConfig) -> Matrix6<f64> {
    let h = 1e-6;
    let mut jac = Matrix6::zeros();
    for j in 0..6 {
        let mut a = *q;
        let mut b = *q;
        a.0[j] += h;
        b.0[j] -= h;
        let fa = model.forward_kinematics(&a);
        let fb = model.forward_kinematics(&b);
        let col = pose_error(&fa, &fb) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

pub fn min_singular_value(model: &ArmModel, q: &JointConfig) -> f64 {
    numeric_jacobian(model, q).singular_values().min()
}

/// Damped least squares from one seed; `None` unless it converges.
pub fn dls_ik(model: &ArmModel, target: &Pose, seed: JointConfig) -> Option<JointConfig> {
    let mut q = seed;
    let mut lambda = 0.05;
    let mut err = pose_error(target, &model.forward_kinematics(&q));
    for _ in 0..300 {
        if err.norm() < 1e-12 {
            break;
        }
        let jac = numeric_jacobian(model, &q);
        let jjt = jac * jac.transpose() + Matrix6::identity() * (lambda * lambda);
        let dq = jac.transpose() * jjt.lu().solve(&err)?;
        let mut next = q;
        for j in 0..6 {
            next.0[j] += dq[j];
        }
        let next_err = pose_error(target, &model.forward_kinematics(&next));
        if next_err.norm() < err.norm() {
            q = next;
            err = next_err;
            lambda = (lambda * 0.5).max(1e-9);
        } else {
            lambda *= 4.0;
            if lambda > 1e3 {
                return None;
            }
        }
    }
    (err.norm() < 1e-9).then(|| JointConfig(q.0.map(wrap)))
}

/// Targets whose solutions all sit away from singularities and limit edges.
pub fn usable_target(model: &ArmModel, c: &JointConfig) -> Option<Pose> {
    let target = model.forward_kinematics(c);
    let sols = analytic_ik(model, &target);
    let near_edge = |q: &JointConfig| {
        q.0.iter()
            .zip(&model.joint_limits)
            .any(|(a, l)| (a - l.lo).abs() < 1e-3 || (a - l.hi).abs() < 1e-3)
    };
    if sols.iter().any(|q| min_singular_value(model, q) < 1e-3 || near_edge(q)) {
        return None;
    }
    Some(target)
}

pub fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Per-joint shortest angular difference.
pub fn angle_gap(a: &JointConfig, b: &JointConfig) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| wrap(x - y).abs()).fold(0.0, f64::max)
}

/// Distinct in-limit numeric IK solutions found from random restarts.
pub fn numeric_ik_clusters<R: Rng>(model: &ArmModel, target: &Pose, restarts: usize, rng: &mut R) -> Vec<JointConfig> {
    let mut clusters: Vec<JointConfig> = Vec::new();
    for _ in 0..restarts {
        let seed = JointConfig(std::array::from_fn(|_| rng.gen_range(-PI..PI)));
        if let Some(q) = dls_ik(model, target, seed) {
            if !model.within_limits(&q) {
                continue;
            }
            if !clusters.iter().any(|c| angle_gap(c, &q) < 1e-4) {
                clusters.push(q);
            }
        }
    }
    clusters
}

pub fn wall() -> Scenario {
    scenario::wall().expect("bundled scenario loads")
}

/// Primary region of the bundled scenario under default parameters.
pub fn wall_region(s: &Scenario) -> Region {
    let regions = plan_regions(&s.model, &s.env, &s.graph, &PlannerParams::default()).unwrap();
    select_primary_region(&regions).unwrap().clone()
}

pub fn min_jerk(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Minimum-jerk straight line at a fixed orientation.
pub fn min_jerk_line(a: Vector3<f64>, b: Vector3<f64>, q: UnitQuaternion<f64>, duration: f64, dt: f64) -> TaskTrajectory {
    let n = (duration / dt).round() as usize;
    let poses = (0..=n)
        .map(|k| Pose::new(a.lerp(&b, min_jerk(k as f64 / n as f64)), q))
        .collect();
    TaskTrajectory::uniform(poses, dt).unwrap()
}

/// Planar two-link arm tracing a line of tool positions past circular
/// obstacles. Configurations are `(shoulder, elbow)`.
pub struct TwoLink {
    pub l1: f64,
    pub l2: f64,
    pub points: Vec<[f64; 2]>,
    pub obstacles: Vec<([f64; 2], f64)>,
    neighbors: Vec<Vec<usize>>,
    candidates: Vec<Vec<[f64; 2]>>,
}

fn segment_point_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    (c[0] * c[0] + c[1] * c[1]).sqrt()
}

impl TwoLink {
    pub fn new(l1: f64, l2: f64, points: Vec<[f64; 2]>, obstacles: Vec<([f64; 2], f64)>) -> Self {
        let n = points.len();
        let neighbors = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        let mut arm = Self { l1, l2, points, obstacles, neighbors, candidates: Vec::new() };
        arm.candidates = arm.points.iter().map(|p| arm.valid_ik(*p)).collect();
        arm
    }

    /// Elbow-down then elbow-up.
    pub fn ik(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let (l1, l2) = (self.l1, self.l2);
        let r2 = p[0] * p[0] + p[1] * p[1];
        let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        if c2.abs() > 1.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for sign in [1.0, -1.0] {
            let t2 = sign * c2.acos();
            let t1 = p[1].atan2(p[0]) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
            let c = [wrap(t1), t2];
            if !out.iter().any(|o: &[f64; 2]| (o[0] - c[0]).abs() < 1e-9 && (o[1] - c[1]).abs() < 1e-9) {
                out.push(c);
            }
        }
        out
    }

    pub fn collides(&self, c: [f64; 2]) -> bool {
        let elbow = [self.l1 * c[0].cos(), self.l1 * c[0].sin()];
        let tip = [elbow[0] + self.l2 * (c[0] + c[1]).cos(), elbow[1] + self.l2 * (c[0] + c[1]).sin()];
        self.obstacles.iter().any(|(o, r)| {
            segment_point_distance([0.0, 0.0], elbow, *o) <= *r || segment_point_distance(elbow, tip, *o) <= *r
        })
    }

    fn valid_ik(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        self.ik(p).into_iter().filter(|c| !self.collides(*c)).collect()
    }
}

impl MappingProblem for TwoLink {
    type Config = [f64; 2];

    fn pose_count(&self) -> usize {
        self.points.len()
    }

    fn neighbors(&self, pose: usize) -> &[usize] {
        &self.neighbors[pose]
    }

    fn candidates(&self, pose: usize) -> &[[f64; 2]] {
        &self.candidates[pose]
    }

    fn distance(&self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    }
}

/// Exhaustive search over every contiguous run and every branch choice on
/// it. Returns the largest feasible size and, for each run of that size,
/// its cheapest feasible cost.
pub fn brute_force_runs(arm: &TwoLink, eps: f64) -> (usize, Vec<(std::ops::Range<usize>, f64)>) {
    let n = arm.points.len();
    let mut best = 0;
    let mut runs: Vec<(std::ops::Range<usize>, f64)> = Vec::new();
    for l in 0..n {
        for r in l + 1..=n {
            let len = r - l;
            if len < best {
                continue;
            }
            let choices: Vec<&[[f64; 2]]> = (l..r).map(|i| arm.candidates(i)).collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let mut cheapest: Option<f64> = None;
            let total: usize = choices.iter().map(|c| c.len()).product();
            for code in 0..total {
                let mut rest = code;
                let pick: Vec<[f64; 2]> = choices
                    .iter()
                    .map(|c| {
                        let k = rest % c.len();
                        rest /= c.len();
                        c[k]
                    })
                    .collect();
                let mut cost = 0.0;
                let mut ok = true;
                for w in pick.windows(2) {
                    let d = arm.distance(&w[0], &w[1]);
                    if d > eps {
                        ok = false;
                        break;
                    }
                    cost += d;
                }
                if ok && cheapest.map_or(true, |c| cost < c) {
                    cheapest = Some(cost);
                }
            }
            if let Some(c) = cheapest {
                if len > best {
                    best = len;
                    runs.clear();
                }
                runs.push((l..r, c));
            }
        }
    }
    (best, runs)
}

pub fn pose_line(p: [f64; 3], q: [f64; 4], t: f64) -> String {
    json!({"type": "pose", "p": p, "q": q, "t": t}).to_string()
}

pub fn seam_lines(q: nalgebra::UnitQuaternion<f64>, t0: f64) -> Vec<String> {
    seam(q, 2.0, 0.02)
        .unwrap()
        .samples()
        .iter()
        .map(|s| {
            let p = s.pose.position;
            pose_line([p.x, p.y, p.z], s.pose.quaternion_wxyz(), t0 + s.t)
        })
        .collect()
}

/// A deterministic 500-message session: idle streaming, three recorded
/// demos, object edits, pipeline runs and a few bad messages.
pub fn message_log() -> Vec<String> {
    let mut log = Vec::new();
    for k in 0..40 {
        let x = 0.3 + 0.005 * k as f64;
        log.push(pose_line([x, 0.0, 0.3], [0.0, 1.0, 0.0, 0.0], k as f64 * 0.01));
    }
    let mut t = 1.0;
    for (name, q) in [("pitched", pitched(PITCH_BACK)), ("tilted", pitched(-0.3)), ("down", downward())] {
        log.push(r#"{"type":"record_start"}"#.to_string());
        log.extend(seam_lines(q, t));
        log.push(json!({"type": "record_stop", "name": name}).to_string());
        t += 5.0;
    }
    log.push(r#"{"type":"run_pipeline","demo":"pitched"}"#.into());
    log.push(r#"{"type":"run_pipeline","demo":"down"}"#.into());
    log.push(json!({"type": "add_object", "id": "box", "shape": {"kind": "box", "center": {"p": [0.3, -0.2, 0.1], "q": [1, 0, 0, 0]}, "half_extents": [0.03, 0.03, 0.1]}}).to_string());
    log.push(r#"{"type":"run_pipeline","demo":"tilted","tau":3.0}"#.into());
    log.push("garbage".into());
    log.push(r#"{"type":"remove_object","id":"box"}"#.into());
    log.push(r#"{"type":"get_region"}"#.into());
    log.push(r#"{"type":"run_pipeline","demo":"pitched","goal":{"p":[0.6,0.15,0.2],"q":[0.0,0.9396926207859084,0.0,-0.3420201433256687]}}"#.into());
    while log.len() < 500 {
        let k = log.len() as f64;
        log.push(pose_line([0.35, -0.1 + 0.001 * (k - 400.0), 0.25], [0.0, 1.0, 0.0, 0.0], 100.0 + k * 0.02));
    }
    log
}

pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["demos", "models", "reproductions"] {
        for entry in std::fs::read_dir(dir.join(sub)).unwrap() {
            let e = entry.unwrap();
            out.insert(format!("{sub}/{}", e.file_name().to_string_lossy()), std::fs::read(e.path()).unwrap());
        }
    }
    out
}
