mod common;

use guided_lfd::cdmp::{orientation_error, quat_exp, rollout, train, CDMPModel, TaskTrajectory};
use guided_lfd::kinematics::Pose;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{min_jerk, min_jerk_line};

fn line() -> TaskTrajectory {
    min_jerk_line(Vector3::new(0.35, -0.15, 0.3), Vector3::new(0.55, 0.1, 0.2), UnitQuaternion::identity(), 2.0, 0.01)
}

fn rotation_demo() -> TaskTrajectory {
    let p = Vector3::new(0.4, 0.0, 0.3);
    let n = 200;
    let poses = (0..=n)
        .map(|k| {
            let a = std::f64::consts::FRAC_PI_2 * min_jerk(k as f64 / n as f64);
            Pose::new(p, UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.0, a)))
        })
        .collect();
    TaskTrajectory::uniform(poses, 0.01).unwrap()
}

/// Independent fixed-step RK4 of the transformation system, ten times finer
/// than the library's integrator, sampled on the same grid.
fn oracle_rollout(m: &CDMPModel, start: &Pose, goal: &Pose, tau: f64, dt: f64) -> Vec<Pose> {
    type S = [Vector3<f64>; 4];
    let f = |t: f64, x: &S| -> S {
        let s = (-m.alpha_s * t / tau).exp();
        let ap = (m.alpha * (m.beta * (goal.position - x[0]) - tau * x[1]) + m.position_forcing(s)) / (tau * tau);
        let aq = (m.alpha * (-m.beta * x[2] - tau * x[3]) + m.orientation_forcing(s)) / (tau * tau);
        [x[1], ap, x[3], aq]
    };
    let add = |x: &S, k: &S, h: f64| -> S { std::array::from_fn(|i| x[i] + k[i] * h) };
    let mut x: S = [start.position, Vector3::zeros(), orientation_error(&start.orientation, &goal.orientation), Vector3::zeros()];
    let count = (1.2 * tau / dt + 1e-9).floor() as usize;
    let sub = ((dt * 20_000.0 / tau).ceil() as usize).max(1);
    let h = dt / sub as f64;
    let pose = |x: &S| Pose::new(x[0], quat_exp(&x[2]) * goal.orientation);
    let mut out = vec![pose(&x)];
    for k in 0..count {
        for j in 0..sub {
            let t = k as f64 * dt + j as f64 * h;
            let k1 = f(t, &x);
            let k2 = f(t + h / 2.0, &add(&x, &k1, h / 2.0));
            let k3 = f(t + h / 2.0, &add(&x, &k2, h / 2.0));
            let k4 = f(t + h, &add(&x, &k3, h));
            x = std::array::from_fn(|i| x[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0));
        }
        out.push(pose(&x));
    }
    out
}

#[test]
fn rollout_matches_fine_integration() {
    for demo in [line(), rotation_demo()] {
        let m = train(&demo, 30).unwrap();
        let out = rollout(&m, demo.first(), demo.last(), m.tau, 0.01).unwrap();
        let oracle = oracle_rollout(&m, demo.first(), demo.last(), m.tau, 0.01);
        assert_eq!(out.len(), oracle.len());
        for (a, b) in out.samples().iter().zip(&oracle) {
            assert!(a.pose.position_distance(b) < 1e-7);
            assert!(a.pose.angular_distance(b) < 1e-7);
        }
    }
}

#[test]
fn min_jerk_line_is_reproduced() {
    let demo = line();
    let m = train(&demo, 30).unwrap();
    let out = rollout(&m, demo.first(), demo.last(), m.tau, 0.01).unwrap();
    let worst = demo
        .samples()
        .iter()
        .zip(out.samples())
        .map(|(a, b)| a.pose.position_distance(&b.pose))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3, "worst {worst}");
}

#[test]
fn quarter_turn_is_reproduced() {
    let demo = rotation_demo();
    let m = train(&demo, 30).unwrap();
    let out = rollout(&m, demo.first(), demo.last(), m.tau, 0.01).unwrap();
    let worst = demo
        .samples()
        .iter()
        .zip(out.samples())
        .map(|(a, b)| a.pose.angular_distance(&b.pose))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-2, "worst {worst}");
}

#[test]
fn doubling_tau_stretches_time() {
    let demo = line();
    let m = train(&demo, 30).unwrap();
    let a = rollout(&m, demo.first(), demo.last(), m.tau, 0.01).unwrap();
    let b = rollout(&m, demo.first(), demo.last(), 2.0 * m.tau, 0.01).unwrap();
    assert_eq!(b.len(), 2 * a.len() - 1);
    for (k, s) in a.samples().iter().enumerate() {
        assert!(b.samples()[2 * k].pose.position_distance(&s.pose) <= 2e-3);
    }
}

#[test]
fn shifted_goals_converge() {
    let demo = line();
    let m = train(&demo, 30).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
        let rot = UnitQuaternion::from_scaled_axis(Vector3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0));
        let goal = Pose::new(demo.last().position + dir * 0.05, rot * demo.last().orientation);
        let out = rollout(&m, demo.first(), &goal, m.tau, 0.01).unwrap();
        assert!(out.last().position_distance(&goal) <= 1e-3);
        for s in out.samples() {
            assert!((s.pose.orientation.quaternion().norm() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn constant_demo_weights_vanish() {
    let p = Pose::from_parts([0.4, 0.1, 0.25], [0.0, 1.0, 0.0, 0.0]);
    let demo = TaskTrajectory::uniform(vec![p; 80], 0.02).unwrap();
    let m = train(&demo, 30).unwrap();
    assert!(m.position_weights.iter().chain(&m.orientation_weights).flatten().all(|w| w.abs() < 1e-8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rollouts_keep_unit_quaternions(
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
        dx in -0.1f64..0.1, dy in -0.1f64..0.1, tau in 0.5f64..3.0,
    ) {
        let demo = rotation_demo();
        let m = train(&demo, 20).unwrap();
        let goal = Pose::new(
            demo.last().position + Vector3::new(dx, dy, 0.0),
            UnitQuaternion::from_scaled_axis(Vector3::new(ax, ay, az)),
        );
        let out = rollout(&m, demo.first(), &goal, tau, tau / 50.0).unwrap();
        for s in out.samples() {
            prop_assert!((s.pose.orientation.quaternion().norm() - 1.0).abs() <= 1e-9);
        }
        prop_assert!(out.last().angular_distance(&goal) < 1e-2);
    }
}
