//! Closed-form inverse kinematics for the UR joint layout.
//!
//! The solver enumerates the two shoulder, two wrist and two elbow
//! branches, so a reachable nonsingular target yields up to eight
//! solutions before joint limits are applied.

use std::f64::consts::{PI, TAU};

use nalgebra::{Isometry3, Vector3};

use super::{ArmModel, JointConfig, Pose};

/// Branches whose defining terms fall below this are degenerate.
pub const DEGENERATE_EPS: f64 = 1e-10;
/// Two solutions closer than this on every joint are the same branch.
pub const DEDUP_EPS: f64 = 1e-6;
/// Accepted FK residual for a returned solution.
const FK_CHECK_TOL: f64 = 1e-7;

/// All distinct in-limit solutions for `target`, in branch order.
pub fn analytic_ik(model: &ArmModel, target: &Pose) -> Vec<JointConfig> {
    let local = model.base_pose.inverse().compose(target);
    if local.position.norm() > model.reach_radius {
        return Vec::new();
    }
    let mut out: Vec<JointConfig> = Vec::new();
    for raw in raw_branches(model, &local.to_isometry()) {
        for candidate in limit_shifts(model, &raw) {
            if out.iter().any(|s| same_branch(s, &candidate)) {
                continue;
            }
            let fk = model.forward_kinematics(&candidate);
            if fk.position_distance(target) <= FK_CHECK_TOL
                && fk.angular_distance(target) <= FK_CHECK_TOL
            {
                out.push(candidate);
            }
        }
    }
    out
}

/// Same-branch test used for deduplication.
pub fn same_branch(a: &JointConfig, b: &JointConfig) -> bool {
    a.0.iter().zip(&b.0).all(|(x, y)| (x - y).abs() < DEDUP_EPS)
}

/// Solutions before joint limits, as joint angles wrapped to (-pi, pi].
fn raw_branches(model: &ArmModel, t06: &Isometry3<f64>) -> Vec<[f64; 6]> {
    let dh = &model.dh_parameters;
    let (a2, a3, d4, d6) = (dh[1].a, dh[2].a, dh[3].d, dh[5].d);
    let rot = t06.rotation.to_rotation_matrix();
    let x6 = rot.matrix().column(0).into_owned();
    let y6 = rot.matrix().column(1).into_owned();
    let z6 = rot.matrix().column(2).into_owned();
    let p06 = t06.translation.vector;
    let p05 = p06 - d6 * z6;

    let mut sols = Vec::with_capacity(8);

    // Shoulder: the wrist center lies at offset d4 along the joint-2 axis.
    let r = p05.x.hypot(p05.y);
    if r < DEGENERATE_EPS || d4.abs() > r {
        return sols;
    }
    let phi = p05.y.atan2(p05.x);
    let psi = (d4 / r).asin();
    for theta1 in [phi + psi, phi + PI - psi] {
        let (s1, c1) = theta1.sin_cos();
        let z1 = Vector3::new(s1, -c1, 0.0);

        // Wrist 2 from the flange offset along the shoulder axis.
        let c5 = (p06.dot(&z1) - d4) / d6;
        if c5.abs() > 1.0 + 1e-12 {
            continue;
        }
        let base5 = c5.clamp(-1.0, 1.0).acos();
        for theta5 in [base5, -base5] {
            let s5 = theta5.sin();
            if s5.abs() < DEGENERATE_EPS {
                continue;
            }
            let theta6 = (-(y6.dot(&z1)) / s5).atan2(x6.dot(&z1) / s5);

            let a1 = dh[0].transform(theta1 - dh[0].theta_offset);
            let a5 = dh[4].transform(theta5 - dh[4].theta_offset);
            let a6 = dh[5].transform(theta6 - dh[5].theta_offset);
            let t14 = a1.inverse() * t06 * a6.inverse() * a5.inverse();
            let x = t14.translation.vector.x;
            let y = t14.translation.vector.y;
            let rr = x * x + y * y;
            if rr < DEGENERATE_EPS {
                continue;
            }
            let c3 = (rr - a2 * a2 - a3 * a3) / (2.0 * a2 * a3);
            if c3.abs() > 1.0 + 1e-12 {
                continue;
            }
            let base3 = c3.clamp(-1.0, 1.0).acos();
            let r14 = t14.rotation.to_rotation_matrix();
            let theta234 = r14[(1, 0)].atan2(r14[(0, 0)]);
            for theta3 in [base3, -base3] {
                let (s3, c3) = theta3.sin_cos();
                let theta2 = y.atan2(x) - (a3 * s3).atan2(a2 + a3 * c3);
                let theta4 = theta234 - theta2 - theta3;
                let dh_angles = [theta1, theta2, theta3, theta4, theta5, theta6];
                let mut joints = [0.0; 6];
                for j in 0..6 {
                    joints[j] = wrap_angle(dh_angles[j] - dh[j].theta_offset);
                }
                sols.push(joints);
            }
        }
    }
    sols
}

/// Every `q + 2 pi k` combination that lies inside the joint limits.
fn limit_shifts(model: &ArmModel, raw: &[f64; 6]) -> Vec<JointConfig> {
    let mut per_joint: Vec<Vec<f64>> = Vec::with_capacity(6);
    for (j, &q) in raw.iter().enumerate() {
        let lim = model.joint_limits[j];
        let mut options = Vec::new();
        let k_lo = ((lim.lo - q) / TAU).ceil() as i64;
        let k_hi = ((lim.hi - q) / TAU).floor() as i64;
        for k in k_lo..=k_hi {
            let v = q + TAU * k as f64;
            if v >= lim.lo && v <= lim.hi {
                options.push(v);
            }
        }
        if options.is_empty() {
            return Vec::new();
        }
        per_joint.push(options);
    }
    let mut out = vec![[0.0; 6]];
    for (j, options) in per_joint.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for partial in &out {
            for &v in options {
                let mut c = *partial;
                c[j] = v;
                next.push(c);
            }
        }
        out = next;
    }
    out.into_iter().map(JointConfig).collect()
}

/// Wraps to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
