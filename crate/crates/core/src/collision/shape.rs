use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Pose;

/// Solids touching closer than this are in contact.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

/// Convex primitive used for fixtures, objects and link geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Oriented box; `center` carries the box frame.
    Box { center: Pose, half_extents: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
}

impl Shape {
    pub fn cuboid(center: [f64; 3], half_extents: [f64; 3]) -> Self {
        Shape::Box {
            center: Pose::from_translation(center[0], center[1], center[2]),
            half_extents,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Shape::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            Shape::Sphere { radius, .. } | Shape::Capsule { radius, .. } => *radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShape(
                "radii and half extents must be strictly positive".into(),
            ))
        }
    }

    /// Center and radius of a sphere enclosing the shape.
    pub fn bounding_sphere(&self) -> (Point3<f64>, f64) {
        match self {
            Shape::Box {
                center,
                half_extents,
            } => (
                Point3::from(center.position),
                Vector3::from(*half_extents).norm(),
            ),
            Shape::Sphere { center, radius } => (Point3::from(*center), *radius),
            Shape::Capsule { a, b, radius } => {
                let a = Vector3::from(*a);
                let b = Vector3::from(*b);
                (Point3::from((a + b) * 0.5), (b - a).norm() * 0.5 + radius)
            }
        }
    }
}

/// True iff the two solids overlap or touch.
pub fn shape_pair_collides(a: &Shape, b: &Shape) -> bool {
    use Shape::*;
    match (a, b) {
        (
            Box {
                center: ca,
                half_extents: ha,
            },
            Box {
                center: cb,
                half_extents: hb,
            },
        ) => boxes_overlap(ca, ha, cb, hb),
        (Box { center, half_extents }, other) | (other, Box { center, half_extents }) => {
            let (p, q, r) = core_segment(other);
            segment_box_distance(&p, &q, center, half_extents) <= r + CONTACT_TOLERANCE
        }
        _ => {
            let (p1, q1, r1) = core_segment(a);
            let (p2, q2, r2) = core_segment(b);
            segment_segment_distance(&p1, &q1, &p2, &q2) <= r1 + r2 + CONTACT_TOLERANCE
        }
    }
}

/// Spheres and capsules are swept segments; a sphere is a degenerate one.
fn core_segment(shape: &Shape) -> (Point3<f64>, Point3<f64>, f64) {
    match *shape {
        Shape::Sphere { center, radius } => (Point3::from(center), Point3::from(center), radius),
        Shape::Capsule { a, b, radius } => (Point3::from(a), Point3::from(b), radius),
        Shape::Box { .. } => unreachable!("boxes have no core segment"),
    }
}

pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Closest distance between segments `p1q1` and `p2q2`.
pub fn segment_segment_distance(
    p1: &Point3<f64>,
    q1: &Point3<f64>,
    p2: &Point3<f64>,
    q2: &Point3<f64>,
) -> f64 {
    const EPS: f64 = 1e-14;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

fn to_box_frame(box_pose: &Pose, p: &Point3<f64>) -> Vector3<f64> {
    box_pose.orientation.inverse() * (p.coords - box_pose.position)
}

fn local_point_box_distance(p: &Vector3<f64>, h: &[f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..3 {
        let excess = p[i].abs() - h[i];
        if excess > 0.0 {
            d2 += excess * excess;
        }
    }
    d2.sqrt()
}

/// Distance from a point to a solid oriented box (zero inside).
pub fn point_box_distance(p: &Point3<f64>, box_pose: &Pose, half_extents: &[f64; 3]) -> f64 {
    local_point_box_distance(&to_box_frame(box_pose, p), half_extents)
}

/// Distance from segment `pq` to a solid oriented box.
///
/// The point-to-box distance is convex along the segment, so a slab test
/// settles intersection and golden-section search finds the closest point
/// otherwise.
pub fn segment_box_distance(
    p: &Point3<f64>,
    q: &Point3<f64>,
    box_pose: &Pose,
    half_extents: &[f64; 3],
) -> f64 {
    let a = to_box_frame(box_pose, p);
    let b = to_box_frame(box_pose, q);
    if segment_hits_aabb(&a, &b, half_extents) {
        return 0.0;
    }
    let d = b - a;
    let f = |t: f64| local_point_box_distance(&(a + d * t), half_extents);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

fn segment_hits_aabb(a: &Vector3<f64>, b: &Vector3<f64>, h: &[f64; 3]) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        if d[i].abs() < 1e-300 {
            if a[i] < -h[i] || a[i] > h[i] {
                return false;
            }
        } else {
            let inv = 1.0 / d[i];
            let mut ta = (-h[i] - a[i]) * inv;
            let mut tb = (h[i] - a[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// Separating-axis test for two oriented boxes.
fn boxes_overlap(pa: &Pose, ha: &[f64; 3], pb: &Pose, hb: &[f64; 3]) -> bool {
    let ra = pa.orientation.to_rotation_matrix();
    let rb = pb.orientation.to_rotation_matrix();
    let axes_a: [Vector3<f64>; 3] = [0, 1, 2].map(|i| ra.matrix().column(i).into_owned());
    let axes_b: [Vector3<f64>; 3] = [0, 1, 2].map(|i| rb.matrix().column(i).into_owned());
    let t = pb.position - pa.position;

    let mut candidates: Vec<Vector3<f64>> = Vec::with_capacity(15);
    candidates.extend_from_slice(&axes_a);
    candidates.extend_from_slice(&axes_b);
    for u in &axes_a {
        for v in &axes_b {
            let c = u.cross(v);
            if c.norm_squared() > 1e-18 {
                candidates.push(c.normalize());
            }
        }
    }
    for axis in &candidates {
        let proj_a: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(axis).abs()).sum();
        let proj_b: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(axis).abs()).sum();
        if t.dot(axis).abs() > proj_a + proj_b + CONTACT_TOLERANCE {
            return false;
        }
    }
    true
}
