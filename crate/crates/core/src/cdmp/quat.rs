use nalgebra::{Quaternion, UnitQuaternion, Vector3};

const SMALL: f64 = 1e-12;

/// Principal quaternion logarithm, half rotation vector convention:
/// `log(q) = (theta / 2) * axis`.
///
/// The sign is fixed to `w >= 0` first. At exactly `w == 0` (rotation by pi)
/// the sign is chosen so the largest-magnitude vector component is positive.
pub fn quat_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut w = q.w;
    let mut v = q.imag();
    if w < 0.0 || (w == 0.0 && v[v.iamax()] < 0.0) {
        w = -w;
        v = -v;
    }
    let n = v.norm();
    if n < SMALL {
        return v / w;
    }
    v * (n.atan2(w) / n)
}

/// Inverse of [`quat_log`]: `exp(v) = (cos|v|, sin|v| v/|v|)`.
pub fn quat_exp(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = v.norm();
    if theta < SMALL {
        return UnitQuaternion::from_quaternion(Quaternion::from_parts(1.0, *v));
    }
    UnitQuaternion::new_unchecked(Quaternion::from_parts(theta.cos(), v * (theta.sin() / theta)))
}
