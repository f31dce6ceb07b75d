use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Rigid transform: position in meters plus a unit quaternion.
///
/// Orientation comparisons are sign invariant (`q` and `-q` are the same
/// rotation), so never compare quaternion components directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Builds a pose from a `(w, x, y, z)` quaternion, normalizing it.
    pub fn from_parts(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(Vector3::from(position), UnitQuaternion::from_quaternion(q))
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// `self * other`, i.e. `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_isometry(&(self.to_isometry() * other.to_isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Pose::from_isometry(&self.to_isometry().inverse())
    }

    pub fn position_distance(&self, other: &Pose) -> f64 {
        (self.position - other.position).norm()
    }

    /// Rotation angle between the two orientations, in `[0, pi]`.
    pub fn angular_distance(&self, other: &Pose) -> f64 {
        quaternion_angle(&self.orientation, &other.orientation)
    }

    /// Tool approach axis: the frame's z-axis in world coordinates.
    pub fn forward_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }
}

/// Sign-invariant angle between two unit quaternions, in `[0, pi]`.
pub fn quaternion_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    2.0 * q.imag().norm().atan2(q.w.abs())
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    p: [f64; 3],
    q: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            p: self.position.into(),
            q: self.quaternion_wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let norm = repr.q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(serde::de::Error::custom(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        if repr.p.iter().any(|c| !c.is_finite()) {
            return Err(serde::de::Error::custom("non-finite position"));
        }
        // Already-unit input is kept bit for bit so files round-trip exactly.
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            let [w, x, y, z] = repr.q;
            return Ok(Pose::new(
                Vector3::from(repr.p),
                UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
            ));
        }
        Ok(Pose::from_parts(repr.p, repr.q))
    }
}
