use std::path::Path;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    t: f64,
    p: [f64; 3],
    q: [f64; 4],
}

impl Serialize for TimedPose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SampleRecord {
            t: self.t,
            p: self.pose.position.into(),
            q: self.pose.quaternion_wxyz(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimedPose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SampleRecord::deserialize(d)?;
        let n = r.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return Err(serde::de::Error::custom(format!("quaternion norm {n} is not 1")));
        }
        Ok(TimedPose {
            t: r.t,
            pose: Pose::from_parts(r.p, r.q),
        })
    }
}

/// Time-stamped pose sequence starting at `t = 0`.
///
/// Quaternion signs are made continuous on construction (`q` and `-q` are
/// the same rotation).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TaskTrajectory {
    samples: Vec<TimedPose>,
}

impl<'de> Deserialize<'de> for TaskTrajectory {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let samples = Vec::<TimedPose>::deserialize(d)?;
        TaskTrajectory::new(samples).map_err(serde::de::Error::custom)
    }
}

impl TaskTrajectory {
    pub fn new(mut samples: Vec<TimedPose>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples[0].t != 0.0 {
            return Err(Error::InvalidTrajectory(format!("first timestamp is {}, not 0", samples[0].t)));
        }
        for (k, w) in samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidTrajectory(format!(
                    "timestamps not strictly increasing at sample {}",
                    k + 1
                )));
            }
        }
        if samples.iter().any(|s| !s.t.is_finite() || !s.pose.position.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidTrajectory("non-finite sample".into()));
        }
        for k in 1..samples.len() {
            let prev = samples[k - 1].pose.orientation;
            let q = &mut samples[k].pose.orientation;
            if prev.coords.dot(&q.coords) < 0.0 {
                *q = UnitQuaternion::new_unchecked(-q.into_inner());
            }
        }
        Ok(Self { samples })
    }

    /// Builds a trajectory from poses with uniform spacing `dt`.
    pub fn uniform(poses: Vec<Pose>, dt: f64) -> Result<Self> {
        Self::new(
            poses
                .into_iter()
                .enumerate()
                .map(|(k, pose)| TimedPose { t: k as f64 * dt, pose })
                .collect(),
        )
    }

    pub fn samples(&self) -> &[TimedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn first(&self) -> &Pose {
        &self.samples[0].pose
    }

    pub fn last(&self) -> &Pose {
        &self.samples[self.samples.len() - 1].pose
    }

    /// Pose at time `t` by linear/spherical interpolation, clamped to the ends.
    pub fn sample_at(&self, t: f64) -> Pose {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0].pose;
        }
        let k = s.partition_point(|x| x.t <= t);
        if k >= s.len() {
            return s[s.len() - 1].pose;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let u = (t - a.t) / (b.t - a.t);
        Pose::new(
            a.pose.position.lerp(&b.pose.position, u),
            a.pose.orientation.slerp(&b.pose.orientation, u),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
