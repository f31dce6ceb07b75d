//! Environment model and collision queries for arm configurations.

mod shape;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, JointConfig, PosedCapsule};

pub use shape::{
    point_box_distance, point_segment_distance, segment_box_distance, segment_segment_distance,
    shape_pair_collides, Shape, CONTACT_TOLERANCE,
};

/// Static fixtures plus named dynamic objects.
///
/// Values are immutable snapshots: edits return a new environment with a
/// bumped revision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    pub static_shapes: Vec<Shape>,
    pub dynamic_objects: BTreeMap<String, Shape>,
    pub revision: u64,
}

#[derive(Serialize, Deserialize)]
struct NamedShape {
    id: String,
    shape: Shape,
}

#[derive(Serialize, Deserialize)]
struct EnvironmentFile {
    static_shapes: Vec<Shape>,
    #[serde(default)]
    dynamic_objects: Vec<NamedShape>,
    #[serde(default)]
    revision: u64,
}

impl Serialize for Environment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EnvironmentFile {
            static_shapes: self.static_shapes.clone(),
            dynamic_objects: self
                .dynamic_objects
                .iter()
                .map(|(id, shape)| NamedShape { id: id.clone(), shape: *shape })
                .collect(),
            revision: self.revision,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Environment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = EnvironmentFile::deserialize(d)?;
        let mut dynamic_objects = BTreeMap::new();
        for named in file.dynamic_objects {
            if dynamic_objects.insert(named.id.clone(), named.shape).is_some() {
                return Err(serde::de::Error::custom(format!(
                    "duplicate object id `{}`",
                    named.id
                )));
            }
        }
        Ok(Environment {
            static_shapes: file.static_shapes,
            dynamic_objects,
            revision: file.revision,
        })
    }
}

impl Environment {
    pub fn new(static_shapes: Vec<Shape>) -> Self {
        Self {
            static_shapes,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Environment = serde_json::from_str(text)?;
        for shape in env.shapes() {
            shape.validate()?;
        }
        Ok(env)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn shapes(&self) -> impl Iterator<Item = &Shape> {
        self.static_shapes.iter().chain(self.dynamic_objects.values())
    }

    pub fn add_object(&self, id: &str, shape: Shape) -> Result<Environment> {
        shape.validate()?;
        if self.dynamic_objects.contains_key(id) {
            return Err(Error::DuplicateObject(id.to_string()));
        }
        let mut next = self.clone();
        next.dynamic_objects.insert(id.to_string(), shape);
        next.revision += 1;
        Ok(next)
    }

    pub fn remove_object(&self, id: &str) -> Result<Environment> {
        if !self.dynamic_objects.contains_key(id) {
            return Err(Error::UnknownObject(id.to_string()));
        }
        let mut next = self.clone();
        next.dynamic_objects.remove(id);
        next.revision += 1;
        Ok(next)
    }
}

pub fn add_object(env: &Environment, id: &str, shape: Shape) -> Result<Environment> {
    env.add_object(id, shape)
}

pub fn remove_object(env: &Environment, id: &str) -> Result<Environment> {
    env.remove_object(id)
}

fn capsule_shape(c: &PosedCapsule) -> Shape {
    Shape::Capsule {
        a: c.a.coords.into(),
        b: c.b.coords.into(),
        radius: c.radius,
    }
}

/// Links on frames closer than this touch at their joint by construction.
const SELF_COLLISION_MIN_FRAME_GAP: usize = 2;

/// True iff a link capsule touches the environment or a non-adjacent link.
pub fn in_collision(model: &ArmModel, config: &JointConfig, env: &Environment) -> bool {
    let posed = model.posed_capsules(config);
    let link_shapes: Vec<Shape> = posed.iter().map(capsule_shape).collect();
    let env_shapes: Vec<(&Shape, (nalgebra::Point3<f64>, f64))> =
        env.shapes().map(|s| (s, s.bounding_sphere())).collect();

    for link in &link_shapes {
        let (lc, lr) = link.bounding_sphere();
        for (shape, (c, r)) in &env_shapes {
            if (lc - c).norm() > lr + r + CONTACT_TOLERANCE {
                continue;
            }
            if shape_pair_collides(link, shape) {
                return true;
            }
        }
    }
    self_collision(&posed, &link_shapes)
}

fn self_collision(posed: &[PosedCapsule], shapes: &[Shape]) -> bool {
    for i in 0..posed.len() {
        for j in (i + 1)..posed.len() {
            if posed[i].frame.abs_diff(posed[j].frame) < SELF_COLLISION_MIN_FRAME_GAP {
                continue;
            }
            if shape_pair_collides(&shapes[i], &shapes[j]) {
                return true;
            }
        }
    }
    false
}

/// Link pairs that participate in self-collision checks.
pub fn self_collision_pairs(model: &ArmModel) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..model.capsules.len() {
        for j in (i + 1)..model.capsules.len() {
            if model.capsules[i].frame.abs_diff(model.capsules[j].frame)
                >= SELF_COLLISION_MIN_FRAME_GAP
            {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
