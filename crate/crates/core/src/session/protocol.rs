//! Newline-delimited JSON wire protocol. Quaternions are `(w, x, y, z)`.

use serde::{Deserialize, Serialize};

use crate::collision::Shape;
use crate::guidance::{FrameDiff, GuidanceFrame};
use crate::planner::RegionFile;
use crate::reproduction::{JointTrajectory, ReproductionReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Pose {
        p: [f64; 3],
        q: [f64; 4],
        t: f64,
    },
    RecordStart,
    RecordStop {
        name: String,
    },
    AddObject {
        id: String,
        shape: Shape,
    },
    RemoveObject {
        id: String,
    },
    RunPipeline {
        demo: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal: Option<WirePose>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
    },
    GetRegion,
    GetFrameFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WirePose {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    GuidanceDiff(FrameDiff),
    GuidanceFull(GuidanceFrame),
    RegionUpdated {
        env_revision: u64,
        removed_pose_count: usize,
        region_size: usize,
    },
    PipelineResult {
        demo: String,
        report: ReproductionReport,
        trajectory: JointTrajectory,
    },
    Region(RegionFile),
    Ack {
        of: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        indices: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BadState,
    RegionChanged,
    DemoOutOfRegion,
    GoalOutOfBounds,
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
            indices: Vec::new(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}
