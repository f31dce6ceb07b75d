//! The interactive session: environment edits with region maintenance, live
//! guidance, demonstration recording and the train/rollout/reproduce
//! pipeline.

mod protocol;
pub mod server;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cdmp::{self, CDMPModel, CdmpParams, TaskTrajectory, TimedPose};
use crate::collision::Environment;
use crate::error::{Error, Result};
use crate::guidance::{self, Classifier, GuidanceFrame, GuidanceParams, ToolPose};
use crate::kinematics::{ArmModel, Pose};
use crate::planner::{update_region, Region};
use crate::reproduction::{reproduce, validate_demo, Reproduction, ReproductionParams};
use crate::taskspace::TaskGraph;

pub use protocol::{ClientMessage, ErrorCode, ServerMessage, WirePose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub guidance: GuidanceParams,
    pub cdmp: CdmpParams,
    /// Defaults to `ReproductionParams::for_epsilon(region.epsilon)`.
    pub reproduction: Option<ReproductionParams>,
    /// Sample spacing of rolled-out trajectories, seconds.
    pub rollout_dt: f64,
    /// Guidance frames per second of pose-message time.
    pub pose_rate_hz: f64,
    /// Where demos, models and reproductions are written, if anywhere.
    pub artifact_dir: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            guidance: GuidanceParams::default(),
            cdmp: CdmpParams::default(),
            reproduction: None,
            rollout_dt: 0.02,
            pose_rate_hz: 60.0,
            artifact_dir: None,
        }
    }
}

/// Per-connection state: the last frame sent and pose throttling.
#[derive(Debug, Default)]
pub struct ClientState {
    last_frame: Option<GuidanceFrame>,
    last_emit_t: Option<f64>,
    pending: Option<ToolPose>,
}

impl ClientState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Messages produced by one client message.
#[derive(Debug, Default, PartialEq)]
pub struct Response {
    /// For the sender only.
    pub reply: Vec<ServerMessage>,
    /// For every connected client, the sender included.
    pub broadcast: Vec<ServerMessage>,
}

impl Response {
    fn reply(msg: ServerMessage) -> Self {
        Self { reply: vec![msg], broadcast: Vec::new() }
    }

    fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Self::reply(ServerMessage::error(code, message))
    }
}

struct Recording {
    samples: Vec<TimedPose>,
    t0: Option<f64>,
}

pub struct Session {
    model: ArmModel,
    env: Environment,
    graph: TaskGraph,
    region: Region,
    classifier: Classifier,
    config: SessionConfig,
    recording: Option<Recording>,
    demos: BTreeMap<String, TaskTrajectory>,
    models: BTreeMap<String, CDMPModel>,
    reproductions: BTreeMap<String, Reproduction>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn wire_pose(p: [f64; 3], q: [f64; 4]) -> std::result::Result<Pose, String> {
    if p.iter().chain(&q).any(|v| !v.is_finite()) {
        return Err("non-finite pose".into());
    }
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-6 {
        return Err(format!("quaternion norm {n} is not 1"));
    }
    Ok(Pose::from_parts(p, q))
}

impl Session {
    /// Brings `region` up to the environment revision if it lags behind.
    pub fn new(model: ArmModel, env: Environment, graph: TaskGraph, region: Region, config: SessionConfig) -> Result<Self> {
        let expected = graph.graph_ref();
        if region.graph_ref != expected {
            return Err(Error::GraphMismatch { expected, found: region.graph_ref });
        }
        let region = if region.env_revision < env.revision {
            update_region(&region, &model, &env, &graph)?
        } else if region.env_revision > env.revision {
            return Err(Error::StaleEnvironment { env: env.revision, region: region.env_revision });
        } else {
            region
        };
        if let Some(dir) = &config.artifact_dir {
            for sub in ["demos", "models", "reproductions"] {
                std::fs::create_dir_all(dir.join(sub))?;
            }
        }
        Ok(Self {
            model,
            env,
            graph,
            region,
            classifier: Classifier::new(),
            config,
            recording: None,
            demos: BTreeMap::new(),
            models: BTreeMap::new(),
            reproductions: BTreeMap::new(),
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn graph(&self) -> &TaskGraph {
        &self.graph
    }

    pub fn demos(&self) -> &BTreeMap<String, TaskTrajectory> {
        &self.demos
    }

    pub fn models(&self) -> &BTreeMap<String, CDMPModel> {
        &self.models
    }

    pub fn reproductions(&self) -> &BTreeMap<String, Reproduction> {
        &self.reproductions
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    /// Classifies all unmapped voxels so guidance frames hit the cache.
    pub fn warm_guidance(&self) {
        self.classifier.warm(&self.region, &self.graph, &self.model, &self.env);
    }

    /// Handles one raw protocol line.
    pub fn handle_line(&mut self, client: &mut ClientState, line: &str) -> Response {
        match serde_json::from_str::<ClientMessage>(line) {
            Ok(msg) => self.handle_message(client, msg),
            Err(e) => Response::error(ErrorCode::BadRequest, e.to_string()),
        }
    }

    pub fn handle_message(&mut self, client: &mut ClientState, msg: ClientMessage) -> Response {
        match msg {
            ClientMessage::Pose { p, q, t } => self.on_pose(client, p, q, t),
            ClientMessage::RecordStart => {
                if self.recording.is_some() {
                    return Response::error(ErrorCode::BadState, "already recording");
                }
                self.recording = Some(Recording { samples: Vec::new(), t0: None });
                Response::reply(ServerMessage::Ack { of: "record_start".into(), name: None, samples: None })
            }
            ClientMessage::RecordStop { name } => self.on_record_stop(name),
            ClientMessage::AddObject { id, shape } => {
                let next = self.env.add_object(&id, shape);
                self.on_env_change(next)
            }
            ClientMessage::RemoveObject { id } => {
                let next = self.env.remove_object(&id);
                self.on_env_change(next)
            }
            ClientMessage::RunPipeline { demo, goal, tau } => self.on_run_pipeline(demo, goal, tau),
            ClientMessage::GetRegion => Response::reply(ServerMessage::Region(self.region.to_file())),
            ClientMessage::GetFrameFull => {
                let tool = client
                    .pending
                    .take()
                    .or_else(|| client.last_frame.as_ref().map(|f| f.tool));
                let Some(tool) = tool else {
                    return Response::error(ErrorCode::BadState, "no tool pose received yet");
                };
                match self.frame(&tool) {
                    Ok(frame) => {
                        client.last_frame = Some(frame.clone());
                        Response::reply(ServerMessage::GuidanceFull(frame))
                    }
                    Err(e) => Response::error(ErrorCode::BadState, e.to_string()),
                }
            }
        }
    }

    fn frame(&self, tool: &ToolPose) -> Result<GuidanceFrame> {
        guidance::blocked_voxels(
            &self.graph,
            &self.region,
            tool,
            &self.config.guidance,
            &self.model,
            &self.env,
            &self.classifier,
        )
    }

    fn on_pose(&mut self, client: &mut ClientState, p: [f64; 3], q: [f64; 4], t: f64) -> Response {
        let pose = match wire_pose(p, q) {
            Ok(pose) => pose,
            Err(e) => return Response::error(ErrorCode::BadRequest, e),
        };
        if !t.is_finite() {
            return Response::error(ErrorCode::BadRequest, "non-finite timestamp");
        }
        let mut out = Response::default();
        if let Some(rec) = &mut self.recording {
            let t0 = *rec.t0.get_or_insert(t);
            let rel = t - t0;
            if rec.samples.last().map_or(false, |s| rel <= s.t) {
                out.reply.push(ServerMessage::error(ErrorCode::BadRequest, "timestamps must increase while recording"));
            } else {
                rec.samples.push(TimedPose { t: rel, pose });
            }
        }
        let tool = ToolPose { pose, timestamp: t };
        let interval = 1.0 / self.config.pose_rate_hz;
        if let Some(last) = client.last_emit_t {
            if t >= last && t - last < interval {
                client.pending = Some(tool);
                return out;
            }
        }
        client.last_emit_t = Some(t);
        out.reply.extend(self.emit(client, tool));
        out
    }

    /// Sends the coalesced pose held back by the throttle, if any.
    pub fn flush(&mut self, client: &mut ClientState) -> Vec<ServerMessage> {
        match client.pending.take() {
            Some(tool) => {
                client.last_emit_t = Some(tool.timestamp);
                self.emit(client, tool).into_iter().collect()
            }
            None => Vec::new(),
        }
    }

    /// Guidance as a diff against what this client last saw. After a region
    /// change the diff is taken against an empty frame, so the client must
    /// reset when `region_revision` moves.
    fn emit(&self, client: &mut ClientState, tool: ToolPose) -> Option<ServerMessage> {
        client.pending = None;
        let frame = match self.frame(&tool) {
            Ok(frame) => frame,
            Err(e) => return Some(ServerMessage::error(ErrorCode::BadState, e.to_string())),
        };
        let empty;
        let prev = match &client.last_frame {
            Some(prev) if prev.region_revision == frame.region_revision => prev,
            _ => {
                empty = GuidanceFrame { blocked: Vec::new(), tool, region_revision: frame.region_revision };
                &empty
            }
        };
        let diff = guidance::frame_diff(prev, &frame).expect("same revision");
        client.last_frame = Some(frame);
        Some(ServerMessage::GuidanceDiff(diff))
    }

    fn on_record_stop(&mut self, name: String) -> Response {
        if !valid_name(&name) {
            return Response::error(ErrorCode::BadRequest, format!("invalid demo name `{name}`"));
        }
        let Some(rec) = self.recording.take() else {
            return Response::error(ErrorCode::BadState, "record_stop without record_start");
        };
        let count = rec.samples.len();
        let demo = match TaskTrajectory::new(rec.samples) {
            Ok(d) => d,
            Err(e) => return Response::error(ErrorCode::BadState, e.to_string()),
        };
        if let Err(e) = self.write_artifact("demos", &name, &demo.to_json()) {
            return Response::error(ErrorCode::BadState, e.to_string());
        }
        self.demos.insert(name.clone(), demo);
        self.models.remove(&name);
        Response::reply(ServerMessage::Ack { of: "record_stop".into(), name: Some(name), samples: Some(count) })
    }

    fn on_env_change(&mut self, next: Result<Environment>) -> Response {
        let env = match next {
            Ok(env) => env,
            Err(e @ (Error::DuplicateObject(_) | Error::UnknownObject(_))) => {
                return Response::error(ErrorCode::BadState, e.to_string())
            }
            Err(e) => return Response::error(ErrorCode::BadRequest, e.to_string()),
        };
        let region = match update_region(&self.region, &self.model, &env, &self.graph) {
            Ok(r) => r,
            Err(e) => return Response::error(ErrorCode::BadState, e.to_string()),
        };
        let removed = self.region.len() - region.len();
        self.env = env;
        self.region = region;
        let mut out = Response::default();
        if self.recording.take().is_some() {
            out.broadcast
                .push(ServerMessage::error(ErrorCode::RegionChanged, "region changed during recording; recording aborted"));
        }
        out.broadcast.push(ServerMessage::RegionUpdated {
            env_revision: self.env.revision,
            removed_pose_count: removed,
            region_size: self.region.len(),
        });
        out
    }

    fn on_run_pipeline(&mut self, name: String, goal: Option<WirePose>, tau: Option<f64>) -> Response {
        match self.run_pipeline(&name, goal, tau) {
            Ok(rep) => Response::reply(ServerMessage::PipelineResult {
                demo: name,
                report: rep.report,
                trajectory: rep.trajectory,
            }),
            Err(msg) => Response::reply(msg),
        }
    }

    /// Trains (or reuses) the demo's model, rolls it out and reproduces it.
    pub fn run_pipeline(
        &mut self,
        name: &str,
        goal: Option<WirePose>,
        tau: Option<f64>,
    ) -> std::result::Result<Reproduction, ServerMessage> {
        let Some(demo) = self.demos.get(name) else {
            return Err(ServerMessage::error(ErrorCode::BadState, format!("unknown demo `{name}`")));
        };
        let ok = validate_demo(demo, &self.region, &self.graph, self.config.guidance.similarity_threshold);
        let offending: Vec<usize> = ok.iter().enumerate().filter(|(_, v)| !**v).map(|(i, _)| i).collect();
        if !offending.is_empty() {
            return Err(ServerMessage::Error {
                code: ErrorCode::DemoOutOfRegion,
                message: format!("{} demo samples lie outside the region", offending.len()),
                indices: offending,
            });
        }
        let goal = match goal {
            None => *demo.last(),
            Some(g) => {
                let pose = wire_pose(g.p, g.q).map_err(|e| ServerMessage::error(ErrorCode::BadRequest, e))?;
                if !self.graph.grid.bounds().contains(&pose.position, 0.0) {
                    return Err(ServerMessage::error(ErrorCode::GoalOutOfBounds, "goal lies outside the task grid"));
                }
                pose
            }
        };
        if let Some(t) = tau {
            if !(t > 0.0) || !t.is_finite() {
                return Err(ServerMessage::error(ErrorCode::BadRequest, "tau must be positive"));
            }
        }
        let start = *demo.first();
        let model = match self.models.get(name) {
            Some(m) => m.clone(),
            None => {
                let m = cdmp::train_with(demo, &self.config.cdmp)
                    .map_err(|e| ServerMessage::error(ErrorCode::BadState, e.to_string()))?;
                self.write_artifact("models", name, &m.to_json())
                    .map_err(|e| ServerMessage::error(ErrorCode::BadState, e.to_string()))?;
                self.models.insert(name.to_string(), m.clone());
                m
            }
        };
        let tau = tau.unwrap_or(model.tau);
        let dt = self.config.rollout_dt.min(tau / 10.0);
        let target = cdmp::rollout(&model, &start, &goal, tau, dt)
            .map_err(|e| ServerMessage::error(ErrorCode::BadRequest, e.to_string()))?;
        let params = self
            .config
            .reproduction
            .unwrap_or_else(|| ReproductionParams::for_epsilon(self.region.epsilon));
        let (trajectory, report) = reproduce(&target, &self.region, &self.graph, &self.model, &self.env, &params)
            .map_err(|e| ServerMessage::error(ErrorCode::BadState, e.to_string()))?;
        let rep = Reproduction { trajectory, report };
        self.write_artifact("reproductions", name, &rep.to_json())
            .map_err(|e| ServerMessage::error(ErrorCode::BadState, e.to_string()))?;
        self.reproductions.insert(name.to_string(), rep.clone());
        Ok(rep)
    }

    fn write_artifact(&self, kind: &str, name: &str, text: &str) -> Result<()> {
        if let Some(dir) = &self.config.artifact_dir {
            std::fs::write(dir.join(kind).join(format!("{name}.json")), text)?;
        }
        Ok(())
    }

    /// Writes every stored demo, model and reproduction under `dir`.
    pub fn save_artifacts(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for sub in ["demos", "models", "reproductions"] {
            std::fs::create_dir_all(dir.join(sub))?;
        }
        for (name, d) in &self.demos {
            std::fs::write(dir.join("demos").join(format!("{name}.json")), d.to_json())?;
        }
        for (name, m) in &self.models {
            std::fs::write(dir.join("models").join(format!("{name}.json")), m.to_json())?;
        }
        for (name, r) in &self.reproductions {
            std::fs::write(dir.join("reproductions").join(format!("{name}.json")), r.to_json())?;
        }
        Ok(())
    }
}

/// Replays a message log against `session` with a single client and returns
/// every message sent to that client, in order.
pub fn replay<'a>(session: &mut Session, lines: impl IntoIterator<Item = &'a str>) -> Vec<ServerMessage> {
    let mut client = ClientState::new();
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let r = session.handle_line(&mut client, line);
        out.extend(r.reply);
        out.extend(r.broadcast);
    }
    out
}
