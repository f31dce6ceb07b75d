use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use guided_lfd::cdmp::{self, CDMPModel, CdmpParams, TaskTrajectory};
use guided_lfd::collision::Environment;
use guided_lfd::guidance::{Classifier, GuidanceParams, VoxelClass};
use guided_lfd::kinematics::{ArmModel, Pose};
use guided_lfd::planner::{plan_regions, select_primary_region, update_region, PlannerParams, Region};
use guided_lfd::reproduction::{reproduce, validate_demo, Reproduction, ReproductionParams};
use guided_lfd::scenario::{WALL_ENV_JSON, WALL_GRID_JSON};
use guided_lfd::session::{self, Session, SessionConfig};
use guided_lfd::taskspace::{GridSpec, TaskGraph};
use serde::Serialize;

/// Regions of reproducible motion and guided demonstration for 6-DOF arms.
///
/// Omitted arm, environment and grid files default to the bundled UR5 wall
/// scenario.
#[derive(Parser)]
#[command(name = "glfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Arm {
    /// Arm model JSON.
    #[arg(long)]
    arm: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    /// Grid spec JSON.
    #[arg(long)]
    grid: Option<PathBuf>,
}

#[derive(Args)]
struct Env {
    /// Environment JSON.
    #[arg(long)]
    env: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan regions and write the primary one.
    Plan {
        /// Arm model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Re-check a region against an edited environment.
    Update {
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        arm: Arm,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check every demo sample against a region. Exits 2 if any fail.
    Validate {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        grid: Grid,
        /// Forward-axis similarity threshold (cosine).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fit a CDMP to a demonstration.
    Train {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CdmpParams::default().n_kernels)]
        kernels: usize,
    },
    /// Roll out a CDMP and map it to joints. Exits 2 if reproduction fails.
    Reproduce {
        /// CDMP model JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        arm: Arm,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        grid: Grid,
        /// Goal as `x,y,z,qw,qx,qy,qz`; defaults to the trained goal.
        #[arg(long, value_parser = parse_pose)]
        goal: Option<Pose>,
        /// Start as `x,y,z,qw,qx,qy,qz`; defaults to the trained start.
        #[arg(long, value_parser = parse_pose)]
        start: Option<Pose>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the session protocol over TCP.
    Serve {
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        arm: Arm,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        port: u16,
        /// Directory for recorded demos, models and reproductions.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Classify every grid pose outside a region.
    Classify {
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        arm: Arm,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a message log against a fresh session and store its artifacts.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        region: PathBuf,
        #[command(flatten)]
        arm: Arm,
        #[command(flatten)]
        env: Env,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        artifacts: PathBuf,
        /// Also write every server message here, one per line.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 7 || v.iter().any(|x| !x.is_finite()) {
        return Err("expected seven finite numbers x,y,z,qw,qx,qy,qz".into());
    }
    let n = v[3..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-9 {
        return Err("zero quaternion".into());
    }
    Ok(Pose::from_parts([v[0], v[1], v[2]], [v[3] / n, v[4] / n, v[5] / n, v[6] / n]))
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn arm(path: &Option<PathBuf>) -> Res<ArmModel> {
    Ok(match path {
        Some(p) => ArmModel::load(p)?,
        None => ArmModel::ur5(),
    })
}

fn env(path: &Option<PathBuf>) -> Res<Environment> {
    Ok(match path {
        Some(p) => Environment::load(p)?,
        None => Environment::from_json(WALL_ENV_JSON)?,
    })
}

fn graph(path: &Option<PathBuf>) -> Res<TaskGraph> {
    let spec = match path {
        Some(p) => GridSpec::load(p)?,
        None => GridSpec::from_json(WALL_GRID_JSON)?,
    };
    Ok(spec.build()?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Res<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Serialize)]
struct Classification {
    env_revision: u64,
    counts: BTreeMap<VoxelClass, usize>,
    voxels: Vec<(usize, VoxelClass)>,
}

fn run(cli: Cli) -> Res<ExitCode> {
    match cli.command {
        Command::Plan { model, env: e, grid: g, out, epsilon, seed, restarts, rounds } => {
            let (model, env, graph) = (arm(&model)?, env(&e.env)?, graph(&g.grid)?);
            let mut params = PlannerParams::default();
            if let Some(x) = epsilon {
                params.epsilon = x;
            }
            if let Some(x) = seed {
                params.random_seed = x;
            }
            if let Some(x) = restarts {
                params.num_restarts = x;
            }
            if let Some(x) = rounds {
                params.num_subspace_rounds = x;
            }
            let regions = plan_regions(&model, &env, &graph, &params)?;
            let primary = select_primary_region(&regions)?;
            primary.save(&out)?;
            println!(
                "{} regions; primary has {} of {} poses, path cost {:.4}",
                regions.len(),
                primary.len(),
                graph.grid.len(),
                primary.mapping.total_path_cost
            );
        }
        Command::Update { region, env: e, arm: a, grid: g, out } => {
            let (model, env, graph) = (arm(&a.arm)?, env(&e.env)?, graph(&g.grid)?);
            let old = Region::load(&region, &graph)?;
            let new = update_region(&old, &model, &env, &graph)?;
            new.save(&out)?;
            println!("removed {} poses; {} remain", old.len() - new.len(), new.len());
        }
        Command::Validate { demo, region, grid: g, threshold } => {
            let graph = graph(&g.grid)?;
            let region = Region::load(&region, &graph)?;
            let demo = TaskTrajectory::load(&demo)?;
            let threshold = threshold.unwrap_or(GuidanceParams::default().similarity_threshold);
            let bad: Vec<usize> = validate_demo(&demo, &region, &graph, threshold)
                .iter()
                .enumerate()
                .filter(|(_, ok)| !**ok)
                .map(|(i, _)| i)
                .collect();
            println!("{}", serde_json::to_string(&serde_json::json!({ "valid": bad.is_empty(), "offending": bad }))?);
            if !bad.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Train { demo, out, kernels } => {
            let demo = TaskTrajectory::load(&demo)?;
            let params = CdmpParams { n_kernels: kernels, ..CdmpParams::default() };
            cdmp::train_with(&demo, &params)?.save(&out)?;
        }
        Command::Reproduce { model, region, arm: a, env: e, grid: g, goal, start, tau, dt, out } => {
            let (arm_model, env, graph) = (arm(&a.arm)?, env(&e.env)?, graph(&g.grid)?);
            let region = Region::load(&region, &graph)?;
            let cdmp_model = CDMPModel::load(&model)?;
            let start = start.unwrap_or(cdmp_model.start_pose);
            let goal = goal.unwrap_or(cdmp_model.goal_pose);
            let target = cdmp::rollout(&cdmp_model, &start, &goal, tau.unwrap_or(cdmp_model.tau), dt)?;
            let params = ReproductionParams::for_epsilon(region.epsilon);
            let (trajectory, report) = reproduce(&target, &region, &graph, &arm_model, &env, &params)?;
            let success = report.success;
            Reproduction { trajectory, report }.save(&out)?;
            if !success {
                eprintln!("reproduction failed; see report in {}", out.display());
                return Ok(ExitCode::from(2));
            }
        }
        Command::Serve { region, env: e, arm: a, grid: g, host, port, artifacts } => {
            let (model, env, graph) = (arm(&a.arm)?, env(&e.env)?, graph(&g.grid)?);
            let region = Region::load(&region, &graph)?;
            let config = SessionConfig { artifact_dir: artifacts, ..SessionConfig::default() };
            let session = Session::new(model, env, graph, region, config)?;
            session.warm_guidance();
            let listener = TcpListener::bind((host.as_str(), port))?;
            eprintln!("listening on {}", listener.local_addr()?);
            session::server::serve(listener, session, Duration::from_millis(16))?;
        }
        Command::Classify { region, arm: a, env: e, grid: g, out } => {
            let (model, env, graph) = (arm(&a.arm)?, env(&e.env)?, graph(&g.grid)?);
            let region = Region::load(&region, &graph)?;
            let classifier = Classifier::new();
            classifier.warm(&region, &graph, &model, &env);
            let mut result = Classification { env_revision: env.revision, counts: BTreeMap::new(), voxels: Vec::new() };
            for i in (0..graph.grid.len()).filter(|i| !region.contains(*i)) {
                let c = classifier.classify(i, &region, &graph, &model, &env)?;
                *result.counts.entry(c).or_default() += 1;
                result.voxels.push((i, c));
            }
            write_json(&out, &result)?;
            println!("{}", serde_json::to_string(&result.counts)?);
        }
        Command::Replay { log, region, arm: a, env: e, grid: g, artifacts, transcript } => {
            let (model, env, graph) = (arm(&a.arm)?, env(&e.env)?, graph(&g.grid)?);
            let region = Region::load(&region, &graph)?;
            let config = SessionConfig { artifact_dir: Some(artifacts), ..SessionConfig::default() };
            let mut session = Session::new(model, env, graph, region, config)?;
            let text = std::fs::read_to_string(&log)?;
            let msgs = session::replay(&mut session, text.lines());
            if let Some(path) = transcript {
                let lines: String = msgs.iter().map(|m| m.to_line() + "\n").collect();
                std::fs::write(path, lines)?;
            }
            println!(
                "{} messages out; {} demos, {} models, {} reproductions",
                msgs.len(),
                session.demos().len(),
                session.models().len(),
                session.reproductions().len()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
