//! Cartesian dynamic movement primitives.
//!
//! Position follows `tau^2 a = alpha (beta (g - p) - tau v) + f_p(s)`.
//! Orientation runs the same system on `e = log(q * g^-1)` with target zero,
//! so `q = exp(e) * g`. The phase decays as `s' = -alpha_s s / tau` and both
//! forcing terms are `f(s) = s * sum(psi_i w_i) / sum(psi_i)` with Gaussian
//! kernels whose centers are evenly spaced in time over the demo.

mod quat;
mod trajectory;

use std::path::Path;

use nalgebra::{SVector, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::Pose;

pub use quat::{quat_exp, quat_log};
pub use trajectory::{TaskTrajectory, TimedPose};

/// Rollouts run to this multiple of the time constant.
pub const ROLLOUT_HORIZON: f64 = 1.2;

/// Internal RK4 steps per time constant, at least.
const STEPS_PER_TAU: f64 = 2000.0;

/// Kernel width relative to center spacing: `h_i = KERNEL_WIDTH / dc_i^2`.
const KERNEL_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdmpParams {
    pub n_kernels: usize,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_s: f64,
}

impl Default for CdmpParams {
    fn default() -> Self {
        Self {
            n_kernels: 30,
            alpha: 48.0,
            beta: 12.0,
            alpha_s: 4.0,
        }
    }
}

impl CdmpParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_kernels < 2 {
            return Err(Error::InvalidParams("n_kernels must be at least 2".into()));
        }
        if !(self.beta > 0.0) || !(self.alpha_s > 0.0) {
            return Err(Error::InvalidParams("gains must be positive".into()));
        }
        if (self.alpha - 4.0 * self.beta).abs() > 1e-9 * self.alpha.abs().max(1.0) {
            return Err(Error::InvalidParams("alpha must equal 4 * beta".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CDMPModel {
    pub n_kernels: usize,
    /// Per axis, one weight per kernel.
    pub position_weights: [Vec<f64>; 3],
    pub orientation_weights: [Vec<f64>; 3],
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_s: f64,
    pub start_pose: Pose,
    pub goal_pose: Pose,
}

struct Kernels {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Kernels {
    fn new(n: usize, alpha_s: f64) -> Self {
        let centers: Vec<f64> = (0..n)
            .map(|i| (-alpha_s * i as f64 / (n - 1) as f64).exp())
            .collect();
        let widths = (0..n)
            .map(|i| {
                let dc = if i + 1 < n {
                    centers[i] - centers[i + 1]
                } else {
                    centers[i - 1] - centers[i]
                };
                KERNEL_WIDTH / (dc * dc)
            })
            .collect();
        Self { centers, widths }
    }

    fn activations(&self, s: f64, out: &mut [f64]) {
        for ((o, c), h) in out.iter_mut().zip(&self.centers).zip(&self.widths) {
            *o = (-h * (s - c) * (s - c)).exp();
        }
    }

    fn forcing(&self, s: f64, weights: &[Vec<f64>; 3], scratch: &mut [f64]) -> Vector3<f64> {
        self.activations(s, scratch);
        let total: f64 = scratch.iter().sum();
        if total <= f64::MIN_POSITIVE {
            return Vector3::zeros();
        }
        Vector3::from_fn(|d, _| s * scratch.iter().zip(&weights[d]).map(|(p, w)| p * w).sum::<f64>() / total)
    }
}

impl CDMPModel {
    pub fn params(&self) -> CdmpParams {
        CdmpParams {
            n_kernels: self.n_kernels,
            alpha: self.alpha,
            beta: self.beta,
            alpha_s: self.alpha_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParams("tau must be positive".into()));
        }
        let ok = |w: &[Vec<f64>; 3]| w.iter().all(|v| v.len() == self.n_kernels && v.iter().all(|x| x.is_finite()));
        if !ok(&self.position_weights) || !ok(&self.orientation_weights) {
            return Err(Error::InvalidParams("weight arrays do not match n_kernels".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: CDMPModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Position forcing term at phase `s`.
    pub fn position_forcing(&self, s: f64) -> Vector3<f64> {
        let k = Kernels::new(self.n_kernels, self.alpha_s);
        k.forcing(s, &self.position_weights, &mut vec![0.0; self.n_kernels])
    }

    /// Orientation forcing term at phase `s`.
    pub fn orientation_forcing(&self, s: f64) -> Vector3<f64> {
        let k = Kernels::new(self.n_kernels, self.alpha_s);
        k.forcing(s, &self.orientation_weights, &mut vec![0.0; self.n_kernels])
    }
}

/// Goal-relative orientation error `log(q * g^-1)`.
pub fn orientation_error(q: &UnitQuaternion<f64>, goal: &UnitQuaternion<f64>) -> Vector3<f64> {
    quat_log(&(q * goal.inverse()))
}

/// First derivative on a possibly non-uniform grid, second order accurate.
fn gradient(t: &[f64], y: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let n = y.len();
    if n == 2 {
        let d = (y[1] - y[0]) / (t[1] - t[0]);
        return vec![d, d];
    }
    let mut out = vec![Vector3::zeros(); n];
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        out[i] = (y[i + 1] * (h1 * h1) - y[i - 1] * (h2 * h2) + y[i] * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h1 + h2));
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    out[0] = y[0] * (-(2.0 * h1 + h2) / (h1 * (h1 + h2))) + y[1] * ((h1 + h2) / (h1 * h2))
        - y[2] * (h1 / (h2 * (h1 + h2)));
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    out[n - 1] = y[n - 3] * (h2 / (h1 * (h1 + h2))) - y[n - 2] * ((h1 + h2) / (h1 * h2))
        + y[n - 1] * ((h1 + 2.0 * h2) / (h2 * (h1 + h2)));
    out
}

/// Locally weighted regression of `target(s) ~ s * w_i` per kernel.
fn fit_weights(k: &Kernels, phases: &[f64], targets: &[Vector3<f64>]) -> [Vec<f64>; 3] {
    let n = k.centers.len();
    let mut num = vec![Vector3::zeros(); n];
    let mut den = vec![0.0; n];
    let mut psi = vec![0.0; n];
    for (s, f) in phases.iter().zip(targets) {
        k.activations(*s, &mut psi);
        for i in 0..n {
            num[i] += f * (s * psi[i]);
            den[i] += s * s * psi[i];
        }
    }
    std::array::from_fn(|d| {
        (0..n)
            .map(|i| if den[i] > 1e-300 { num[i][d] / den[i] } else { 0.0 })
            .collect()
    })
}

/// Fits a model to one demonstration with default gains.
pub fn train(demo: &TaskTrajectory, n_kernels: usize) -> Result<CDMPModel> {
    train_with(demo, &CdmpParams { n_kernels, ..Default::default() })
}

pub fn train_with(demo: &TaskTrajectory, params: &CdmpParams) -> Result<CDMPModel> {
    params.validate()?;
    let samples = demo.samples();
    let tau = demo.duration();
    let start_pose = samples[0].pose;
    let goal_pose = samples[samples.len() - 1].pose;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let p: Vec<Vector3<f64>> = samples.iter().map(|s| s.pose.position).collect();
    let e: Vec<Vector3<f64>> = samples
        .iter()
        .map(|s| orientation_error(&s.pose.orientation, &goal_pose.orientation))
        .collect();
    let phases: Vec<f64> = t.iter().map(|t| (-params.alpha_s * t / tau).exp()).collect();
    let (alpha, beta) = (params.alpha, params.beta);

    let targets = |y: &[Vector3<f64>], goal: Vector3<f64>| -> Vec<Vector3<f64>> {
        let v = gradient(&t, y);
        let a = gradient(&t, &v);
        (0..y.len())
            .map(|i| a[i] * (tau * tau) - ((goal - y[i]) * beta - v[i] * tau) * alpha)
            .collect()
    };
    let kernels = Kernels::new(params.n_kernels, params.alpha_s);
    let position_weights = fit_weights(&kernels, &phases, &targets(&p, goal_pose.position));
    let orientation_weights = fit_weights(&kernels, &phases, &targets(&e, Vector3::zeros()));
    Ok(CDMPModel {
        n_kernels: params.n_kernels,
        position_weights,
        orientation_weights,
        tau,
        alpha,
        beta,
        alpha_s: params.alpha_s,
        start_pose,
        goal_pose,
    })
}

type State = SVector<f64, 12>;

/// Integrates the model from `start` (at rest) toward `goal` over
/// `[0, 1.2 tau_prime]`, sampled every `dt`.
pub fn rollout(model: &CDMPModel, start: &Pose, goal: &Pose, tau_prime: f64, dt: f64) -> Result<TaskTrajectory> {
    model.validate()?;
    if !(tau_prime > 0.0) || !tau_prime.is_finite() {
        return Err(Error::InvalidRollout(format!("tau must be positive, got {tau_prime}")));
    }
    if !(dt > 0.0) || dt > tau_prime / 10.0 {
        return Err(Error::InvalidRollout(format!("dt must lie in (0, tau/10], got {dt}")));
    }
    let kernels = Kernels::new(model.n_kernels, model.alpha_s);
    let mut scratch = vec![0.0; model.n_kernels];
    let (alpha, beta, alpha_s) = (model.alpha, model.beta, model.alpha_s);
    let gp = goal.position;
    let tau = tau_prime;

    let mut deriv = |t: f64, x: &State| -> State {
        let s = (-alpha_s * t / tau).exp();
        let fp = kernels.forcing(s, &model.position_weights, &mut scratch);
        let fq = kernels.forcing(s, &model.orientation_weights, &mut scratch);
        let y = x.fixed_rows::<3>(0);
        let v = x.fixed_rows::<3>(3);
        let e = x.fixed_rows::<3>(6);
        let u = x.fixed_rows::<3>(9);
        let acc_p = ((gp - y) * beta - v * tau) * alpha + fp;
        let acc_q = (-e * beta - u * tau) * alpha + fq;
        let mut out = State::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&v);
        out.fixed_rows_mut::<3>(3).copy_from(&(acc_p / (tau * tau)));
        out.fixed_rows_mut::<3>(6).copy_from(&u);
        out.fixed_rows_mut::<3>(9).copy_from(&(acc_q / (tau * tau)));
        out
    };

    let mut x = State::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&start.position);
    x.fixed_rows_mut::<3>(6).copy_from(&orientation_error(&start.orientation, &goal.orientation));

    let count = (ROLLOUT_HORIZON * tau_prime / dt + 1e-9).floor() as usize;
    let substeps = ((dt * STEPS_PER_TAU / tau_prime).ceil() as usize).max(1);
    let h = dt / substeps as f64;
    let to_pose = |x: &State| {
        let e: Vector3<f64> = x.fixed_rows::<3>(6).into_owned();
        let q = (quat_exp(&e) * goal.orientation).into_inner();
        Pose::new(x.fixed_rows::<3>(0).into_owned(), UnitQuaternion::new_normalize(q))
    };

    let mut samples = Vec::with_capacity(count + 1);
    samples.push(TimedPose { t: 0.0, pose: to_pose(&x) });
    for k in 0..count {
        let t0 = k as f64 * dt;
        for j in 0..substeps {
            let t = t0 + j as f64 * h;
            let k1 = deriv(t, &x);
            let k2 = deriv(t + h / 2.0, &(x + k1 * (h / 2.0)));
            let k3 = deriv(t + h / 2.0, &(x + k2 * (h / 2.0)));
            let k4 = deriv(t + h, &(x + k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        samples.push(TimedPose { t: (k + 1) as f64 * dt, pose: to_pose(&x) });
    }
    TaskTrajectory::new(samples)
}
