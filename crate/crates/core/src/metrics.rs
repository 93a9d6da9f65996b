//! Performance indices, cost decomposition and controller comparison
//! statistics.

use std::io::Write;

use crate::error::{LqtError, Result};
use crate::linalg::{ensure_square, Matrix, Vector};
use crate::state_space::Trajectory;

/// Accumulated cost of a trajectory. `per_step[k]` is the (discounted)
/// stage cost charged at `times[k]` and `cumulative` its running sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub total: f64,
    pub tracking: f64,
    pub input: f64,
    pub times: Vec<i64>,
    pub per_step: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl CostReport {
    fn from_stages(times: Vec<i64>, stages: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut tracking = 0.0;
        let mut input = 0.0;
        let mut per_step = Vec::with_capacity(times.len());
        let mut cumulative = Vec::with_capacity(times.len());
        let mut running = 0.0;
        for (e, u) in stages {
            tracking += e;
            input += u;
            running += e + u;
            per_step.push(e + u);
            cumulative.push(running);
        }
        CostReport {
            total: running,
            tracking,
            input,
            times,
            per_step,
            cumulative,
        }
    }

    /// Writes `t,stage_cost,cumulative` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "stage_cost", "cumulative"])?;
        for ((t, s), c) in self.times.iter().zip(&self.per_step).zip(&self.cumulative) {
            w.write_record([t.to_string(), s.to_string(), c.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Which state a stage input is charged with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagePairing {
    /// `x(t)` with `u(t)`, starting at `t0` (augmented-state index).
    Aligned,
    /// `x(t+1)` with `u(t)`, starting at `t0 + 1` (finite-horizon index).
    Shifted,
}

fn check_weights(traj: &Trajectory, q: &Matrix, r: &Matrix) -> Result<()> {
    traj.validate()?;
    ensure_square("cost: Q", q, traj.states[0].len())?;
    if let Some(u) = traj.inputs.first() {
        ensure_square("cost: R", r, u.len())?;
    }
    Ok(())
}

fn quad(w: &Matrix, v: &Vector) -> f64 {
    v.dot(&(w * v))
}

/// Finite-horizon index: `Σ_{t=t0+1}^{T} eᵀ(t) Q e(t) + uᵀ(t-1) R u(t-1)`.
pub fn finite_cost(traj: &Trajectory, q: &Matrix, r: &Matrix) -> Result<CostReport> {
    check_weights(traj, q, r)?;
    let times = (1..=traj.steps()).map(|k| traj.t0 + k as i64).collect();
    let stages = (0..traj.steps()).map(|k| {
        let e = &traj.states[k + 1] - &traj.references[k + 1];
        (quad(q, &e), quad(r, &traj.inputs[k]))
    });
    Ok(CostReport::from_stages(times, stages))
}

/// Discounted index over the first `horizon` stages with the aligned
/// pairing `γ^(t-t0) [eᵀ(t) Q e(t) + uᵀ(t) R u(t)]`, `t = t0, t0+1, ...`.
pub fn discounted_cost(traj: &Trajectory, q: &Matrix, r: &Matrix, gamma: f64, horizon: usize) -> Result<CostReport> {
    discounted_cost_with(traj, q, r, gamma, horizon, StagePairing::Aligned)
}

pub fn discounted_cost_with(
    traj: &Trajectory,
    q: &Matrix,
    r: &Matrix,
    gamma: f64,
    horizon: usize,
    pairing: StagePairing,
) -> Result<CostReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(LqtError::InvalidParameter {
            name: "gamma",
            reason: format!("{gamma} is outside (0, 1]"),
        });
    }
    check_weights(traj, q, r)?;
    if horizon > traj.steps() {
        return Err(LqtError::dim("discounted_cost: horizon", format!("<= {}", traj.steps()), horizon));
    }
    let offset = match pairing {
        StagePairing::Aligned => 0,
        StagePairing::Shifted => 1,
    };
    let times = (0..horizon).map(|k| traj.t0 + (k + offset) as i64).collect();
    let mut weight = 1.0;
    let stages = (0..horizon).map(|k| {
        let e = &traj.states[k + offset] - &traj.references[k + offset];
        let stage = (weight * quad(q, &e), weight * quad(r, &traj.inputs[k]));
        weight *= gamma;
        stage
    });
    Ok(CostReport::from_stages(times, stages))
}

/// `(tracking, input)` components of a report.
pub fn cost_split(report: &CostReport) -> (f64, f64) {
    (report.tracking, report.input)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainError {
    pub frobenius: f64,
    pub mean_abs: f64,
}

/// Frobenius norm and mean absolute entry of `K* - K̂`.
pub fn gain_error(k_star: &Matrix, k_hat: &Matrix) -> Result<GainError> {
    if k_star.shape() != k_hat.shape() {
        return Err(LqtError::dim(
            "gain_error",
            format!("{:?}", k_star.shape()),
            format!("{:?}", k_hat.shape()),
        ));
    }
    let diff = k_star - k_hat;
    let count = diff.len().max(1) as f64;
    Ok(GainError {
        frobenius: diff.norm(),
        mean_abs: diff.iter().map(|v| v.abs()).sum::<f64>() / count,
    })
}

/// Largest per-state tracking error `max_i |x_i - r_i|` at sample `k`.
pub fn max_tracking_error(traj: &Trajectory, k: usize) -> f64 {
    (&traj.states[k] - &traj.references[k]).amax()
}

/// 1-based index of the first sample at which every state is strictly
/// within `margin` of its reference (`x0` is sample 1).
pub fn steps_to_margin(traj: &Trajectory, margin: f64) -> Option<usize> {
    (0..traj.states.len())
        .find(|&k| max_tracking_error(traj, k) < margin)
        .map(|k| k + 1)
}

/// 1-based index of the first sample from which every later sample stays
/// within `tol` of the trajectory's final state on every coordinate.
pub fn settling_step(traj: &Trajectory, tol: f64) -> usize {
    let last = traj.final_state();
    let outside = traj
        .states
        .iter()
        .rposition(|x| (x - last).amax() > tol);
    match outside {
        Some(k) => k + 2,
        None => 1,
    }
}

/// Largest `|x_i - r_i|` at the final sample.
pub fn steady_state_margin(traj: &Trajectory) -> f64 {
    max_tracking_error(traj, traj.states.len() - 1)
}
