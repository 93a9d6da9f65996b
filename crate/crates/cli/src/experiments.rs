//! The four experiments. Each validates its config, runs, and writes its
//! artifacts plus a manifest into its own directory.

use std::path::{Path, PathBuf};

use lqt_core::finite_lqt::solve_finite_lqt;
use lqt_core::infinite_lqt::{
    are_residual, policy_iteration, seeded_initial_gain, simulate_with_gain, InitialGainSource, StationarySolution,
};
use lqt_core::metrics::{discounted_cost, gain_error, settling_step, steady_state_margin, steps_to_margin, CostReport};
use lqt_core::qlearning::{generate_training_data, learn_kernel, stabilizing_gain, KernelMatrix, StopReason};
use lqt_core::state_space::{augment, AugmentedSystem, Trajectory};
use lqt_core::Matrix;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, Manifest};
use crate::error::Result;
use crate::io::{matrix_csv, trajectory_csv, write_atomic};
use crate::plot;
use crate::report::{evaluate, CompareReport};

fn cost_csv(report: &CostReport) -> Vec<u8> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf).expect("in-memory write");
    buf
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).expect("summaries are always representable");
    write_atomic(path, text.as_bytes())
}

fn write_manifest(dir: &Path, experiment: Experiment, config: &ExperimentConfig) -> Result<()> {
    write_atomic(&dir.join("manifest.toml"), Manifest::new(experiment, config).to_toml().as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct FiniteSummary {
    pub horizon: usize,
    /// State two samples before the horizon end, before the terminal
    /// weighting pulls the controller off the set point.
    pub converged_state: Vec<f64>,
    pub final_state: Vec<f64>,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_to_margin: Option<usize>,
    pub total_cost: f64,
    pub tracking_cost: f64,
    pub input_cost: f64,
}

pub fn run_finite(config: &ExperimentConfig) -> Result<FiniteSummary> {
    config.validate()?;
    let dir = config.run_dir(Experiment::Finite);
    let (q, r) = (config.q(), config.r());
    let sol = solve_finite_lqt(
        &config.system(),
        &q,
        &r,
        &config.reference_signal(),
        &config.initial_state(),
        0,
        config.horizon as i64,
    )?;
    let traj = &sol.trajectory;
    let margin = config.evaluation.finite_margin;
    let summary = FiniteSummary {
        horizon: config.horizon,
        converged_state: sol.pre_terminal_state().unwrap_or(traj.final_state()).iter().copied().collect(),
        final_state: traj.final_state().iter().copied().collect(),
        margin,
        steps_to_margin: steps_to_margin(traj, margin),
        total_cost: sol.cost.total,
        tracking_cost: sol.cost.tracking,
        input_cost: sol.cost.input,
    };

    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(traj))?;
    write_atomic(&dir.join("cost.csv"), &cost_csv(&sol.cost))?;
    write_toml(&dir.join("summary.toml"), &summary)?;
    write_manifest(&dir, Experiment::Finite, config)?;
    plot::emit(
        &dir.join("trajectory.svg"),
        plot::trajectory_figure(&dir.join("trajectory.csv"), config.evaluation.plot_steps, "Finite-horizon LQT"),
    );
    Ok(summary)
}

/// Closed-loop statistics shared by the stationary controllers.
#[derive(Debug, Clone, Serialize)]
pub struct RolloutSummary {
    pub converged_state: Vec<f64>,
    pub steady_state_margin: f64,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_to_margin: Option<usize>,
    pub settling_step: usize,
    pub cost_horizon: usize,
    pub cost_at_horizon: f64,
    pub tracking_cost: f64,
    pub input_cost: f64,
    pub final_cost: f64,
}

fn rollout_summary(
    config: &ExperimentConfig,
    traj: &Trajectory,
    full: &CostReport,
    margin: f64,
) -> Result<RolloutSummary> {
    let ev = &config.evaluation;
    let head = discounted_cost(traj, &config.q(), &config.r(), config.gamma, ev.cost_horizon)?;
    Ok(RolloutSummary {
        converged_state: traj.final_state().iter().copied().collect(),
        steady_state_margin: steady_state_margin(traj),
        margin,
        steps_to_margin: steps_to_margin(traj, margin),
        settling_step: settling_step(traj, ev.settle_tol),
        cost_horizon: ev.cost_horizon,
        cost_at_horizon: head.total,
        tracking_cost: head.tracking,
        input_cost: head.input,
        final_cost: full.total,
    })
}

/// Rolls out `u = -K [x; r]`, writes trajectory and cost CSVs and figures.
fn evaluate_gain(config: &ExperimentConfig, dir: &Path, k: &Matrix, margin: f64, title: &str) -> Result<RolloutSummary> {
    let ev = &config.evaluation;
    let traj = simulate_with_gain(
        &config.system(),
        &config.reference_signal(),
        k,
        &config.initial_state(),
        ev.rollout_steps,
    )?;
    let full = discounted_cost(&traj, &config.q(), &config.r(), config.gamma, ev.rollout_steps)?;
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&traj))?;
    write_atomic(&dir.join("cost.csv"), &cost_csv(&full))?;
    plot::emit(
        &dir.join("trajectory.svg"),
        plot::trajectory_figure(&dir.join("trajectory.csv"), ev.plot_steps, title),
    );
    plot::emit(
        &dir.join("cost.svg"),
        plot::cost_figure(&[(title, &dir.join("cost.csv"))], "Discounted cumulative cost"),
    );
    rollout_summary(config, &traj, &full, margin)
}

#[derive(Debug, Clone, Serialize)]
pub struct InfiniteSummary {
    pub gamma: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub last_change: f64,
    pub are_residual: f64,
    /// `sampled` or `zero`.
    pub initial_gain: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_gain_attempt: Option<usize>,
    pub rollout: RolloutSummary,
}

struct ModelBased {
    aug: AugmentedSystem,
    solution: StationarySolution,
    k0: Matrix,
    source: InitialGainSource,
}

fn model_based(config: &ExperimentConfig) -> Result<ModelBased> {
    let aug = augment(&config.system(), &config.reference_signal(), &config.q())?;
    let (k0, source) = seeded_initial_gain(&aug, config.gamma, &config.initial_gain(), config.seed)?;
    let solution = policy_iteration(
        &aug,
        &config.r(),
        config.gamma,
        &k0,
        config.epsilon,
        config.policy_iteration.max_iter,
    )?;
    log::info!(
        "policy iteration: {} sweeps, last gain change {:.3e}",
        solution.iterations,
        solution.last_change
    );
    Ok(ModelBased {
        aug,
        solution,
        k0,
        source,
    })
}

pub fn run_infinite(config: &ExperimentConfig) -> Result<InfiniteSummary> {
    config.validate()?;
    let dir = config.run_dir(Experiment::Infinite);
    let mb = model_based(config)?;
    let sol = &mb.solution;
    write_atomic(&dir.join("initial_gain.csv"), &matrix_csv(&mb.k0))?;
    write_atomic(&dir.join("gain.csv"), &matrix_csv(&sol.k))?;
    write_atomic(&dir.join("value.csv"), &matrix_csv(&sol.p))?;
    let rollout = evaluate_gain(config, &dir, &sol.k, config.evaluation.infinite_margin, "Infinite-horizon LQT")?;
    let (initial_gain, initial_gain_attempt) = match mb.source {
        InitialGainSource::Sampled { attempt, .. } => ("sampled".to_string(), Some(attempt)),
        InitialGainSource::Zero => ("zero".to_string(), None),
    };
    let summary = InfiniteSummary {
        gamma: config.gamma,
        epsilon: config.epsilon,
        iterations: sol.iterations,
        last_change: sol.last_change,
        are_residual: are_residual(&mb.aug, &config.r(), config.gamma, &sol.p)?,
        initial_gain,
        initial_gain_attempt,
        rollout,
    };
    write_toml(&dir.join("summary.toml"), &summary)?;
    write_manifest(&dir, Experiment::Infinite, config)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct QlearnSummary {
    pub gamma: f64,
    pub mu: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub iterations: usize,
    /// `converged` or `iteration-limit`.
    pub stop: String,
    pub last_change: f64,
    pub gain_frobenius_error: f64,
    pub gain_mean_abs_error: f64,
    pub rollout: RolloutSummary,
}

pub fn run_qlearn(config: &ExperimentConfig) -> Result<QlearnSummary> {
    config.validate()?;
    let dir = config.run_dir(Experiment::Qlearn);
    let sys = config.system();
    let data = generate_training_data(
        &sys,
        &config.reference_signal(),
        &stabilizing_gain(),
        &config.initial_state(),
        config.n_samples,
        config.seed,
        &config.noise(),
    )?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    write_atomic(&dir.join("dataset.csv"), &buf)?;

    let aug = augment(&sys, &config.reference_signal(), &config.q())?;
    let d = aug.augmented_dim() + aug.input_dim();
    let h0 = KernelMatrix::new(
        Matrix::identity(d, d) * config.qlearning.h0_scale,
        aug.augmented_dim(),
        aug.input_dim(),
    )?;
    let learned = learn_kernel(&data, aug.weight(), &config.r(), &h0, &config.learning())?;
    log::info!(
        "value iteration: {} sweeps, last kernel change {:.3e}",
        learned.iterations,
        learned.last_change
    );
    if learned.stop == StopReason::IterationLimit {
        log::warn!(
            "value iteration stopped at the iteration limit ({}) with kernel change {:.3e} > tol {:.1e}",
            learned.iterations,
            learned.last_change,
            config.qlearning.tol
        );
    }
    let k_hat = learned.gain()?;
    let k_star = model_based(config)?.solution.k;
    let err = gain_error(&k_star, &k_hat)?;
    write_atomic(&dir.join("kernel.csv"), &matrix_csv(learned.kernel.matrix()))?;
    write_atomic(&dir.join("gain.csv"), &matrix_csv(&k_hat))?;
    write_atomic(&dir.join("reference_gain.csv"), &matrix_csv(&k_star))?;

    let rollout = evaluate_gain(config, &dir, &k_hat, config.evaluation.learned_margin, "Q-learning")?;
    let summary = QlearnSummary {
        gamma: config.gamma,
        mu: config.mu,
        n_samples: config.n_samples,
        seed: config.seed,
        iterations: learned.iterations,
        stop: match learned.stop {
            StopReason::Converged => "converged",
            StopReason::IterationLimit => "iteration-limit",
        }
        .to_string(),
        last_change: learned.last_change,
        gain_frobenius_error: err.frobenius,
        gain_mean_abs_error: err.mean_abs,
        rollout,
    };
    write_toml(&dir.join("summary.toml"), &summary)?;
    write_manifest(&dir, Experiment::Qlearn, config)?;
    Ok(summary)
}

/// Runs the model-based and learned controllers side by side (concurrently),
/// then scores them from the CSVs they wrote.
pub fn run_compare(config: &ExperimentConfig) -> Result<CompareReport> {
    config.validate()?;
    let dir = config.run_dir(Experiment::Compare);
    let sub = ExperimentConfig {
        out_dir: dir.clone(),
        ..config.clone()
    };
    let (infinite, qlearn) = std::thread::scope(|s| {
        let a = s.spawn(|| run_infinite(&sub));
        let b = s.spawn(|| run_qlearn(&sub));
        (
            a.join().expect("infinite run panicked"),
            b.join().expect("qlearn run panicked"),
        )
    });
    infinite?;
    qlearn?;

    let model_dir = sub.run_dir(Experiment::Infinite);
    let learned_dir = sub.run_dir(Experiment::Qlearn);
    let report = evaluate(config, &model_dir, &learned_dir)?;
    write_atomic(&dir.join("costs.csv"), &overlay_costs(&model_dir, &learned_dir)?)?;
    write_atomic(&dir.join("report.toml"), report.to_toml().as_bytes())?;
    write_manifest(&dir, Experiment::Compare, config)?;
    plot::emit(
        &dir.join("costs.svg"),
        plot::cost_figure(
            &[
                ("model-based", &model_dir.join("cost.csv")),
                ("Q-learning", &learned_dir.join("cost.csv")),
            ],
            "Discounted cumulative cost",
        ),
    );
    Ok(report)
}

/// `t, model_based, learned` cumulative costs.
fn overlay_costs(model_dir: &Path, learned_dir: &Path) -> Result<Vec<u8>> {
    let a = crate::io::read_cumulative_cost(&model_dir.join("cost.csv"))?;
    let b = crate::io::read_cumulative_cost(&learned_dir.join("cost.csv"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "model_based", "learned"]).expect("in-memory write");
    for ((t, ca), (_, cb)) in a.iter().zip(&b) {
        w.write_record([t.to_string(), ca.to_string(), cb.to_string()])
            .expect("in-memory write");
    }
    Ok(w.into_inner().expect("in-memory flush"))
}

/// Runs one experiment by kind.
pub fn run(experiment: Experiment, config: &ExperimentConfig) -> Result<PathBuf> {
    match experiment {
        Experiment::Finite => run_finite(config).map(|_| ()),
        Experiment::Infinite => run_infinite(config).map(|_| ()),
        Experiment::Qlearn => run_qlearn(config).map(|_| ()),
        Experiment::Compare => run_compare(config).map(|_| ()),
    }?;
    Ok(config.run_dir(experiment))
}
