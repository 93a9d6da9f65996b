//! Experiment configuration. Every field has a default, so an empty file
//! (or no file) runs the extruder benchmark as published.

use std::path::{Path, PathBuf};

use lqt_core::infinite_lqt::InitialGainConfig;
use lqt_core::qlearning::{ProbingNoiseConfig, QLearningConfig, RidgeSolver};
use lqt_core::state_space::{baam_model, baam_reference, LinearSystem, ReferenceSignal, BAAM_INPUTS, BAAM_STATES};
use lqt_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Finite,
    Infinite,
    Qlearn,
    Compare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Finite => "finite",
            Experiment::Infinite => "infinite",
            Experiment::Qlearn => "qlearn",
            Experiment::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the initial-gain draw and the probing noise.
    pub seed: u64,
    /// Each experiment writes into `<out_dir>/<experiment>/`.
    pub out_dir: PathBuf,
    /// Finite-horizon final time `T` (with `t0 = 0`).
    pub horizon: usize,
    pub gamma: f64,
    /// Policy-iteration stopping threshold on the max-abs gain change.
    pub epsilon: f64,
    /// Ridge parameter of the kernel regression.
    pub mu: f64,
    /// Number of training tuples collected for Q-learning.
    pub n_samples: usize,
    pub x0: Vec<f64>,
    /// Constant set point; the built-in zone temperatures when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    pub weights: Weights,
    pub policy_iteration: PolicyIterationConfig,
    pub qlearning: QLearningSettings,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Weights {
    /// Diagonal of the tracking weight `Q`.
    pub q: Vec<f64>,
    /// Diagonal of the input weight `R`.
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyIterationConfig {
    pub max_iter: usize,
    /// Entries of the random initial gain are `N(0, k0_std_dev²)`.
    pub k0_std_dev: f64,
    pub k0_shrink: f64,
    pub k0_max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Variance of the probing-noise offset.
    pub sigma: f64,
    /// Initial kernel is `h0_scale · I`.
    pub h0_scale: f64,
    pub solver: SolverChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    StackedQr,
    NormalEquations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Samples shown in trajectory plots.
    pub plot_steps: usize,
    /// Stages summed for the headline discounted cost.
    pub cost_horizon: usize,
    /// Length of the closed-loop rollouts of stationary controllers.
    pub rollout_steps: usize,
    /// A state counts as settled once it stays this close to its final value.
    pub settle_tol: f64,
    pub finite_margin: f64,
    pub infinite_margin: f64,
    pub learned_margin: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("runs"),
            horizon: 100,
            gamma: 0.99,
            epsilon: 0.1,
            mu: 1e-3,
            n_samples: 2000,
            x0: vec![50.0; BAAM_STATES],
            reference: None,
            weights: Weights::default(),
            policy_iteration: PolicyIterationConfig::default(),
            qlearning: QLearningSettings::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            q: vec![1.0; BAAM_STATES],
            r: vec![1.0; BAAM_INPUTS],
        }
    }
}

impl Default for PolicyIterationConfig {
    fn default() -> Self {
        let g = InitialGainConfig::default();
        Self {
            max_iter: 100,
            k0_std_dev: g.std_dev,
            k0_shrink: g.shrink,
            k0_max_attempts: g.max_attempts,
        }
    }
}

impl Default for QLearningSettings {
    fn default() -> Self {
        let q = QLearningConfig::default();
        Self {
            tol: q.tol,
            max_iter: q.max_iter,
            sigma: ProbingNoiseConfig::default().sigma,
            h0_scale: 1.0,
            solver: SolverChoice::StackedQr,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            plot_steps: 100,
            cost_horizon: 500,
            rollout_steps: 1000,
            settle_tol: 1e-5,
            finite_margin: 0.09,
            infinite_margin: 0.1,
            learned_margin: 0.11,
        }
    }
}

/// A run manifest: the config plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(experiment: Experiment, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment,
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable")
    }
}

impl ExperimentConfig {
    /// Reads either a bare config or a run manifest (whose `[config]` table
    /// is used).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|message| CliError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        if table.contains_key("config") {
            let manifest: Manifest = toml::from_str(text).map_err(|e| e.to_string())?;
            Ok(manifest.config)
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    /// Collects every offending field rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let n = BAAM_STATES;
        let m = BAAM_INPUTS;
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.x0.len() != n || !finite(&self.x0) {
            bad.push(format!("x0: expected {n} finite values, got {:?}", self.x0));
        }
        if let Some(r) = &self.reference {
            if r.len() != n || !finite(r) {
                bad.push(format!("reference: expected {n} finite values, got {r:?}"));
            }
        }
        if self.weights.q.len() != n || self.weights.q.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            bad.push(format!("weights.q: expected {n} non-negative values, got {:?}", self.weights.q));
        }
        if self.weights.r.len() != m || self.weights.r.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            bad.push(format!("weights.r: expected {m} positive values, got {:?}", self.weights.r));
        }
        if self.horizon == 0 {
            bad.push("horizon: must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            bad.push(format!("gamma: {} is outside (0, 1]", self.gamma));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bad.push(format!("epsilon: {} must be positive", self.epsilon));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            bad.push(format!("mu: {} must be finite and >= 0", self.mu));
        }
        if self.n_samples == 0 {
            bad.push("n_samples: must be at least 1".into());
        }
        let pi = &self.policy_iteration;
        if pi.max_iter == 0 {
            bad.push("policy_iteration.max_iter: must be at least 1".into());
        }
        if !(pi.k0_std_dev >= 0.0 && pi.k0_std_dev.is_finite()) {
            bad.push(format!("policy_iteration.k0_std_dev: {} must be >= 0", pi.k0_std_dev));
        }
        if !(pi.k0_shrink > 0.0 && pi.k0_shrink <= 1.0) {
            bad.push(format!("policy_iteration.k0_shrink: {} is outside (0, 1]", pi.k0_shrink));
        }
        let ql = &self.qlearning;
        if ql.tol.is_nan() || ql.tol < 0.0 {
            bad.push(format!("qlearning.tol: {} must be >= 0", ql.tol));
        }
        if ql.max_iter == 0 {
            bad.push("qlearning.max_iter: must be at least 1".into());
        }
        if !(ql.sigma >= 0.0 && ql.sigma.is_finite()) {
            bad.push(format!("qlearning.sigma: {} must be >= 0", ql.sigma));
        }
        if !(ql.h0_scale > 0.0 && ql.h0_scale.is_finite()) {
            bad.push(format!("qlearning.h0_scale: {} must be positive", ql.h0_scale));
        }
        let ev = &self.evaluation;
        if ev.rollout_steps == 0 {
            bad.push("evaluation.rollout_steps: must be at least 1".into());
        }
        if ev.cost_horizon == 0 || ev.cost_horizon > ev.rollout_steps {
            bad.push(format!(
                "evaluation.cost_horizon: {} must be in 1..={}",
                ev.cost_horizon, ev.rollout_steps
            ));
        }
        if ev.plot_steps == 0 {
            bad.push("evaluation.plot_steps: must be at least 1".into());
        }
        for (name, v) in [
            ("evaluation.settle_tol", ev.settle_tol),
            ("evaluation.finite_margin", ev.finite_margin),
            ("evaluation.infinite_margin", ev.infinite_margin),
            ("evaluation.learned_margin", ev.learned_margin),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name}: {v} must be positive"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(bad))
        }
    }

    pub fn system(&self) -> LinearSystem {
        baam_model()
    }

    pub fn reference_signal(&self) -> ReferenceSignal {
        match &self.reference {
            Some(r) => ReferenceSignal::constant(Vector::from_column_slice(r)).expect("validated reference"),
            None => baam_reference(),
        }
    }

    pub fn initial_state(&self) -> Vector {
        Vector::from_column_slice(&self.x0)
    }

    pub fn q(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(&self.weights.q))
    }

    pub fn r(&self) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(&self.weights.r))
    }

    pub fn initial_gain(&self) -> InitialGainConfig {
        InitialGainConfig {
            std_dev: self.policy_iteration.k0_std_dev,
            shrink: self.policy_iteration.k0_shrink,
            max_attempts: self.policy_iteration.k0_max_attempts,
        }
    }

    pub fn noise(&self) -> ProbingNoiseConfig {
        ProbingNoiseConfig {
            sigma: self.qlearning.sigma,
            ..Default::default()
        }
    }

    pub fn learning(&self) -> QLearningConfig {
        QLearningConfig {
            gamma: self.gamma,
            mu: self.mu,
            tol: self.qlearning.tol,
            max_iter: self.qlearning.max_iter,
            solver: match self.qlearning.solver {
                SolverChoice::StackedQr => RidgeSolver::StackedQr,
                SolverChoice::NormalEquations => RidgeSolver::NormalEquations,
            },
        }
    }

    /// Directory an experiment writes into.
    pub fn run_dir(&self, experiment: Experiment) -> PathBuf {
        self.out_dir.join(experiment.name())
    }
}
