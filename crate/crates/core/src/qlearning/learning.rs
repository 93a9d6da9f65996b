//! Model-free value iteration on the Q-function kernel.
//!
//! Each sweep builds targets `c = XᵀQ1X + uᵀRu + γ ẐᵀHẐ` from the recorded
//! tuples, where `Ẑ = [X(t+1); û]` and `û = -H_uu⁻¹H_uX X(t+1)` is the
//! greedy action of the current kernel, then refits `vec(H)` by ridge
//! regression on the features `zᵀ ⊗ zᵀ`:
//!
//! ```text
//! (ΦᵀΦ + μI) vec(H) = Φᵀc
//! ```
//!
//! The feature matrix does not change between sweeps, so it is factored once.

use super::dataset::TransitionDataset;
use super::kernel::{kron_row, KernelMatrix};
use crate::error::{LqtError, Result};
use crate::linalg::{ensure_square, max_abs, max_abs_diff, symmetrized, Matrix, Vector};

/// Kernel entries beyond this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// How the ridge system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeSolver {
    /// Householder QR of `[Φ; √μ I]`. Never forms `ΦᵀΦ`, so it stays
    /// accurate when the data only excite a subspace.
    #[default]
    StackedQr,
    /// LU of `ΦᵀΦ + μI`. Squares the condition number of `Φ`.
    NormalEquations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearningConfig {
    pub gamma: f64,
    /// Ridge parameter. Zero asks for an unregularised fit, which needs data
    /// exciting every entry of the symmetric kernel.
    pub mu: f64,
    /// Stop once the max-abs change of `H` between sweeps is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub solver: RidgeSolver,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            mu: 1e-3,
            tol: 1e-3,
            max_iter: 30,
            solver: RidgeSolver::StackedQr,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(LqtError::InvalidParameter {
                name: "gamma",
                reason: format!("{} is outside (0, 1]", self.gamma),
            });
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(LqtError::InvalidParameter {
                name: "mu",
                reason: format!("{} must be finite and >= 0", self.mu),
            });
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(LqtError::InvalidParameter {
                name: "tol",
                reason: format!("{} must be >= 0", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(LqtError::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LearnedKernel {
    pub kernel: KernelMatrix,
    pub iterations: usize,
    pub stop: StopReason,
    /// Max-abs change of `H` on the last sweep.
    pub last_change: f64,
    /// Change after every sweep, in order.
    pub history: Vec<f64>,
}

impl LearnedKernel {
    pub fn gain(&self) -> Result<Matrix> {
        self.kernel.gain()
    }
}

enum Factor {
    /// Thin `Q` restricted to the data rows, and `R`, of `[Φ; √μ I]`.
    Qr { q_top: Matrix, r: Matrix },
    Normal { lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, phi_t: Matrix },
    /// Unregularised least squares on the `d(d+1)/2` distinct entries.
    Exact { svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, tol: f64 },
}

struct Regression {
    d: usize,
    factor: Factor,
}

/// Features `[z_i², 2 z_i z_j (i < j)]` of the distinct kernel entries.
fn half_features(z: &Vector) -> Vector {
    let d = z.len();
    let mut out = Vector::zeros(d * (d + 1) / 2);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            out[k] = if i == j { z[i] * z[i] } else { 2.0 * z[i] * z[j] };
            k += 1;
        }
    }
    out
}

fn joint(x: &Vector, u: &Vector) -> Vector {
    let mut z = Vector::zeros(x.len() + u.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), u.len()).copy_from(u);
    z
}

impl Regression {
    fn build(data: &TransitionDataset, mu: f64, solver: RidgeSolver) -> Result<Self> {
        let nx = 2 * data.plant_dim();
        let d = nx + data.input_dim();
        let n = data.len();
        if n == 0 {
            return Err(LqtError::DegenerateData {
                reason: "no transitions".into(),
            });
        }
        let zs: Vec<Vector> = data.transitions().iter().map(|tr| joint(&tr.state, &tr.input)).collect();
        if zs.iter().all(|z| z.iter().all(|&v| v == 0.0)) {
            return Err(LqtError::DegenerateData {
                reason: "every regression feature is zero".into(),
            });
        }

        if mu == 0.0 {
            let unknowns = d * (d + 1) / 2;
            if n < unknowns {
                return Err(LqtError::RankDeficient { rank: n, unknowns });
            }
            let mut phi = Matrix::zeros(n, unknowns);
            for (row, z) in zs.iter().enumerate() {
                phi.row_mut(row).copy_from(&half_features(z).transpose());
            }
            let svd = phi.svd(true, true);
            let top = svd.singular_values.max();
            let tol = top * n.max(unknowns) as f64 * f64::EPSILON;
            let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
            if rank < unknowns {
                return Err(LqtError::RankDeficient { rank, unknowns });
            }
            return Ok(Self {
                d,
                factor: Factor::Exact { svd, tol },
            });
        }

        let p = d * d;
        let factor = match solver {
            RidgeSolver::StackedQr => {
                let mut stacked = Matrix::zeros(n + p, p);
                for (row, z) in zs.iter().enumerate() {
                    stacked.row_mut(row).copy_from(&kron_row(z).transpose());
                }
                stacked.view_mut((n, 0), (p, p)).fill_diagonal(mu.sqrt());
                let qr = stacked.qr();
                let q = qr.q();
                Factor::Qr {
                    q_top: q.rows(0, n).clone_owned(),
                    r: qr.r(),
                }
            }
            RidgeSolver::NormalEquations => {
                let mut phi_t = Matrix::zeros(p, n);
                for (col, z) in zs.iter().enumerate() {
                    phi_t.column_mut(col).copy_from(&kron_row(z));
                }
                let gram = &phi_t * phi_t.transpose() + Matrix::identity(p, p) * mu;
                Factor::Normal { lu: gram.lu(), phi_t }
            }
        };
        Ok(Self { d, factor })
    }

    fn solve(&self, targets: &Vector) -> Result<Matrix> {
        let d = self.d;
        let h = match &self.factor {
            Factor::Qr { q_top, r } => {
                let rhs = q_top.tr_mul(targets);
                let vec_h = r
                    .solve_upper_triangular(&rhs)
                    .ok_or(LqtError::Singular { what: "ridge QR factor" })?;
                Matrix::from_column_slice(d, d, vec_h.as_slice())
            }
            Factor::Normal { lu, phi_t } => {
                let vec_h = lu
                    .solve(&(phi_t * targets))
                    .ok_or(LqtError::Singular { what: "ΦᵀΦ + μI" })?;
                Matrix::from_column_slice(d, d, vec_h.as_slice())
            }
            Factor::Exact { svd, tol } => {
                let theta = svd
                    .solve(targets, *tol)
                    .map_err(|_| LqtError::Singular { what: "regression matrix" })?;
                let mut h = Matrix::zeros(d, d);
                let mut k = 0;
                for i in 0..d {
                    for j in i..d {
                        h[(i, j)] = theta[k];
                        h[(j, i)] = theta[k];
                        k += 1;
                    }
                }
                h
            }
        };
        Ok(symmetrized(&h))
    }
}

fn check_inputs(data: &TransitionDataset, h: &KernelMatrix, q1: &Matrix, r: &Matrix) -> Result<()> {
    let nx = 2 * data.plant_dim();
    let m = data.input_dim();
    ensure_square("Q1", q1, nx)?;
    ensure_square("R", r, m)?;
    if h.state_dim() != nx || h.input_dim() != m {
        return Err(LqtError::dim(
            "initial kernel blocks",
            format!("({nx}, {m})"),
            format!("({}, {})", h.state_dim(), h.input_dim()),
        ));
    }
    Ok(())
}

fn targets(data: &TransitionDataset, h: &KernelMatrix, q1: &Matrix, r: &Matrix, gamma: f64) -> Result<Vector> {
    let k_hat = h.gain()?;
    let hm = h.matrix();
    let costs = data.transitions().iter().map(|tr| {
        let stage = tr.state.dot(&(q1 * &tr.state)) + tr.input.dot(&(r * &tr.input));
        let u_hat = -(&k_hat * &tr.next_state);
        let z_hat = joint(&tr.next_state, &u_hat);
        stage + gamma * z_hat.dot(&(hm * &z_hat))
    });
    Ok(Vector::from_iterator(data.len(), costs))
}

fn refit(reg: &Regression, data: &TransitionDataset, h: &KernelMatrix, q1: &Matrix, r: &Matrix, gamma: f64) -> Result<KernelMatrix> {
    let c = targets(data, h, q1, r, gamma)?;
    let next = reg.solve(&c)?;
    KernelMatrix::new(next, h.state_dim(), h.input_dim())
}

/// One value-iteration sweep from `h`.
pub fn value_iteration_step(
    data: &TransitionDataset,
    h: &KernelMatrix,
    q1: &Matrix,
    r: &Matrix,
    config: &QLearningConfig,
) -> Result<KernelMatrix> {
    config.validate()?;
    check_inputs(data, h, q1, r)?;
    let reg = Regression::build(data, config.mu, config.solver)?;
    refit(&reg, data, h, q1, r, config.gamma)
}

/// Iterates [`value_iteration_step`] from `h0` until the kernel change drops
/// to `tol` or `max_iter` sweeps have run.
pub fn learn_kernel(
    data: &TransitionDataset,
    q1: &Matrix,
    r: &Matrix,
    h0: &KernelMatrix,
    config: &QLearningConfig,
) -> Result<LearnedKernel> {
    config.validate()?;
    check_inputs(data, h0, q1, r)?;
    let reg = Regression::build(data, config.mu, config.solver)?;
    let mut h = h0.clone();
    let mut history = Vec::with_capacity(config.max_iter);
    for iteration in 1..=config.max_iter {
        let next = refit(&reg, data, &h, q1, r, config.gamma).map_err(|e| match e {
            LqtError::NonFinite { .. } => LqtError::Divergence {
                iteration,
                norm: f64::INFINITY,
            },
            other => other,
        })?;
        let norm = max_abs(next.matrix());
        if norm.is_nan() || norm > DIVERGENCE_LIMIT {
            return Err(LqtError::Divergence { iteration, norm });
        }
        let change = max_abs_diff(next.matrix(), h.matrix());
        history.push(change);
        h = next;
        log::debug!("value iteration {iteration}: |ΔH| = {change:.3e}");
        if change <= config.tol {
            return Ok(LearnedKernel {
                kernel: h,
                iterations: iteration,
                stop: StopReason::Converged,
                last_change: change,
                history,
            });
        }
    }
    Ok(LearnedKernel {
        kernel: h,
        iterations: config.max_iter,
        stop: StopReason::IterationLimit,
        last_change: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
