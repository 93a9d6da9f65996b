//! Finite-horizon linear quadratic tracking.
//!
//! The Riccati matrix `S(t)` and the feedforward vector `b(t)` are solved
//! backwards from `S(T) = Q`, `b(T) = 0`; the optimal input is then applied
//! online:
//!
//! ```text
//! u*(t) = -(Bᵀ S(t+1) B + R)⁻¹ Bᵀ [S(t+1) A x(t) + b(t+1) - Q r(t+1)]
//! ```

use crate::error::{LqtError, Result};
use crate::linalg::{ensure_len, ensure_square, ensure_symmetric, solve_spd, symmetrized, Matrix, Vector};
use crate::metrics::{finite_cost, CostReport};
use crate::state_space::{simulate, LinearSystem, ReferenceSignal, Trajectory};

/// Time-indexed Riccati solution for `t0..=T`.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    t0: i64,
    horizon: i64,
    s: Vec<Matrix>,
    b: Vec<Vector>,
    references: Vec<Vector>,
    q: Matrix,
    r: Matrix,
}

impl GainSchedule {
    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn horizon(&self) -> i64 {
        self.horizon
    }

    fn index(&self, t: i64) -> Result<usize> {
        if t < self.t0 || t > self.horizon {
            return Err(LqtError::OutOfRange {
                t,
                first: self.t0,
                last: self.horizon,
            });
        }
        Ok((t - self.t0) as usize)
    }

    /// `S(t)` for `t0 <= t <= T`.
    pub fn riccati(&self, t: i64) -> Result<&Matrix> {
        Ok(&self.s[self.index(t)?])
    }

    /// `b(t)` for `t0 <= t <= T`.
    pub fn feedforward(&self, t: i64) -> Result<&Vector> {
        Ok(&self.b[self.index(t)?])
    }

    /// Materialized reference `r(t)` for `t0 <= t <= T`.
    pub fn reference(&self, t: i64) -> Result<&Vector> {
        Ok(&self.references[self.index(t)?])
    }

    pub fn riccati_sequence(&self) -> &[Matrix] {
        &self.s
    }

    pub fn weights(&self) -> (&Matrix, &Matrix) {
        (&self.q, &self.r)
    }

    /// Optimal input at time `t` for state `x`, valid for `t0 <= t <= T-1`.
    pub fn control_at(&self, sys: &LinearSystem, x: &Vector, t: i64, r_next: &Vector) -> Result<Vector> {
        if t < self.t0 || t >= self.horizon {
            return Err(LqtError::OutOfRange {
                t,
                first: self.t0,
                last: self.horizon - 1,
            });
        }
        ensure_len("control_at: x", x, sys.state_dim())?;
        ensure_len("control_at: r(t+1)", r_next, sys.state_dim())?;
        let k = self.index(t + 1)?;
        let s_next = &self.s[k];
        let b = sys.b();
        let gram = b.transpose() * s_next * b + &self.r;
        let drive = s_next * sys.a() * x + &self.b[k] - &self.q * r_next;
        let rhs = b.transpose() * drive;
        let u = solve_spd("BᵀS(t+1)B + R", &gram, &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))?;
        Ok(-u.column(0).clone_owned())
    }
}

fn validate_weights(sys: &LinearSystem, q: &Matrix, r: &Matrix) -> Result<()> {
    ensure_square("Q", q, sys.state_dim())?;
    ensure_square("R", r, sys.input_dim())?;
    ensure_symmetric("Q", q)?;
    ensure_symmetric("R", r)?;
    if r.clone().cholesky().is_none() {
        return Err(LqtError::InvalidParameter {
            name: "R",
            reason: "must be positive definite".into(),
        });
    }
    let min_eig = q.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-10 * q.norm().max(1.0) {
        return Err(LqtError::InvalidParameter {
            name: "Q",
            reason: format!("must be positive semidefinite (min eigenvalue {min_eig:e})"),
        });
    }
    Ok(())
}

/// Backward Riccati pass over an explicit reference sequence
/// `r(t0), ..., r(T)`.
pub fn backward_pass(
    sys: &LinearSystem,
    q: &Matrix,
    r: &Matrix,
    references: &[Vector],
    t0: i64,
    horizon: i64,
) -> Result<GainSchedule> {
    if horizon <= t0 {
        return Err(LqtError::InvalidParameter {
            name: "horizon",
            reason: format!("T = {horizon} must exceed t0 = {t0}"),
        });
    }
    validate_weights(sys, q, r)?;
    let len = (horizon - t0) as usize + 1;
    if references.len() != len {
        return Err(LqtError::dim("backward_pass: reference samples", len, references.len()));
    }
    for reference in references {
        ensure_len("backward_pass: reference", reference, sys.state_dim())?;
    }

    let n = sys.state_dim();
    let a = sys.a();
    let b = sys.b();
    let at = a.transpose();
    let bt = b.transpose();

    let mut s = vec![Matrix::zeros(n, n); len];
    let mut ff = vec![Vector::zeros(n); len];
    s[len - 1] = q.clone();

    for k in (0..len - 1).rev() {
        let s_next = &s[k + 1];
        let gram = &bt * s_next * b + r;
        let bts = &bt * s_next;
        // (BᵀSB + R)⁻¹ BᵀS
        let gain_core = solve_spd("BᵀS(t+1)B + R", &gram, &bts)?;
        // K = -[(BᵀSB+R)⁻¹BᵀSA]ᵀ
        let k_gain = -(&gain_core * a).transpose();
        let drive = &ff[k + 1] - q * &references[k + 1];
        ff[k] = (&at + &k_gain * &bt) * drive;
        let inner = s_next - s_next * b * &gain_core;
        s[k] = symmetrized(&(&at * inner * a + q));
    }

    Ok(GainSchedule {
        t0,
        horizon,
        s,
        b: ff,
        references: references.to_vec(),
        q: q.clone(),
        r: r.clone(),
    })
}

/// [`backward_pass`] with `r(t) = F^(t-t0) r0`.
pub fn backward_pass_for_signal(
    sys: &LinearSystem,
    q: &Matrix,
    r: &Matrix,
    reference: &ReferenceSignal,
    t0: i64,
    horizon: i64,
) -> Result<GainSchedule> {
    if horizon <= t0 {
        return Err(LqtError::InvalidParameter {
            name: "horizon",
            reason: format!("T = {horizon} must exceed t0 = {t0}"),
        });
    }
    let references = reference.sequence((horizon - t0) as usize + 1);
    backward_pass(sys, q, r, &references, t0, horizon)
}

#[derive(Debug, Clone)]
pub struct FiniteSolution {
    pub trajectory: Trajectory,
    pub schedule: GainSchedule,
    pub cost: CostReport,
}

impl FiniteSolution {
    /// State two samples before the horizon end: the last one before the
    /// terminal weighting pulls the controller off the set point.
    pub fn pre_terminal_state(&self) -> Option<&Vector> {
        let len = self.trajectory.states.len();
        (len >= 3).then(|| &self.trajectory.states[len - 3])
    }
}

/// Offline backward pass followed by the online rollout from `x0`.
pub fn solve_finite_lqt(
    sys: &LinearSystem,
    q: &Matrix,
    r: &Matrix,
    reference: &ReferenceSignal,
    x0: &Vector,
    t0: i64,
    horizon: i64,
) -> Result<FiniteSolution> {
    ensure_len("solve_finite_lqt: x0", x0, sys.state_dim())?;
    let schedule = backward_pass_for_signal(sys, q, r, reference, t0, horizon)?;
    let steps = (horizon - t0) as usize;
    let mut failure = None;
    let trajectory = simulate(sys, reference, x0, t0, steps, |t, x, _| {
        let r_next = &schedule.references[(t - t0) as usize + 1];
        match schedule.control_at(sys, x, t, r_next) {
            Ok(u) => u,
            Err(e) => {
                failure.get_or_insert(e);
                Vector::zeros(sys.input_dim())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let cost = finite_cost(&trajectory, q, r)?;
    Ok(FiniteSolution {
        trajectory,
        schedule,
        cost,
    })
}
