//! Discrete-time linear plants, reference generators, the augmented
//! tracking system, and deterministic rollouts.
//!
//! Temperatures are in °C and time is an integer sample index; vectors
//! carry no unit metadata at runtime.

use crate::error::{LqtError, Result};
use crate::linalg::{
    all_finite, block_diag, ensure_len, ensure_square, ensure_symmetric, Matrix, Vector,
};

/// Plant `x(t+1) = A x(t) + B u(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || b.ncols() == 0 {
            return Err(LqtError::dim("LinearSystem", "n >= 1 and m >= 1", format!("{}x{}", n, b.ncols())));
        }
        ensure_square("LinearSystem::A", &a, n)?;
        if b.nrows() != n {
            return Err(LqtError::dim("LinearSystem::B rows", n, b.nrows()));
        }
        if !all_finite(&a) {
            return Err(LqtError::NonFinite { what: "A" });
        }
        if !all_finite(&b) {
            return Err(LqtError::NonFinite { what: "B" });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// One transition `A x + B u`.
    pub fn step(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        ensure_len("step: state", x, self.state_dim())?;
        ensure_len("step: input", u, self.input_dim())?;
        Ok(&self.a * x + &self.b * u)
    }
}

/// Reference generated by `r(t+1) = F r(t)` from `r(t0) = r0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignal {
    generator: Matrix,
    initial: Vector,
}

impl ReferenceSignal {
    pub fn new(generator: Matrix, initial: Vector) -> Result<Self> {
        let n = initial.len();
        ensure_square("ReferenceSignal::F", &generator, n)?;
        if !all_finite(&generator) {
            return Err(LqtError::NonFinite { what: "F" });
        }
        if !initial.iter().all(|v| v.is_finite()) {
            return Err(LqtError::NonFinite { what: "r0" });
        }
        Ok(Self { generator, initial })
    }

    /// A set point held forever (`F = I`).
    pub fn constant(value: Vector) -> Result<Self> {
        let n = value.len();
        Self::new(Matrix::identity(n, n), value)
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    pub fn initial(&self) -> &Vector {
        &self.initial
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// `F^k r0`, the reference `k` samples after `t0`.
    pub fn at(&self, k: usize) -> Vector {
        let mut r = self.initial.clone();
        for _ in 0..k {
            r = &self.generator * r;
        }
        r
    }

    /// `r(t0), r(t0+1), ..., r(t0+len-1)`.
    pub fn sequence(&self, len: usize) -> Vec<Vector> {
        let mut out = Vec::with_capacity(len);
        let mut r = self.initial.clone();
        for _ in 0..len {
            let next = &self.generator * &r;
            out.push(r);
            r = next;
        }
        out
    }
}

/// Recorded rollout. `states` and `references` hold one more entry than
/// `inputs`: `inputs[k]` drives `states[k]` to `states[k + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: i64,
    pub states: Vec<Vector>,
    pub references: Vec<Vector>,
    pub inputs: Vec<Vector>,
}

impl Trajectory {
    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn times(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.states.len()).map(move |k| self.t0 + k as i64)
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("trajectory always holds x0")
    }

    /// Checks the length invariant and that all vectors share dimensions.
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(LqtError::dim("Trajectory", "at least one state", 0));
        }
        if self.states.len() != self.inputs.len() + 1 {
            return Err(LqtError::dim("Trajectory inputs", self.states.len() - 1, self.inputs.len()));
        }
        if self.references.len() != self.states.len() {
            return Err(LqtError::dim("Trajectory references", self.states.len(), self.references.len()));
        }
        let n = self.states[0].len();
        if self.states.iter().chain(&self.references).any(|v| v.len() != n) {
            return Err(LqtError::dim("Trajectory state/reference length", n, "mixed"));
        }
        if let Some(first) = self.inputs.first() {
            let m = first.len();
            if self.inputs.iter().any(|u| u.len() != m) {
                return Err(LqtError::dim("Trajectory input length", m, "mixed"));
            }
        }
        Ok(())
    }

    /// Tracking error `x(k) - r(k)` for every recorded sample.
    pub fn errors(&self) -> impl Iterator<Item = Vector> + '_ {
        self.states.iter().zip(&self.references).map(|(x, r)| x - r)
    }
}

/// Rolls `sys` forward `steps` times from `x0` at time `t0`. The policy
/// receives `(t, x(t), r(t))` and returns `u(t)`.
pub fn simulate<P>(
    sys: &LinearSystem,
    reference: &ReferenceSignal,
    x0: &Vector,
    t0: i64,
    steps: usize,
    mut policy: P,
) -> Result<Trajectory>
where
    P: FnMut(i64, &Vector, &Vector) -> Vector,
{
    ensure_len("simulate: x0", x0, sys.state_dim())?;
    if reference.dim() != sys.state_dim() {
        return Err(LqtError::dim("simulate: reference", sys.state_dim(), reference.dim()));
    }
    let references = reference.sequence(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    states.push(x0.clone());
    for k in 0..steps {
        let x = &states[k];
        let u = policy(t0 + k as i64, x, &references[k]);
        if u.len() != sys.input_dim() {
            return Err(LqtError::dim("simulate: policy output", sys.input_dim(), u.len()));
        }
        let next = sys.step(x, &u)?;
        inputs.push(u);
        states.push(next);
    }
    Ok(Trajectory {
        t0,
        states,
        references,
        inputs,
    })
}

/// Tracking recast as regulation of `X = [x; r]`:
/// `X(t+1) = T X(t) + B1 u(t)` with stage cost `Xᵀ Q1 X + uᵀ R u`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    t: Matrix,
    b1: Matrix,
    q1: Matrix,
    n: usize,
    m: usize,
}

impl AugmentedSystem {
    pub fn transition(&self) -> &Matrix {
        &self.t
    }

    pub fn input(&self) -> &Matrix {
        &self.b1
    }

    pub fn weight(&self) -> &Matrix {
        &self.q1
    }

    /// Plant state dimension `n`; the augmented state has `2n` entries.
    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn augmented_dim(&self) -> usize {
        2 * self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn stack(&self, x: &Vector, r: &Vector) -> Result<Vector> {
        ensure_len("stack: x", x, self.n)?;
        ensure_len("stack: r", r, self.n)?;
        let mut out = Vector::zeros(2 * self.n);
        out.rows_mut(0, self.n).copy_from(x);
        out.rows_mut(self.n, self.n).copy_from(r);
        Ok(out)
    }

    pub fn step(&self, big_x: &Vector, u: &Vector) -> Result<Vector> {
        ensure_len("augmented step: X", big_x, 2 * self.n)?;
        ensure_len("augmented step: u", u, self.m)?;
        Ok(&self.t * big_x + &self.b1 * u)
    }
}

/// Builds `T = diag(A, F)`, `B1 = [B; 0]` and `Q1 = [[Q, -Q], [-Q, Q]]`.
pub fn augment(sys: &LinearSystem, reference: &ReferenceSignal, q: &Matrix) -> Result<AugmentedSystem> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if reference.dim() != n {
        return Err(LqtError::dim("augment: reference", n, reference.dim()));
    }
    ensure_square("augment: Q", q, n)?;
    ensure_symmetric("Q", q)?;

    let t = block_diag(sys.a(), reference.generator());
    let mut b1 = Matrix::zeros(2 * n, m);
    b1.view_mut((0, 0), (n, m)).copy_from(sys.b());
    let mut q1 = Matrix::zeros(2 * n, 2 * n);
    q1.view_mut((0, 0), (n, n)).copy_from(q);
    q1.view_mut((n, n), (n, n)).copy_from(q);
    q1.view_mut((0, n), (n, n)).copy_from(&(-q));
    q1.view_mut((n, 0), (n, n)).copy_from(&(-q));
    Ok(AugmentedSystem { t, b1, q1, n, m })
}

#[rustfmt::skip]
const BAAM_A: [f64; 36] = [
    0.992,  0.0018,  0.0,    0.0,    0.0,    0.0,
    0.0023, 0.9919,  0.0043, 0.0,    0.0,    0.0,
    0.0,   -0.0042,  1.0009, 0.0024, 0.0,    0.0,
    0.0,    0.0,     0.0013, 0.9979, 0.0,    0.0,
    0.0,    0.0,     0.0,    0.0,    0.9972, 0.0,
    0.0,    0.0,     0.0,    0.0,    0.0,    0.9953,
];

#[rustfmt::skip]
const BAAM_B: [f64; 42] = [
    1.0033, 0.0,    0.0,    0.0,    0.0,    0.0,    -0.2175,
    0.0,    1.0460, 0.0,    0.0,    0.0,    0.0,    -0.0788,
    0.0,    0.0,    1.0326, 0.0,    0.0,    0.0,    -0.0020,
    0.0,    0.0,    0.0,    0.4798, 0.0,    0.0,    -0.0669,
    0.0,    0.0,    0.0,    0.0,    0.8882, 0.0,     0.1273,
    0.0,    0.0,    0.0,    0.0,    0.0,    1.1699, -0.1792,
];

/// Six thermal cells, six heaters plus the screw motor.
pub const BAAM_STATES: usize = 6;
pub const BAAM_INPUTS: usize = 7;

/// Identified six-zone extruder temperature model (6 states, 7 inputs).
pub fn baam_model() -> LinearSystem {
    LinearSystem::new(
        Matrix::from_row_slice(BAAM_STATES, BAAM_STATES, &BAAM_A),
        Matrix::from_row_slice(BAAM_STATES, BAAM_INPUTS, &BAAM_B),
    )
    .expect("built-in model is well formed")
}

/// Constant set point of increasing zone temperatures, nozzle last.
pub fn baam_reference() -> ReferenceSignal {
    ReferenceSignal::constant(Vector::from_vec(vec![155.0, 160.0, 165.0, 170.0, 180.0, 190.0]))
        .expect("built-in reference is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use proptest::prelude::*;

    fn scalar(a: f64, b: f64) -> LinearSystem {
        LinearSystem::new(Matrix::from_element(1, 1, a), Matrix::from_element(1, 1, b)).unwrap()
    }

    #[test]
    fn step_of_zero_is_zero() {
        let sys = baam_model();
        let x = sys.step(&Vector::zeros(6), &Vector::zeros(7)).unwrap();
        assert_eq!(x, Vector::zeros(6));
    }

    #[test]
    fn step_scalar_sum() {
        let x = scalar(1.0, 1.0)
            .step(&Vector::from_element(1, 2.0), &Vector::from_element(1, 3.0))
            .unwrap();
        assert_eq!(x[0], 5.0);
    }

    #[test]
    fn step_baam_uniform_state() {
        let sys = baam_model();
        let x = sys.step(&Vector::from_element(6, 50.0), &Vector::zeros(7)).unwrap();
        // row 1 of A: 0.992 + 0.0018, times 50
        assert!((x[0] - 49.69).abs() < 1e-12);
        // rows 3 and 4 by hand
        assert!((x[2] - (-0.0042 + 1.0009 + 0.0024) * 50.0).abs() < 1e-12);
        assert!((x[3] - (0.0013 + 0.9979) * 50.0).abs() < 1e-12);
    }

    #[test]
    fn step_rejects_wrong_dimensions() {
        let sys = baam_model();
        assert!(matches!(
            sys.step(&Vector::zeros(5), &Vector::zeros(7)),
            Err(LqtError::Dimension { .. })
        ));
        assert!(sys.step(&Vector::zeros(6), &Vector::zeros(6)).is_err());
    }

    #[test]
    fn constructor_rejects_bad_shapes_and_nan() {
        assert!(LinearSystem::new(Matrix::zeros(2, 3), Matrix::zeros(2, 1)).is_err());
        assert!(LinearSystem::new(Matrix::zeros(2, 2), Matrix::zeros(3, 1)).is_err());
        assert!(LinearSystem::new(Matrix::zeros(0, 0), Matrix::zeros(0, 1)).is_err());
        assert!(LinearSystem::new(Matrix::from_element(1, 1, f64::NAN), Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn simulate_zero_steps_holds_only_x0() {
        let sys = scalar(0.5, 1.0);
        let r = ReferenceSignal::constant(Vector::zeros(1)).unwrap();
        let traj = simulate(&sys, &r, &Vector::from_element(1, 3.0), 0, 0, |_, _, _| Vector::zeros(1)).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert!(traj.inputs.is_empty());
        assert_eq!(traj.references.len(), 1);
        traj.validate().unwrap();
    }

    #[test]
    fn simulate_forgetful_plant() {
        let sys = scalar(0.0, 1.0);
        let r = ReferenceSignal::constant(Vector::zeros(1)).unwrap();
        let traj = simulate(&sys, &r, &Vector::from_element(1, 7.0), 0, 2, |_, _, _| {
            Vector::from_element(1, 1.0)
        })
        .unwrap();
        let xs: Vec<f64> = traj.states.iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![7.0, 1.0, 1.0]);
        assert_eq!(traj.times().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn simulate_rejects_wrong_policy_output() {
        let sys = baam_model();
        let err = simulate(&sys, &baam_reference(), &Vector::zeros(6), 0, 3, |_, _, _| Vector::zeros(6));
        assert!(matches!(err, Err(LqtError::Dimension { .. })));
    }

    #[test]
    fn simulate_is_deterministic() {
        let sys = baam_model();
        let k = crate::qlearning::stabilizing_gain();
        let run = || {
            simulate(&sys, &baam_reference(), &Vector::from_element(6, 50.0), 0, 50, |t, x, _| {
                -&k * x + Vector::from_element(7, (t as f64).sin())
            })
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn augment_scalar_blocks() {
        let sys = scalar(0.7, 2.0);
        let r = ReferenceSignal::constant(Vector::from_element(1, 1.0)).unwrap();
        let aug = augment(&sys, &r, &Matrix::identity(1, 1)).unwrap();
        assert_eq!(aug.transition(), &Matrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 1.0]));
        assert_eq!(aug.input(), &Matrix::from_row_slice(2, 1, &[2.0, 0.0]));
        assert_eq!(aug.weight(), &Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn augment_baam_structure() {
        let sys = baam_model();
        let aug = augment(&sys, &baam_reference(), &Matrix::identity(6, 6)).unwrap();
        let t = aug.transition();
        assert_eq!(t.shape(), (12, 12));
        assert_eq!(t.view((0, 0), (6, 6)).clone_owned(), *sys.a());
        assert_eq!(t.view((6, 6), (6, 6)).clone_owned(), Matrix::identity(6, 6));
        assert!(t.view((0, 6), (6, 6)).iter().all(|&v| v == 0.0));
        assert!(t.view((6, 0), (6, 6)).iter().all(|&v| v == 0.0));
        assert!(aug.input().view((6, 0), (6, 7)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn augmented_weight_eigenvalues() {
        // eigen-decomposition of [[1,-1],[-1,1]]: {0, 2}
        let sys = scalar(1.0, 1.0);
        let r = ReferenceSignal::constant(Vector::zeros(1)).unwrap();
        let aug = augment(&sys, &r, &Matrix::identity(1, 1)).unwrap();
        let mut ev: Vec<f64> = aug.weight().clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14);
        assert!((ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn augment_rejects_asymmetric_q() {
        let sys = baam_model();
        let mut q = Matrix::identity(6, 6);
        q[(0, 1)] = 0.5;
        assert!(matches!(
            augment(&sys, &baam_reference(), &q),
            Err(LqtError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn baam_constants_match_published_values() {
        let sys = baam_model();
        assert_eq!(sys.a()[(0, 0)], 0.992);
        assert_eq!(sys.a()[(2, 2)], 1.0009);
        assert_eq!(sys.b()[(3, 6)], -0.0669);
        assert_eq!(sys.b()[(5, 5)], 1.1699);
        let r = baam_reference();
        assert_eq!(r.initial()[0], 155.0);
        assert_eq!(r.initial()[5], 190.0);
        assert_eq!(r.generator() * r.initial(), *r.initial());
        assert_eq!(r.at(17), *r.initial());
    }

    #[test]
    fn reference_sequence_follows_generator() {
        let f = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let r = ReferenceSignal::new(f, Vector::from_vec(vec![1.0, 0.0])).unwrap();
        let seq = r.sequence(5);
        assert_eq!(seq[4], r.at(4));
        assert!(max_abs_diff(&Matrix::from_column_slice(2, 1, seq[4].as_slice()), &Matrix::from_column_slice(2, 1, &[1.0, 0.0])) < 1e-15);
    }

    fn small_system() -> impl Strategy<Value = (LinearSystem, ReferenceSignal, Matrix)> {
        (1usize..4, 1usize..3).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-2.0f64..2.0, n * n),
                prop::collection::vec(-2.0f64..2.0, n * m),
                prop::collection::vec(-2.0f64..2.0, n * n),
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-1.0f64..1.0, n * n),
            )
                .prop_map(move |(a, b, f, r0, g)| {
                    let sys = LinearSystem::new(
                        Matrix::from_row_slice(n, n, &a),
                        Matrix::from_row_slice(n, m, &b),
                    )
                    .unwrap();
                    let reference =
                        ReferenceSignal::new(Matrix::from_row_slice(n, n, &f), Vector::from_vec(r0)).unwrap();
                    let g = Matrix::from_row_slice(n, n, &g);
                    let q = &g * g.transpose();
                    (sys, reference, q)
                })
        })
    }

    proptest! {
        #[test]
        fn augmented_dynamics_match_plant_and_generator(
            (sys, reference, q) in small_system(),
            seed in prop::collection::vec(-3.0f64..3.0, 8),
        ) {
            let n = sys.state_dim();
            let m = sys.input_dim();
            let aug = augment(&sys, &reference, &q).unwrap();
            let x = Vector::from_iterator(n, seed.iter().copied().cycle().take(n));
            let r = Vector::from_iterator(n, seed.iter().rev().copied().cycle().take(n));
            let u = Vector::from_iterator(m, seed.iter().skip(1).copied().cycle().take(m));
            let next = aug.step(&aug.stack(&x, &r).unwrap(), &u).unwrap();
            let plant = sys.step(&x, &u).unwrap();
            let gen = reference.generator() * &r;
            for i in 0..n {
                prop_assert!((next[i] - plant[i]).abs() <= 1e-12 * (1.0 + plant[i].abs()));
                prop_assert!((next[n + i] - gen[i]).abs() <= 1e-12 * (1.0 + gen[i].abs()));
            }
        }

        #[test]
        fn augmented_weight_is_tracking_error_form(
            (sys, reference, q) in small_system(),
            seed in prop::collection::vec(-100.0f64..100.0, 8),
        ) {
            let n = sys.state_dim();
            let aug = augment(&sys, &reference, &q).unwrap();
            let x = Vector::from_iterator(n, seed.iter().copied().cycle().take(n));
            let r = Vector::from_iterator(n, seed.iter().rev().copied().cycle().take(n));
            let big = aug.stack(&x, &r).unwrap();
            let lhs = big.dot(&(aug.weight() * &big));
            let e = &x - &r;
            let rhs = e.dot(&(&q * &e));
            // cancellation in lhs scales with |X|^2 |Q|, not with the result
            let scale = big.norm_squared() * q.norm().max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(rhs.abs()).max(1.0));
        }
    }
}
