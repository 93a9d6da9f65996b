//! Infinite-horizon discounted tracking by policy iteration on the
//! augmented system.
//!
//! Each sweep evaluates the current gain exactly through the discounted
//! Lyapunov equation
//!
//! ```text
//! P = Q1 + KᵀRK + γ (T - B1 K)ᵀ P (T - B1 K)
//! ```
//!
//! and improves it with `K ← (R + γ B1ᵀ P B1)⁻¹ γ B1ᵀ P T`. The policy is
//! `u = -K X` throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{LqtError, Result};
use crate::linalg::{
    ensure_shape, ensure_square, ensure_symmetric, max_abs_diff, solve_general, solve_spd,
    spectral_radius, symmetrized, Matrix, Vector,
};
use crate::state_space::{simulate, AugmentedSystem, LinearSystem, ReferenceSignal, Trajectory};

#[derive(Debug, Clone)]
pub struct StationarySolution {
    /// Value kernel (unscaled: `V(X) = Xᵀ P X`).
    pub p: Matrix,
    /// Feedback gain on the augmented state, `u = -K X`.
    pub k: Matrix,
    pub gamma: f64,
    pub iterations: usize,
    /// Max-abs change of the gain on the final sweep.
    pub last_change: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(LqtError::InvalidParameter {
            name: "gamma",
            reason: format!("{gamma} is outside (0, 1]"),
        });
    }
    Ok(())
}

fn check_problem(aug: &AugmentedSystem, r: &Matrix, gamma: f64) -> Result<()> {
    check_gamma(gamma)?;
    ensure_square("R", r, aug.input_dim())?;
    ensure_symmetric("R", r)?;
    Ok(())
}

/// Closed-loop matrix `T - B1 K`.
pub fn closed_loop(aug: &AugmentedSystem, k: &Matrix) -> Matrix {
    aug.transition() - aug.input() * k
}

/// Spectral radius of `sqrt(γ) (T - B1 K)`.
pub fn discounted_radius(aug: &AugmentedSystem, k: &Matrix, gamma: f64) -> f64 {
    gamma.sqrt() * spectral_radius(&closed_loop(aug, k))
}

/// Cost kernel of the fixed policy `u = -K X`, solved directly from the
/// vectorized Lyapunov equation `(I - γ Mᵀ⊗Mᵀ) vec(P) = vec(Q1 + KᵀRK)`.
pub fn solve_lyapunov(aug: &AugmentedSystem, r: &Matrix, k: &Matrix, gamma: f64) -> Result<Matrix> {
    check_problem(aug, r, gamma)?;
    let dim = aug.augmented_dim();
    ensure_shape("solve_lyapunov: K", k, aug.input_dim(), dim)?;
    let radius = discounted_radius(aug, k, gamma);
    if radius.is_nan() || radius >= 1.0 {
        return Err(LqtError::NotStabilizing { spectral_radius: radius });
    }
    let m = closed_loop(aug, k);
    let mt = m.transpose();
    let system = Matrix::identity(dim * dim, dim * dim) - mt.kronecker(&mt) * gamma;
    let rhs = aug.weight() + k.transpose() * r * k;
    let vec_rhs = Matrix::from_column_slice(dim * dim, 1, rhs.as_slice());
    let vec_p = solve_general("I - γ Mᵀ⊗Mᵀ", &system, &vec_rhs)?;
    Ok(symmetrized(&Matrix::from_column_slice(dim, dim, vec_p.as_slice())))
}

/// Greedy gain `(R + γ B1ᵀ P B1)⁻¹ γ B1ᵀ P T` for a value kernel `P`.
pub fn gain_from_value(aug: &AugmentedSystem, r: &Matrix, gamma: f64, p: &Matrix) -> Result<Matrix> {
    check_problem(aug, r, gamma)?;
    ensure_square("P", p, aug.augmented_dim())?;
    let b1 = aug.input();
    let b1t_p = b1.transpose() * p;
    let gram = r + &b1t_p * b1 * gamma;
    let rhs = &b1t_p * aug.transition() * gamma;
    solve_spd("R + γB1ᵀPB1", &gram, &rhs)
}

/// Frobenius norm of
/// `Q1 - P + γTᵀPT - γ²TᵀPB1 (R + γB1ᵀPB1)⁻¹ B1ᵀPT`.
pub fn are_residual(aug: &AugmentedSystem, r: &Matrix, gamma: f64, p: &Matrix) -> Result<f64> {
    check_problem(aug, r, gamma)?;
    ensure_square("P", p, aug.augmented_dim())?;
    ensure_symmetric("P", p)?;
    let t = aug.transition();
    let b1 = aug.input();
    let tt = t.transpose();
    let b1t_p_t = b1.transpose() * p * t;
    let gram = r + b1.transpose() * p * b1 * gamma;
    let inner = solve_spd("R + γB1ᵀPB1", &gram, &b1t_p_t)?;
    let residual = aug.weight() - p + &tt * p * t * gamma - b1t_p_t.transpose() * inner * (gamma * gamma);
    Ok(residual.norm())
}

/// Residual `Q1 + KᵀRK + γMᵀPM - P` of the Lyapunov equation.
pub fn lyapunov_residual(aug: &AugmentedSystem, r: &Matrix, k: &Matrix, gamma: f64, p: &Matrix) -> f64 {
    let m = closed_loop(aug, k);
    (aug.weight() + k.transpose() * r * k + m.transpose() * p * &m * gamma - p).norm()
}

/// Runs policy iteration from `k0` until the max-abs gain change is at most
/// `eps`.
pub fn policy_iteration(
    aug: &AugmentedSystem,
    r: &Matrix,
    gamma: f64,
    k0: &Matrix,
    eps: f64,
    max_iter: usize,
) -> Result<StationarySolution> {
    check_problem(aug, r, gamma)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(LqtError::InvalidParameter {
            name: "epsilon",
            reason: format!("{eps} must be positive"),
        });
    }
    if max_iter == 0 {
        return Err(LqtError::InvalidParameter {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }
    ensure_shape("policy_iteration: K0", k0, aug.input_dim(), aug.augmented_dim())?;

    let mut k = k0.clone();
    let mut p = Matrix::zeros(aug.augmented_dim(), aug.augmented_dim());
    let mut change = f64::INFINITY;
    for j in 1..=max_iter {
        p = solve_lyapunov(aug, r, &k, gamma)?;
        let next = gain_from_value(aug, r, gamma, &p)?;
        change = max_abs_diff(&next, &k);
        k = next;
        if change <= eps {
            return Ok(StationarySolution {
                p,
                k,
                gamma,
                iterations: j,
                last_change: change,
            });
        }
    }
    Err(LqtError::NoConvergence {
        iterations: max_iter,
        last_change: change,
        last_gain: Box::new(k),
        last_value: Box::new(p),
    })
}

/// How the initial gain was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialGainSource {
    /// Random draw accepted on the given attempt (1-based) at `scale`.
    Sampled { attempt: usize, scale: f64 },
    /// Every draw was rejected and `K0 = 0` stabilizes.
    Zero,
}

/// Random initial-gain recipe: entries `~ N(0, std²)`, redrawn at a
/// geometrically shrinking scale until `sqrt(γ)(T - B1 K0)` is stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGainConfig {
    pub std_dev: f64,
    pub shrink: f64,
    pub max_attempts: usize,
}

impl Default for InitialGainConfig {
    fn default() -> Self {
        Self {
            std_dev: 10.0,
            shrink: 0.5,
            max_attempts: 100,
        }
    }
}

pub fn initial_gain<R: Rng + ?Sized>(
    aug: &AugmentedSystem,
    gamma: f64,
    config: &InitialGainConfig,
    rng: &mut R,
) -> Result<(Matrix, InitialGainSource)> {
    check_gamma(gamma)?;
    if !(config.std_dev >= 0.0 && config.shrink > 0.0 && config.shrink <= 1.0) {
        return Err(LqtError::InvalidParameter {
            name: "initial gain",
            reason: "std_dev must be >= 0 and shrink in (0, 1]".into(),
        });
    }
    let (m, dim) = (aug.input_dim(), aug.augmented_dim());
    let mut scale = config.std_dev;
    for attempt in 1..=config.max_attempts {
        let normal = Normal::new(0.0, scale).map_err(|e| LqtError::InvalidParameter {
            name: "initial gain",
            reason: e.to_string(),
        })?;
        // row-major fill so the draw order is independent of storage order
        let mut k = Matrix::zeros(m, dim);
        for i in 0..m {
            for j in 0..dim {
                k[(i, j)] = normal.sample(rng);
            }
        }
        if discounted_radius(aug, &k, gamma) < 1.0 {
            return Ok((k, InitialGainSource::Sampled { attempt, scale }));
        }
        scale *= config.shrink;
    }
    let zero = Matrix::zeros(m, dim);
    let radius = discounted_radius(aug, &zero, gamma);
    if radius < 1.0 {
        Ok((zero, InitialGainSource::Zero))
    } else {
        Err(LqtError::NotStabilizing { spectral_radius: radius })
    }
}

/// ChaCha20 stream used for initial-gain draws; probing noise uses stream 0
/// of the same seed.
pub const INITIAL_GAIN_STREAM: u64 = 1;

/// [`initial_gain`] driven by ChaCha20 seeded with `seed` on
/// [`INITIAL_GAIN_STREAM`].
pub fn seeded_initial_gain(
    aug: &AugmentedSystem,
    gamma: f64,
    config: &InitialGainConfig,
    seed: u64,
) -> Result<(Matrix, InitialGainSource)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(INITIAL_GAIN_STREAM);
    initial_gain(aug, gamma, config, &mut rng)
}

/// Stationary policy `u = -K X`.
pub fn controller_from(sol: &StationarySolution) -> impl Fn(i64, &Vector) -> Vector + '_ {
    move |_, big_x| -(&sol.k * big_x)
}

/// Closed-loop rollout of `u = -K [x; r]` on the plant.
pub fn simulate_with_gain(
    sys: &LinearSystem,
    reference: &ReferenceSignal,
    k: &Matrix,
    x0: &Vector,
    steps: usize,
) -> Result<Trajectory> {
    let n = sys.state_dim();
    ensure_shape("simulate_with_gain: K", k, sys.input_dim(), 2 * n)?;
    simulate(sys, reference, x0, 0, steps, |_, x, r| {
        -(k.columns(0, n) * x + k.columns(n, n) * r)
    })
}
