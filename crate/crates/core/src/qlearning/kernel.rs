//! Quadratic Q-function kernels `Q(X, u) = zᵀ H z` with `z = [X; u]`.

use crate::error::{LqtError, Result};
use crate::linalg::{ensure_square, solve_general, Matrix, Vector};
use crate::state_space::AugmentedSystem;

/// Symmetric kernel over the joint vector `[X; u]`, `X` of length
/// `state_dim` (the augmented state) and `u` of length `input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    h: Matrix,
    state_dim: usize,
    input_dim: usize,
}

impl KernelMatrix {
    pub fn new(h: Matrix, state_dim: usize, input_dim: usize) -> Result<Self> {
        ensure_square("kernel", &h, state_dim + input_dim)?;
        if !h.iter().all(|v| v.is_finite()) {
            return Err(LqtError::NonFinite { what: "kernel" });
        }
        Ok(Self { h, state_dim, input_dim })
    }

    pub fn identity(state_dim: usize, input_dim: usize) -> Self {
        let d = state_dim + input_dim;
        Self {
            h: Matrix::identity(d, d),
            state_dim,
            input_dim,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h
    }

    pub fn into_matrix(self) -> Matrix {
        self.h
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn dim(&self) -> usize {
        self.state_dim + self.input_dim
    }

    pub fn xx(&self) -> Matrix {
        self.h.view((0, 0), (self.state_dim, self.state_dim)).clone_owned()
    }

    pub fn xu(&self) -> Matrix {
        self.h.view((0, self.state_dim), (self.state_dim, self.input_dim)).clone_owned()
    }

    pub fn ux(&self) -> Matrix {
        self.h.view((self.state_dim, 0), (self.input_dim, self.state_dim)).clone_owned()
    }

    pub fn uu(&self) -> Matrix {
        self.h.view((self.state_dim, self.state_dim), (self.input_dim, self.input_dim)).clone_owned()
    }

    /// Greedy gain `K̂ = H_uu⁻¹ H_uX`, so that `u = -K̂ X` minimises `Q(X, ·)`.
    pub fn gain(&self) -> Result<Matrix> {
        gain_from_kernel(self)
    }

    /// `zᵀ H z`.
    pub fn evaluate(&self, z: &Vector) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(LqtError::dim("kernel evaluate", self.dim(), z.len()));
        }
        Ok(z.dot(&(&self.h * z)))
    }
}

/// Row vector `zᵀ ⊗ zᵀ`, so that `kron_row(z) · vec(H) = zᵀ H z` with `vec`
/// stacking columns.
pub fn kron_row(z: &Vector) -> Vector {
    let d = z.len();
    let mut out = Vector::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            out[j * d + i] = z[i] * z[j];
        }
    }
    out
}

pub fn gain_from_kernel(h: &KernelMatrix) -> Result<Matrix> {
    solve_general("H_uu", &h.uu(), &h.ux())
}

/// Kernel implied by a model and a value matrix `P`:
/// `[[Q1 + γTᵀPT, γTᵀPB1], [γB1ᵀPT, R + γB1ᵀPB1]]`.
pub fn model_kernel(aug: &AugmentedSystem, r: &Matrix, gamma: f64, p: &Matrix) -> Result<KernelMatrix> {
    let (nx, m) = (aug.augmented_dim(), aug.input_dim());
    ensure_square("model_kernel: P", p, nx)?;
    ensure_square("model_kernel: R", r, m)?;
    let t = aug.transition();
    let b1 = aug.input();
    let tt_p = t.transpose() * p;
    let mut h = Matrix::zeros(nx + m, nx + m);
    h.view_mut((0, 0), (nx, nx)).copy_from(&(aug.weight() + &tt_p * t * gamma));
    let xu = &tt_p * b1 * gamma;
    h.view_mut((0, nx), (nx, m)).copy_from(&xu);
    h.view_mut((nx, 0), (m, nx)).copy_from(&xu.transpose());
    h.view_mut((nx, nx), (m, m)).copy_from(&(r + b1.transpose() * p * b1 * gamma));
    KernelMatrix::new(h, nx, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infinite_lqt::policy_iteration;
    use crate::state_space::{augment, baam_model, baam_reference};
    use proptest::prelude::*;

    #[test]
    fn kron_row_small_cases() {
        let z = Vector::from_vec(vec![1.0, 2.0]);
        assert_eq!(kron_row(&z).as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(kron_row(&Vector::zeros(3)), Vector::zeros(9));
    }

    proptest! {
        #[test]
        fn kron_row_reproduces_quadratic_form(
            zs in proptest::collection::vec(-5.0f64..5.0, 4),
            hs in proptest::collection::vec(-3.0f64..3.0, 16),
            scale in 0.1f64..10.0,
        ) {
            let z = Vector::from_vec(zs);
            let h = Matrix::from_column_slice(4, 4, &hs);
            let lhs = kron_row(&z).dot(&Vector::from_column_slice(h.as_slice()));
            let rhs = z.dot(&(&h * &z));
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));

            let hs = (&h + h.transpose()) * 0.5 + Matrix::identity(4, 4) * 20.0;
            let k = gain_from_kernel(&KernelMatrix::new(hs.clone(), 2, 2).unwrap()).unwrap();
            let k_scaled = gain_from_kernel(&KernelMatrix::new(hs * scale, 2, 2).unwrap()).unwrap();
            prop_assert!((k - k_scaled).amax() < 1e-12);
        }
    }

    #[test]
    fn identity_kernel_has_zero_gain() {
        let k = KernelMatrix::identity(12, 7).gain().unwrap();
        assert_eq!(k.shape(), (7, 12));
        assert_eq!(k.amax(), 0.0);
    }

    #[test]
    fn singular_input_block_is_reported() {
        let h = KernelMatrix::new(Matrix::zeros(3, 3), 2, 1).unwrap();
        assert!(matches!(h.gain(), Err(LqtError::Singular { .. })));
    }

    #[test]
    fn model_kernel_recovers_policy_iteration_gain() {
        let aug = augment(&baam_model(), &baam_reference(), &Matrix::identity(6, 6)).unwrap();
        let r = Matrix::identity(7, 7);
        let k0 = Matrix::zeros(7, 12);
        let sol = policy_iteration(&aug, &r, 0.99, &k0, 1e-12, 200).unwrap();
        let h = model_kernel(&aug, &r, 0.99, &sol.p).unwrap();
        assert!((&h.matrix().transpose() - h.matrix()).amax() < 1e-9);
        let k = h.gain().unwrap();
        assert!((k - &sol.k).amax() < 1e-9);
    }
}
