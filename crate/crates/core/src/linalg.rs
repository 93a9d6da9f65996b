//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{LqtError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrized(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest `|M[i,j] - M[j,i]|`.
pub fn max_asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub(crate) fn ensure_square(what: &'static str, m: &Matrix, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(LqtError::dim(
            what,
            format!("{n}x{n}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_shape(what: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(LqtError::dim(
            what,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub(crate) fn ensure_len(what: &'static str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(LqtError::dim(what, len, v.len()));
    }
    Ok(())
}

/// Relative asymmetry tolerance used when validating user-supplied weights.
const SYMMETRY_TOL: f64 = 1e-10;

pub(crate) fn ensure_symmetric(what: &'static str, m: &Matrix) -> Result<()> {
    let scale = max_abs(m).max(1.0);
    let asymmetry = max_asymmetry(m);
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(LqtError::NotSymmetric { what, asymmetry });
    }
    Ok(())
}

/// Solves `G X = rhs` for a symmetric positive definite `G` by Cholesky.
pub(crate) fn solve_spd(what: &'static str, g: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let chol = g.clone().cholesky().ok_or(LqtError::Singular { what })?;
    let x = chol.solve(rhs);
    if !all_finite(&x) {
        return Err(LqtError::Singular { what });
    }
    Ok(x)
}

/// Solves `G X = rhs` for a general square `G` by LU with partial pivoting.
pub(crate) fn solve_general(what: &'static str, g: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let x = g
        .clone()
        .lu()
        .solve(rhs)
        .ok_or(LqtError::Singular { what })?;
    if !all_finite(&x) {
        return Err(LqtError::Singular { what });
    }
    Ok(x)
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Matrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_of_rotation_is_one() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_radius(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrized_removes_asymmetry() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let s = symmetrized(&m);
        assert_eq!(max_asymmetry(&s), 0.0);
        assert_eq!(s[(0, 1)], 3.0);
    }

    #[test]
    fn block_diag_places_blocks() {
        let a = Matrix::from_element(1, 1, 2.0);
        let b = Matrix::identity(2, 2);
        let d = block_diag(&a, &b);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d[(2, 2)], 1.0);
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let g = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(solve_spd("g", &g, &Matrix::identity(2, 2)).is_err());
    }
}
