//! Whitening, symmetric matrix square roots, Givens-rotation joint
//! approximate diagonalization and symmetric orthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{BssError, Result};

/// Relative eigenvalue floor below which a symmetric inverse square root is refused.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 200;

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `M^{-1/2}` of a symmetric positive definite matrix.
///
/// Fails with [`BssError::Whitening`] when the smallest eigenvalue is below
/// `EIGEN_FLOOR` times the largest.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetric_part(m));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let threshold = EIGEN_FLOOR * max.abs();
    if !(min > threshold) {
        return Err(BssError::Whitening { eigenvalue: min, threshold });
    }
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// `M^{1/2}` of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetric_part(m));
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Prewhitened data and the whitening matrix `Ŝ₀^{-1/2}`.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub x: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
}

/// Prewhitening with the sample covariance `Ŝ₀ = N⁻¹XXᵀ` (data assumed centred).
pub fn whiten(x: &DMatrix<f64>) -> Result<Whitened> {
    let n = x.ncols();
    if n == 0 || x.nrows() == 0 {
        return Err(BssError::param("cannot whiten an empty data matrix"));
    }
    if x.nrows() > n {
        return Err(BssError::param(format!(
            "more signals ({}) than nodes ({n})",
            x.nrows()
        )));
    }
    let s0 = (x * x.transpose()) / n as f64;
    let inv_sqrt = sym_inv_sqrt(&s0)?;
    Ok(Whitened { x: &inv_sqrt * x, inv_sqrt })
}

/// Outcome of [`joint_diagonalize`].
#[derive(Debug, Clone)]
pub struct JointDiagResult {
    /// Orthogonal `U` such that every `U Mᵢ Uᵀ` is as diagonal as possible.
    pub u: DMatrix<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Off-diagonal energy `Σᵢ ‖off(U Mᵢ Uᵀ)‖²`, first entry before any sweep.
    pub off_trace: Vec<f64>,
}

/// Sum of squared off-diagonal entries over the set.
pub fn off_diagonal_energy(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter()
        .map(|m| {
            let mut s = 0.0;
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    if i != j {
                        s += m[(i, j)] * m[(i, j)];
                    }
                }
            }
            s
        })
        .sum()
}

/// Joint approximate diagonalization by cyclic Givens (Jacobi) sweeps.
///
/// Each pair `(p, q)` is rotated by the closed-form angle maximizing the sum
/// of squared diagonal entries over the whole set. Starts from `U = I` and
/// stops when no rotation angle in a sweep exceeds `tol`; running out of
/// sweeps is reported through `converged = false`.
pub fn joint_diagonalize(
    mats: &[DMatrix<f64>],
    tol: f64,
    max_sweeps: usize,
) -> Result<JointDiagResult> {
    let first = mats
        .first()
        .ok_or_else(|| BssError::Contract("joint diagonalization of an empty set".into()))?;
    let p = first.nrows();
    for (idx, m) in mats.iter().enumerate() {
        if m.nrows() != p || m.ncols() != p {
            return Err(BssError::Contract(format!("matrix {idx} is not {p}x{p}")));
        }
        let scale = m.abs().max().max(1.0);
        if (m - m.transpose()).abs().max() > 1e-10 * scale {
            return Err(BssError::Contract(format!("matrix {idx} is not symmetric")));
        }
    }
    let mut a: Vec<DMatrix<f64>> = mats.iter().map(symmetric_part).collect();
    let mut v = DMatrix::<f64>::identity(p, p);
    let mut off_trace = vec![off_diagonal_energy(&a)];
    let mut sweeps = 0;
    let mut converged = p < 2;

    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for i in 0..p - 1 {
            for j in (i + 1)..p {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for m in &a {
                    let d = m[(i, i)] - m[(j, j)];
                    let o = m[(i, j)] + m[(j, i)];
                    g11 += d * d;
                    g12 += d * o;
                    g22 += o * o;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                if theta.abs() <= tol {
                    continue;
                }
                rotated = true;
                let (s, c) = theta.sin_cos();
                for m in a.iter_mut() {
                    for k in 0..p {
                        let (mi, mj) = (m[(i, k)], m[(j, k)]);
                        m[(i, k)] = c * mi + s * mj;
                        m[(j, k)] = -s * mi + c * mj;
                    }
                    for k in 0..p {
                        let (mi, mj) = (m[(k, i)], m[(k, j)]);
                        m[(k, i)] = c * mi + s * mj;
                        m[(k, j)] = -s * mi + c * mj;
                    }
                }
                for k in 0..p {
                    let (vi, vj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vi + s * vj;
                    v[(k, j)] = -s * vi + c * vj;
                }
            }
        }
        off_trace.push(off_diagonal_energy(&a));
        if !rotated {
            converged = true;
        }
    }
    Ok(JointDiagResult { u: v.transpose(), sweeps, converged, off_trace })
}

/// Joint diagonalization with defaults `tol = 1e-10`, 200 sweeps.
pub fn joint_diagonalize_default(mats: &[DMatrix<f64>]) -> Result<JointDiagResult> {
    joint_diagonalize(mats, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)
}

/// `(U Uᵀ)^{-1/2} U`, the orthogonal matrix nearest to `U`.
pub fn symmetric_orthogonalize(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !u.is_square() {
        return Err(BssError::param("symmetric orthogonalization needs a square matrix"));
    }
    let gram = u * u.transpose();
    match sym_inv_sqrt(&gram) {
        Ok(r) => Ok(r * u),
        Err(BssError::Whitening { eigenvalue, .. }) => {
            Err(BssError::RankDeficient(eigenvalue.max(0.0).sqrt()))
        }
        Err(e) => Err(e),
    }
}
