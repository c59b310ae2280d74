use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{grade, Diagnostics, GraphSet, SeparationResult};
use crate::error::{BssError, Result};
use crate::jointdiag::{sym_sqrt, symmetric_orthogonalize, whiten};
use crate::sources::Variance;
use crate::spectral::GraphSpectrum;

/// Starting point of the ML grid search.
#[derive(Debug, Clone)]
pub enum MlInit {
    /// GraDe with both graphs, lag 1.
    Grade,
    /// A supplied unmixing estimate `Γ̂₀`, e.g. `Ω⁻¹` for the oracle start.
    Supplied(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct MlOptions {
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// Multiplier of `log det C` in the log-likelihood (0.5 or 1.0).
    pub det_factor: f64,
    pub init: MlInit,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            theta_grid: (0..=120).map(|i| i as f64 * 0.005).collect(),
            phi_grid: (0..=720).map(|i| -PI / 2.0 + i as f64 * PI / 720.0).collect(),
            det_factor: 0.5,
            init: MlInit::Grade,
        }
    }
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

fn boundary_check(name: &str, idx: usize, grid: &[f64], warnings: &mut Vec<String>) {
    if grid.len() > 1 && (idx == 0 || idx == grid.len() - 1) {
        warnings.push(format!("{name} argmax {} lies on the grid boundary", grid[idx]));
    }
}

/// `θ̂ = argmax_θ L(z, θ, W)` over the grid.
fn fit_theta(spec: &GraphSpectrum, projected: &DVector<f64>, opts: &MlOptions) -> (usize, f64) {
    argmax(opts.theta_grid.iter().map(|&t| {
        spec.log_likelihood(projected, t, Variance::Normalized, opts.det_factor)
    }))
}

/// `A_ab = z_aᵀ C⁻¹ z_b` for both rows from projected coordinates.
fn quad_forms(spec: &GraphSpectrum, theta: f64, za: &DVector<f64>, zb: &DVector<f64>) -> [f64; 3] {
    let ev = spec.covariance_eigenvalues(theta, Variance::Normalized);
    let mut q = [0.0; 3];
    for i in 0..ev.len() {
        let w = 1.0 / ev[i];
        q[0] += za[i] * za[i] * w;
        q[1] += za[i] * zb[i] * w;
        q[2] += zb[i] * zb[i] * w;
    }
    q
}

/// Rotation `U(φ) = [[cos φ, −sin φ], [sin φ, cos φ]]`.
pub(crate) fn rotation(phi: f64) -> DMatrix<f64> {
    let (s, c) = phi.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// ML estimation of the unmixing matrix for two GMA(1) sources with
/// normalized variance, by grid search over `θ` and a rotation angle.
///
/// Single pass: initial estimate, per-source `θ̂`, then `φ̂` for the rotation
/// maximizing the summed likelihood at those `θ̂`. The GraDe start fixes the
/// rows only up to order, so both assignments of rows to graphs are scored
/// in the `θ` step and the better one is kept.
pub fn ml_two_sources(
    x: &DMatrix<f64>,
    w1: &GraphSpectrum,
    w2: &GraphSpectrum,
    opts: &MlOptions,
) -> Result<SeparationResult> {
    if x.nrows() != 2 {
        return Err(BssError::param(format!("ML estimator needs P = 2, got {}", x.nrows())));
    }
    if opts.theta_grid.is_empty() || opts.phi_grid.is_empty() {
        return Err(BssError::param("ML grids must be nonempty"));
    }
    if w1.n() != x.ncols() || w2.n() != x.ncols() {
        return Err(BssError::param("graph size does not match data"));
    }
    let wh = whiten(x)?;
    let u0 = match &opts.init {
        MlInit::Grade => {
            let gs = GraphSet::from_graphs(&[w1.graph().clone(), w2.graph().clone()], 1)?;
            grade(x, &gs)?.u_hat
        }
        MlInit::Supplied(g0) => {
            if g0.shape() != (2, 2) {
                return Err(BssError::param("initial unmixing matrix must be 2x2"));
            }
            let s0 = (x * x.transpose()) / x.ncols() as f64;
            symmetric_orthogonalize(&(g0 * sym_sqrt(&s0)))?
        }
    };

    let z = &u0 * &wh.x;
    let rows = [z.row(0).transpose(), z.row(1).transpose()];
    let p1 = [w1.project(&rows[0]), w1.project(&rows[1])];
    let p2 = [w2.project(&rows[0]), w2.project(&rows[1])];

    // step 2 for both row orders: row `a` follows W₁, row `b` follows W₂
    let mut best: Option<((usize, usize), usize, usize, f64)> = None;
    for (a, b) in [(0, 1), (1, 0)] {
        let (i1, l1) = fit_theta(w1, &p1[a], opts);
        let (i2, l2) = fit_theta(w2, &p2[b], opts);
        let total = l1 + l2;
        if total.is_finite() && best.as_ref().is_none_or(|bst| total > bst.3) {
            best = Some(((a, b), i1, i2, total));
        }
    }
    let ((a, b), i1, i2, _) = best.ok_or_else(|| {
        BssError::DegenerateModel("likelihood is -inf on the whole theta grid".into())
    })?;
    let (theta1, theta2) = (opts.theta_grid[i1], opts.theta_grid[i2]);
    let mut warnings = Vec::new();
    boundary_check("theta_1", i1, &opts.theta_grid, &mut warnings);
    boundary_check("theta_2", i2, &opts.theta_grid, &mut warnings);

    // step 3: rotation of (z_a, z_b) maximizing the summed likelihood
    let qa = quad_forms(w1, theta1, &p1[a], &p1[b]);
    let qb = quad_forms(w2, theta2, &p2[a], &p2[b]);
    let logdet = opts.det_factor
        * (w1.log_det(theta1, Variance::Normalized) + w2.log_det(theta2, Variance::Normalized));
    let loglik = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let q1 = c * c * qa[0] - 2.0 * c * s * qa[1] + s * s * qa[2];
        let q2 = s * s * qb[0] + 2.0 * c * s * qb[1] + c * c * qb[2];
        -0.5 * (q1 + q2) - logdet
    };
    let (iphi, best_ll) = argmax(opts.phi_grid.iter().map(|&phi| loglik(phi)));
    let phi = opts.phi_grid[iphi];
    boundary_check("phi", iphi, &opts.phi_grid, &mut warnings);

    let ordered = DMatrix::from_fn(2, 2, |i, j| u0[(if i == 0 { a } else { b }, j)]);
    let u_hat = rotation(phi) * ordered;
    let diagnostics = Diagnostics {
        theta_hat: Some(vec![theta1, theta2]),
        phi_hat: Some(phi),
        warnings,
        ..Diagnostics::default()
    };
    Ok(SeparationResult::assemble(u_hat, wh.inv_sqrt, true, 1, vec![loglik(0.0), best_ll], diagnostics))
}
