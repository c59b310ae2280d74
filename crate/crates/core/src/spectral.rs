//! Eigenbasis evaluation of GMA(1) covariances.
//!
//! For symmetric `W = V Λ Vᵀ` the GMA(1) covariance is
//! `C(θ) = σ²(θ) V diag((1 + θλᵢ)²) Vᵀ`, so quadratic forms, log-determinants,
//! `ζ` and `κ` reduce to O(N) or O(N²) sums once `V` is known. The dense
//! routines in [`crate::crb`] remain the reference; these are the fast path
//! used by the likelihood grid search and the θ sweeps.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{BssError, Result};
use crate::graphs::AdjacencyMatrix;
use crate::sources::Variance;

/// `|1 + θλ|` below which the covariance is treated as singular.
const SINGULAR_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GraphSpectrum {
    graph: Arc<AdjacencyMatrix>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl GraphSpectrum {
    pub fn new(graph: Arc<AdjacencyMatrix>) -> Self {
        let eig = SymmetricEigen::new(graph.dense().clone());
        Self { graph, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors }
    }

    pub fn graph(&self) -> &Arc<AdjacencyMatrix> {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Coordinates `Vᵀz` of a signal in the eigenbasis.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(z)
    }

    /// `1 + θλᵢ` for every eigenvalue.
    fn factors(&self, theta: f64) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().map(move |l| 1.0 + theta * l)
    }

    pub fn is_singular(&self, theta: f64) -> bool {
        self.factors(theta).any(|f| f.abs() < SINGULAR_FACTOR)
    }

    /// `σ²(θ) = N / Σ(1 + θλᵢ)²`.
    pub fn normalized_sigma2(&self, theta: f64) -> f64 {
        self.n() as f64 / self.factors(theta).map(|f| f * f).sum::<f64>()
    }

    fn sigma2(&self, theta: f64, variance: Variance) -> f64 {
        match variance {
            Variance::Fixed(s) => s,
            Variance::Normalized => self.normalized_sigma2(theta),
        }
    }

    /// Eigenvalues of `C(θ)`.
    pub fn covariance_eigenvalues(&self, theta: f64, variance: Variance) -> DVector<f64> {
        let s2 = self.sigma2(theta, variance);
        DVector::from_iterator(self.n(), self.factors(theta).map(|f| s2 * f * f))
    }

    /// `log det C(θ)`.
    pub fn log_det(&self, theta: f64, variance: Variance) -> f64 {
        self.covariance_eigenvalues(theta, variance).iter().map(|c| c.ln()).sum()
    }

    /// Gaussian log-likelihood `−½ zᵀC⁻¹z − det_factor · log det C` from
    /// projected coordinates `Vᵀz`. Singular covariances give `−∞`.
    pub fn log_likelihood(
        &self,
        projected: &DVector<f64>,
        theta: f64,
        variance: Variance,
        det_factor: f64,
    ) -> f64 {
        if self.is_singular(theta) {
            return f64::NEG_INFINITY;
        }
        let ev = self.covariance_eigenvalues(theta, variance);
        let quad: f64 = projected.iter().zip(ev.iter()).map(|(z, c)| z * z / c).sum();
        let logdet: f64 = ev.iter().map(|c| c.ln()).sum();
        -0.5 * quad - det_factor * logdet
    }

    /// `ζ = 2N − 2 tr²(C⁻¹D) / tr((C⁻¹D)²)`, with `C⁻¹D` diagonal in the eigenbasis.
    pub fn zeta(&self, theta: f64, variance: Variance) -> Result<f64> {
        if self.is_singular(theta) {
            return Err(BssError::DegenerateModel(format!("I + {theta} W is singular")));
        }
        let n = self.n() as f64;
        // d log σ² / dθ
        let a = match variance {
            Variance::Fixed(_) => 0.0,
            Variance::Normalized => {
                let (num, den) = self
                    .factors(theta)
                    .zip(self.eigenvalues.iter())
                    .fold((0.0, 0.0), |(num, den), (f, l)| (num + 2.0 * l * f, den + f * f));
                -num / den
            }
        };
        let (s, t) = self
            .factors(theta)
            .zip(self.eigenvalues.iter())
            .map(|(f, l)| a + 2.0 * l / f)
            .fold((0.0, 0.0), |(s, t), d| (s + d, t + d * d));
        if t == 0.0 {
            return Ok(2.0 * n);
        }
        Ok(2.0 * n - 2.0 * s * s / t)
    }
}

/// Squared overlaps `(V_bᵀ V_a)∘²` between two eigenbases, or the identity
/// when both spectra belong to the same graph.
#[derive(Debug, Clone)]
pub enum SpectralOverlap {
    SameGraph,
    Mixed(DMatrix<f64>),
}

impl SpectralOverlap {
    pub fn new(a: &GraphSpectrum, b: &GraphSpectrum) -> Self {
        if Arc::ptr_eq(&a.graph, &b.graph) || *a.graph == *b.graph {
            SpectralOverlap::SameGraph
        } else {
            let m = b.eigenvectors.tr_mul(&a.eigenvectors);
            SpectralOverlap::Mixed(m.map(|v| v * v))
        }
    }
}

/// `(κ_{a,b}, κ_{b,a})` with `κ_{i,j} = tr(C_j⁻¹ C_i)`, for sources `a` and
/// `b` whose overlap was built as `SpectralOverlap::new(a, b)`.
pub fn kappa_pair(
    a: &GraphSpectrum,
    theta_a: f64,
    b: &GraphSpectrum,
    theta_b: f64,
    variance: Variance,
    overlap: &SpectralOverlap,
) -> (f64, f64) {
    let ca = a.covariance_eigenvalues(theta_a, variance);
    let cb = b.covariance_eigenvalues(theta_b, variance);
    match overlap {
        SpectralOverlap::SameGraph => {
            let kab = ca.iter().zip(cb.iter()).map(|(x, y)| x / y).sum();
            let kba = ca.iter().zip(cb.iter()).map(|(x, y)| y / x).sum();
            (kab, kba)
        }
        SpectralOverlap::Mixed(m) => {
            // m[(r, c)] = (v_b,r · v_a,c)²
            let inv_a = ca.map(|x| 1.0 / x);
            let inv_b = cb.map(|x| 1.0 / x);
            let kab = inv_b.dot(&(m * &ca));
            let kba = cb.dot(&(m * &inv_a));
            (kab, kba)
        }
    }
}
