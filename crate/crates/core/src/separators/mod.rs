//! Unmixing-matrix estimators: GraDe, JADE, squared symmetric FastICA, their
//! graph-aware composites, and the grid-search ML estimator for two sources.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{BssError, Result};
use crate::graphs::AdjacencyMatrix;

mod autocorr;
mod fastica;
mod jade;
mod ml;

pub use autocorr::{autocorrelation_set, composite_autocorrelation_set, graph_autocorrelation, graph_autocovariance};
pub use fastica::{
    fastica_sq, graph_fastica, tanh_nonlinearity, FastIcaOptions, Nonlinearity,
    GRAPH_FASTICA_LAMBDA,
};
pub use jade::{
    diagonal_energy, grade, grade_with, graph_jade, graph_jade_with, jade, jade_cumulants,
    jade_with, JdOptions, GRAPH_JADE_LAMBDA,
};
pub use ml::{ml_two_sources, MlInit, MlOptions};

/// Adjacency matrices with their maximal lags, defining the set of graph
/// shift operators `W_p^k`, `k = 1..=K_p`.
#[derive(Debug, Clone)]
pub struct GraphSet {
    entries: Vec<(Arc<AdjacencyMatrix>, u32)>,
}

impl GraphSet {
    pub fn new(entries: Vec<(Arc<AdjacencyMatrix>, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(BssError::param("graph set needs at least one adjacency matrix"));
        }
        if let Some((_, k)) = entries.iter().find(|(_, k)| *k == 0) {
            return Err(BssError::param(format!("max power K must be >= 1, got {k}")));
        }
        let n = entries[0].0.n();
        if entries.iter().any(|(w, _)| w.n() != n) {
            return Err(BssError::param("all graphs in a set must have the same node count"));
        }
        Ok(Self { entries })
    }

    /// One graph with lags `1..=k`.
    pub fn single(w: Arc<AdjacencyMatrix>, k: u32) -> Result<Self> {
        Self::new(vec![(w, k)])
    }

    /// Several graphs sharing the same max lag; repeated graphs are kept once.
    pub fn from_graphs(graphs: &[Arc<AdjacencyMatrix>], k: u32) -> Result<Self> {
        let mut entries: Vec<(Arc<AdjacencyMatrix>, u32)> = Vec::new();
        for g in graphs {
            if !entries.iter().any(|(e, _)| Arc::ptr_eq(e, g) || **e == **g) {
                entries.push((Arc::clone(g), k));
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(Arc<AdjacencyMatrix>, u32)] {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries[0].0.n()
    }

    /// Total number of matrices `Σ_p K_p`.
    pub fn matrix_count(&self) -> usize {
        self.entries.iter().map(|(_, k)| *k as usize).sum()
    }
}

/// Extra information reported by the estimators.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Degenerate FastICA rows restarted from a random direction.
    pub restarts: usize,
    /// Realized `λ f₁` at the estimate (composite methods).
    pub graph_term: Option<f64>,
    /// Realized `(1 − λ) f₂` at the estimate (composite methods).
    pub ica_term: Option<f64>,
    /// ML: per-source θ̂.
    pub theta_hat: Option<Vec<f64>>,
    /// ML: rotation angle φ̂.
    pub phi_hat: Option<f64>,
    /// Grid argmax hits on a boundary, one message per hit.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SeparationResult {
    /// `Γ̂ = Û Ŝ₀^{-1/2}`.
    pub gamma_hat: DMatrix<f64>,
    pub u_hat: DMatrix<f64>,
    /// `Ŝ₀^{-1/2}`.
    pub whitener: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl SeparationResult {
    pub(crate) fn assemble(
        u_hat: DMatrix<f64>,
        whitener: DMatrix<f64>,
        converged: bool,
        iterations: usize,
        objective_trace: Vec<f64>,
        diagnostics: Diagnostics,
    ) -> Self {
        let gamma_hat = &u_hat * &whitener;
        Self { gamma_hat, u_hat, whitener, converged, iterations, objective_trace, diagnostics }
    }

    /// Estimated sources `Γ̂ X`.
    pub fn sources(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gamma_hat * x
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(BssError::param(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(())
}

pub(crate) fn check_graphs(x: &DMatrix<f64>, graphs: &GraphSet) -> Result<()> {
    if graphs.n() != x.ncols() {
        return Err(BssError::param(format!(
            "graphs have {} nodes but data has {} columns",
            graphs.n(),
            x.ncols()
        )));
    }
    Ok(())
}
