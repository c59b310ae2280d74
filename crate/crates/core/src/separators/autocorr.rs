use nalgebra::DMatrix;

use super::GraphSet;
use crate::error::{BssError, Result};
use crate::graphs::AdjacencyMatrix;

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `X̃ W^k`, which is `(W^k X̃ᵀ)ᵀ` for symmetric `W`.
fn shifted(x: &DMatrix<f64>, w: &AdjacencyMatrix, k: u32) -> DMatrix<f64> {
    let mut y = x.clone();
    for _ in 0..k {
        y = w.right_multiply(&y);
    }
    y
}

/// Graph autocovariance `(N − k)⁻¹ X̃ W^k X̃ᵀ`, symmetrized.
pub fn graph_autocovariance(x: &DMatrix<f64>, w: &AdjacencyMatrix, k: u32) -> Result<DMatrix<f64>> {
    let n = x.ncols();
    if k as usize >= n {
        return Err(BssError::param(format!("lag {k} must be below N = {n}")));
    }
    let y = shifted(x, w, k);
    Ok(symmetrize(x * y.transpose()) / (n - k as usize) as f64)
}

fn autocorrelation_from_shift(x: &DMatrix<f64>, y: &DMatrix<f64>, k: u32) -> Result<DMatrix<f64>> {
    let denom = y.norm();
    if denom == 0.0 {
        return Err(BssError::DegenerateGraph(format!("W^{k} X̃ᵀ is zero")));
    }
    Ok(symmetrize(x * y.transpose()) * (x.nrows() as f64 / denom))
}

/// Graph autocorrelation `P X̃ W^k X̃ᵀ / ‖W^k X̃ᵀ‖_F`, symmetrized.
pub fn graph_autocorrelation(x: &DMatrix<f64>, w: &AdjacencyMatrix, k: u32) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(BssError::param("lag k must be >= 1"));
    }
    autocorrelation_from_shift(x, &shifted(x, w, k), k)
}

/// All `S̃_p^k` of a graph set, in entry order then lag order.
pub fn autocorrelation_set(x: &DMatrix<f64>, graphs: &GraphSet) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::with_capacity(graphs.matrix_count());
    for (w, kmax) in graphs.entries() {
        let mut y = x.clone();
        for k in 1..=*kmax {
            y = w.right_multiply(&y);
            out.push(autocorrelation_from_shift(x, &y, k)?);
        }
    }
    Ok(out)
}

/// Autocorrelation set divided by `‖X̃‖_F`, so that diagonal entries are
/// cosine-like and of order one. Used where the graph part is weighed against
/// a non-Gaussianity part; a common factor does not change GraDe itself.
pub fn composite_autocorrelation_set(x: &DMatrix<f64>, graphs: &GraphSet) -> Result<Vec<DMatrix<f64>>> {
    let scale = x.norm();
    Ok(autocorrelation_set(x, graphs)?.into_iter().map(|m| m / scale).collect())
}
