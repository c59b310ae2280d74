//! Standalone graph generation and separation of data files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EstimatorInput, EstimatorKind, EstimatorSettings};
use crate::error::{BssError, Result};
use crate::graphs::{erdos_renyi, geometric_graph, sbm_two_block, AdjacencyMatrix};
use crate::metrics::md_index;
use crate::rng::seeded;
use crate::separators::GraphSet;
use crate::spectral::GraphSpectrum;

/// Random graph model and size for `gen-graph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKindArgs {
    Er { n: usize, eps: f64 },
    Sbm { n: usize, p_in: f64, p_out: f64 },
    Geometric { n: usize, radius: f64 },
}

/// Draws a graph from `kind` with `seed` and writes its edge list to `out`.
pub fn gen_graph(kind: &GraphKindArgs, seed: u64, out: &Path) -> Result<AdjacencyMatrix> {
    let mut rng = seeded(seed);
    let g = match *kind {
        GraphKindArgs::Er { n, eps } => erdos_renyi(n, eps, &mut rng)?,
        GraphKindArgs::Sbm { n, p_in, p_out } => sbm_two_block(n, p_in, p_out, &mut rng)?,
        GraphKindArgs::Geometric { n, radius } => geometric_graph(n, radius, &mut rng)?,
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    g.save_edge_list(out)?;
    Ok(g)
}

/// Reads a headerless numeric CSV as a matrix, one CSV row per matrix row.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| BssError::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| BssError::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    BssError::Config(format!("{}: row {}: not a number: {v:?}", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(BssError::Config(format!("{}: row {} has {} columns", path.display(), line + 1, row.len())));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(BssError::Config(format!("{}: no data", path.display())));
    }
    let cols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(|e| BssError::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| BssError::Config(format!("csv: {e}")))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Result of separating one data file.
#[derive(Debug, Clone)]
pub struct Separation {
    pub gamma_hat: DMatrix<f64>,
    pub converged: bool,
    /// MD index against the true mixing matrix, when one was given.
    pub md: Option<f64>,
}

/// Separates the `P × N` signal matrix in `data` (one row per signal, one
/// column per node) with `estimator`.
///
/// The graphs are edge-list files; ML needs one graph per signal and takes
/// them in signal order. `truth` is a `P × P` mixing matrix file.
pub fn separate(
    data: &Path,
    estimator: EstimatorKind,
    graphs: &[PathBuf],
    settings: &EstimatorSettings,
    truth: Option<&Path>,
    seed: u64,
) -> Result<Separation> {
    settings.validate()?;
    let x = read_matrix_csv(data)?;
    let (p, n) = x.shape();
    let loaded = graphs
        .iter()
        .map(|g| {
            let w = AdjacencyMatrix::load_edge_list(g)?;
            if w.n() != n {
                return Err(BssError::Config(format!("{} has {} nodes, data has {n}", g.display(), w.n())));
            }
            Ok(Arc::new(w))
        })
        .collect::<Result<Vec<_>>>()?;
    let needs_graphs = !matches!(estimator, EstimatorKind::Jade | EstimatorKind::FasticaSq);
    if needs_graphs && loaded.is_empty() {
        return Err(BssError::Config(format!("{} needs at least one graph", estimator.name())));
    }
    let omega = match truth {
        Some(path) => {
            let o = read_matrix_csv(path)?;
            if o.shape() != (p, p) {
                return Err(BssError::Config(format!("truth must be {p}x{p}")));
            }
            o
        }
        None if estimator == EstimatorKind::MlOracle => {
            return Err(BssError::Config("ml_oracle needs the true mixing matrix".into()))
        }
        None => DMatrix::identity(p, p),
    };
    let spectra = if matches!(estimator, EstimatorKind::Ml | EstimatorKind::MlOracle) {
        if p != 2 || loaded.len() != 2 {
            return Err(BssError::Config("ML needs two signals and two graphs".into()));
        }
        Some((GraphSpectrum::new(Arc::clone(&loaded[0])), GraphSpectrum::new(Arc::clone(&loaded[1]))))
    } else {
        None
    };
    let graph_set = if loaded.is_empty() {
        GraphSet::from_graphs(&[Arc::new(AdjacencyMatrix::empty(n)?)], settings.k)?
    } else {
        GraphSet::from_graphs(&loaded, settings.k)?
    };
    let input = EstimatorInput {
        x: &x,
        graphs: &graph_set,
        spectra: spectra.as_ref().map(|(a, b)| (a, b)),
        omega: &omega,
        fastica_seed: seed,
    };
    let result = settings.run(estimator, &input)?;
    let md = truth.map(|_| md_index(&result.gamma_hat, &omega)).transpose()?;
    Ok(Separation { gamma_hat: result.gamma_hat, converged: result.converged, md })
}
