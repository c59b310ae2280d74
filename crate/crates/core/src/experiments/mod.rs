//! Seeded Monte Carlo experiments and CSV output.
//!
//! Every random quantity of repetition `r` comes from `rng::stream(seed, r, tag)`
//! with a tag naming what is drawn (graph, source, mixing matrix, estimator
//! seed) and in which cell, so results never depend on thread scheduling.
//! Repetitions run on the rayon pool and are collected in index order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{BssError, Result};
use crate::graphs::{erdos_renyi, geometric_graph, graph_error, sbm_two_block, AdjacencyMatrix};
use crate::metrics::{md_index, mean_se};
use crate::rng::{stream, BssRng};
use crate::separators::{
    fastica_sq, grade_with, graph_fastica, graph_jade_with, jade_with, ml_two_sources,
    tanh_nonlinearity, FastIcaOptions, GraphSet, JdOptions, MlInit, MlOptions, SeparationResult,
};
use crate::spectral::GraphSpectrum;

mod config;
mod fig1;
mod fig2;
mod fig3;
mod tools;

pub use config::{
    CustomSettings, EstimatorKind, EstimatorSettings, ExperimentConfig, ExperimentKind, Fig1Settings,
    Fig2Settings, Fig2Setup, Fig3Model, Fig3Settings, GraphModel, Grid, Mixing, Resolved,
    ScenarioTemplate, SourceTemplate,
};
pub use fig1::run_fig1;
pub use fig2::{crb_sweep, run_fig2, CrbRow, Fig2Row};
pub use fig3::{fig3_scenario, run_custom, run_fig3};
pub use tools::{gen_graph, read_matrix_csv, separate, write_matrix_csv, GraphKindArgs, Separation};

/// What a random stream is used for; part of the stream tag.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Draw {
    Graph = 1,
    Source = 2,
    Mixing = 3,
    Estimator = 4,
}

/// Stream for one draw of one repetition; `cell` separates scenarios and
/// node counts, `slot` separates graphs or sources within a cell.
pub(crate) fn draw_stream(seed: u64, rep: usize, what: Draw, cell: usize, slot: usize) -> BssRng {
    assert!(cell < 1 << 12 && slot < 1 << 8, "stream cell or slot out of range");
    let tag = ((what as u64) << 20) | ((cell as u64) << 8) | slot as u64;
    stream(seed, rep as u64, tag)
}

/// One row per (scenario, estimator, N) of an MD-index experiment.
#[derive(Debug, Clone, Serialize)]
pub struct MdRow {
    pub scenario: String,
    pub seed: u64,
    pub estimator: String,
    pub hyperparameters: String,
    pub n: usize,
    pub reps: usize,
    /// Mean of `N(P−1)D²` over successful repetitions.
    pub mean_scaled_md: f64,
    pub se_scaled_md: f64,
    pub mean_md: f64,
    pub nonconverged: usize,
    pub failures: usize,
    pub wall_clock_s: Option<f64>,
    /// Per-repetition `N(P−1)D²`; `None` where the estimator failed.
    #[serde(skip)]
    pub samples: Vec<Option<f64>>,
}

/// Outcome of one estimator in one repetition.
#[derive(Debug, Clone)]
pub(crate) struct Trial {
    pub md: Option<f64>,
    pub converged: bool,
    pub seconds: f64,
}

impl MdRow {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn summarize(
        scenario: String,
        seed: u64,
        estimator: String,
        hyperparameters: String,
        n: usize,
        p: usize,
        trials: &[Trial],
        record_timing: bool,
    ) -> Self {
        let scale = n as f64 * (p as f64 - 1.0);
        let samples: Vec<Option<f64>> = trials.iter().map(|t| t.md.map(|d| scale * d * d)).collect();
        let ok: Vec<f64> = samples.iter().flatten().copied().collect();
        let mds: Vec<f64> = trials.iter().filter_map(|t| t.md).collect();
        let (mean, se) = if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let e = mean_se(&ok);
            (e.mean, e.se)
        };
        MdRow {
            scenario,
            seed,
            estimator,
            hyperparameters,
            n,
            reps: trials.len(),
            mean_scaled_md: mean,
            se_scaled_md: se,
            mean_md: if mds.is_empty() { f64::NAN } else { mds.iter().sum::<f64>() / mds.len() as f64 },
            nonconverged: trials.iter().filter(|t| t.md.is_some() && !t.converged).count(),
            failures: trials.iter().filter(|t| t.md.is_none()).count(),
            wall_clock_s: record_timing.then(|| trials.iter().map(|t| t.seconds).sum()),
            samples,
        }
    }
}

/// Loads edge-list files once per experiment.
#[derive(Debug, Default)]
pub(crate) struct GraphFiles(HashMap<PathBuf, Arc<AdjacencyMatrix>>);

impl GraphFiles {
    pub fn preload(models: &[GraphModel]) -> Result<Self> {
        let mut map = HashMap::new();
        for m in models {
            if let GraphModel::File { path } = m {
                if !map.contains_key(path) {
                    map.insert(path.clone(), Arc::new(AdjacencyMatrix::load_edge_list(path)?));
                }
            }
        }
        Ok(Self(map))
    }
}

/// Draws the graphs of one repetition, each from its own stream.
pub(crate) fn build_graphs(
    models: &[GraphModel],
    n: usize,
    files: &GraphFiles,
    mut rng_for: impl FnMut(usize) -> BssRng,
) -> Result<Vec<Arc<AdjacencyMatrix>>> {
    let mut out: Vec<Arc<AdjacencyMatrix>> = Vec::with_capacity(models.len());
    for (i, m) in models.iter().enumerate() {
        let mut rng = rng_for(i);
        let g = match m {
            GraphModel::Er { eps } => erdos_renyi(n, *eps, &mut rng)?,
            GraphModel::Sbm { p_in, p_out } => sbm_two_block(n, *p_in, *p_out, &mut rng)?,
            GraphModel::Geometric { radius } => geometric_graph(n, *radius, &mut rng)?,
            GraphModel::Perturbed { base, eps1, eps2 } => graph_error(&out[*base], *eps1, *eps2, &mut rng)?,
            GraphModel::File { path } => {
                let g = files.0.get(path).expect("graph files are preloaded");
                if g.n() != n {
                    return Err(BssError::Config(format!(
                        "graph file {} has {} nodes, experiment uses {n}",
                        path.display(),
                        g.n()
                    )));
                }
                out.push(Arc::clone(g));
                continue;
            }
        };
        out.push(Arc::new(g));
    }
    Ok(out)
}

pub(crate) fn mixing_matrix(mixing: &Mixing, p: usize, rng: &mut BssRng) -> DMatrix<f64> {
    match mixing {
        Mixing::Identity => DMatrix::identity(p, p),
        Mixing::RandomNormal => DMatrix::from_fn(p, p, |_, _| rng.sample(StandardNormal)),
        Mixing::Fixed(rows) => DMatrix::from_fn(p, p, |i, j| rows[i][j]),
    }
}

/// Inputs an estimator may need beyond the data.
pub(crate) struct EstimatorInput<'a> {
    pub x: &'a DMatrix<f64>,
    pub graphs: &'a GraphSet,
    /// Spectra of the two source graphs, for the ML estimator.
    pub spectra: Option<(&'a GraphSpectrum, &'a GraphSpectrum)>,
    /// True mixing matrix, for the oracle-started ML estimator.
    pub omega: &'a DMatrix<f64>,
    pub fastica_seed: u64,
}

impl EstimatorSettings {
    fn jd(&self) -> JdOptions {
        JdOptions { tol: self.jd_tol, max_sweeps: self.jd_max_sweeps }
    }

    fn fastica(&self, lambda: f64, seed: u64) -> FastIcaOptions {
        FastIcaOptions {
            lambda,
            tol: self.fastica_tol,
            max_iter: self.fastica_max_iter,
            max_restarts: self.fastica_max_restarts,
            seed,
            init: None,
        }
    }

    pub fn ml_options(&self, init: MlInit) -> Result<MlOptions> {
        let steps = self.ml_phi_steps;
        let half = std::f64::consts::FRAC_PI_2;
        Ok(MlOptions {
            theta_grid: self.ml_theta_grid.points()?,
            phi_grid: (0..=steps).map(|i| -half + i as f64 * 2.0 * half / steps as f64).collect(),
            det_factor: self.ml_det_factor,
            init,
        })
    }

    /// Hyperparameters of `kind` as `key=value` pairs joined by `;`.
    pub fn describe(&self, kind: EstimatorKind) -> String {
        let g = &self.ml_theta_grid;
        let ml = |init: &str| {
            format!(
                "theta_grid={}:{}:{};phi_steps={};det_factor={};init={init}",
                g.start, g.step, g.stop, self.ml_phi_steps, self.ml_det_factor
            )
        };
        match kind {
            EstimatorKind::Grade => format!("k={};jd_tol={}", self.k, self.jd_tol),
            EstimatorKind::Jade => format!("jd_tol={}", self.jd_tol),
            EstimatorKind::FasticaSq => {
                format!("g=logcosh;tol={};max_iter={}", self.fastica_tol, self.fastica_max_iter)
            }
            EstimatorKind::GraphJade => {
                format!("lambda={};k={};jd_tol={}", self.graph_jade_lambda, self.k, self.jd_tol)
            }
            EstimatorKind::GraphFastica => format!(
                "lambda={};k={};g=logcosh;tol={};max_iter={}",
                self.graph_fastica_lambda, self.k, self.fastica_tol, self.fastica_max_iter
            ),
            EstimatorKind::Ml => ml("grade"),
            EstimatorKind::MlOracle => ml("truth"),
        }
    }

    pub(crate) fn run(&self, kind: EstimatorKind, input: &EstimatorInput) -> Result<SeparationResult> {
        let x = input.x;
        match kind {
            EstimatorKind::Grade => grade_with(x, input.graphs, self.jd()),
            EstimatorKind::Jade => jade_with(x, self.jd()),
            EstimatorKind::FasticaSq => {
                fastica_sq(x, &tanh_nonlinearity(), &self.fastica(0.0, input.fastica_seed))
            }
            EstimatorKind::GraphJade => graph_jade_with(x, input.graphs, self.graph_jade_lambda, self.jd()),
            EstimatorKind::GraphFastica => graph_fastica(
                x,
                input.graphs,
                &tanh_nonlinearity(),
                &self.fastica(self.graph_fastica_lambda, input.fastica_seed),
            ),
            EstimatorKind::Ml | EstimatorKind::MlOracle => {
                let (s1, s2) = input.spectra.ok_or_else(|| {
                    BssError::Config("the ML estimator needs exactly two sources".into())
                })?;
                let init = if kind == EstimatorKind::Ml {
                    MlInit::Grade
                } else {
                    let gamma = input.omega.clone().try_inverse().ok_or(BssError::RankDeficient(0.0))?;
                    MlInit::Supplied(gamma)
                };
                ml_two_sources(x, s1, s2, &self.ml_options(init)?)
            }
        }
    }

    /// Runs `kind` and scores it against `Ω`; errors become failed trials.
    pub(crate) fn trial(&self, kind: EstimatorKind, input: &EstimatorInput) -> (Trial, Option<SeparationResult>) {
        let start = Instant::now();
        let res = self.run(kind, input);
        let seconds = start.elapsed().as_secs_f64();
        match res.and_then(|r| Ok((md_index(&r.gamma_hat, input.omega)?, r))) {
            Ok((md, r)) => (Trial { md: Some(md), converged: r.converged, seconds }, Some(r)),
            Err(e) => {
                log::warn!("{} failed: {e}", kind.name());
                (Trial { md: None, converged: false, seconds }, None)
            }
        }
    }
}

/// Serializes rows as RFC 4180 CSV with a header line.
pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| BssError::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| BssError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv<R: Serialize>(rows: &[R], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, to_csv(rows)?)?;
    Ok(())
}

/// Runs the experiment `kind` and writes `<out>/<kind>.csv`; returns the path.
pub fn run_to_dir(kind: ExperimentKind, cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let path = out.join(format!("{}.csv", kind.name()));
    match kind {
        ExperimentKind::Fig1 => write_csv(&run_fig1(cfg)?, &path)?,
        ExperimentKind::Fig2 => write_csv(&run_fig2(cfg)?, &path)?,
        ExperimentKind::Fig3 => write_csv(&run_fig3(cfg)?, &path)?,
        ExperimentKind::CrbSweep => write_csv(&crb_sweep(cfg)?, &path)?,
        ExperimentKind::Custom => write_csv(&run_custom(cfg)?, &path)?,
    }
    Ok(path)
}
