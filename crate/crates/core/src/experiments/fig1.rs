use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    build_graphs, draw_stream, mixing_matrix, Draw, ExperimentConfig, ExperimentKind, GraphFiles,
    GraphModel, MdRow, Mixing, Trial,
};
use crate::error::Result;
use crate::metrics::md_index;
use crate::separators::{grade_with, GraphSet, JdOptions};
use crate::sources::{gma_generate, mix_sources, GmaSpec, InnovationLaw};

/// GraDe with one, four and sixteen graphs under four graph error models.
///
/// Rows are ordered by model, then `gamma1` (W₁ only), `gamma2` (W₁..W₄) and
/// `gamma3` (W₁..W₄ plus the independent extra graphs).
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Vec<MdRow>> {
    let resolved = cfg.resolve(ExperimentKind::Fig1)?;
    let f = &cfg.fig1;
    let k = cfg.estimators.k;
    let jd = JdOptions { tol: cfg.estimators.jd_tol, max_sweeps: cfg.estimators.jd_max_sweeps };
    let files = GraphFiles::default();
    let mut rows = Vec::new();
    for (mi, &[eps1, eps2]) in f.perturbations.iter().enumerate() {
        let mut models = vec![GraphModel::Er { eps: f.er_eps }];
        models.extend((0..3).map(|_| GraphModel::Perturbed { base: 0, eps1, eps2 }));
        models.extend((0..f.extra_graphs).map(|_| GraphModel::Er { eps: f.er_eps }));
        for (ni, &n) in resolved.n.iter().enumerate() {
            let cell = mi * 16 + ni;
            log::info!("fig1 model {} N={n}: {} repetitions", mi + 1, resolved.reps);
            let per_rep: Vec<[Trial; 3]> = (0..resolved.reps)
                .into_par_iter()
                .map(|rep| {
                    let graphs =
                        build_graphs(&models, n, &files, |g| draw_stream(resolved.seed, rep, Draw::Graph, cell, g))?;
                    let sources = (0..4)
                        .map(|i| {
                            let spec = GmaSpec::gma1(Arc::clone(&graphs[i]), f.theta[i], InnovationLaw::Gaussian)?;
                            gma_generate(&spec, &mut draw_stream(resolved.seed, rep, Draw::Source, cell, i))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let omega = mixing_matrix(
                        &Mixing::RandomNormal,
                        4,
                        &mut draw_stream(resolved.seed, rep, Draw::Mixing, cell, 0),
                    );
                    let x = mix_sources(&omega, &sources).x;
                    let sets = [
                        GraphSet::from_graphs(&graphs[..1], k)?,
                        GraphSet::from_graphs(&graphs[..4], k)?,
                        GraphSet::from_graphs(&graphs, k)?,
                    ];
                    Ok(sets.map(|gs| {
                        let start = Instant::now();
                        let res = grade_with(&x, &gs, jd).and_then(|r| Ok((md_index(&r.gamma_hat, &omega)?, r.converged)));
                        let seconds = start.elapsed().as_secs_f64();
                        match res {
                            Ok((md, converged)) => Trial { md: Some(md), converged, seconds },
                            Err(e) => {
                                log::warn!("fig1 GraDe failed: {e}");
                                Trial { md: None, converged: false, seconds }
                            }
                        }
                    }))
                })
                .collect::<Result<_>>()?;
            let graph_counts = [1, 4, 4 + f.extra_graphs];
            for (ei, name) in ["gamma1", "gamma2", "gamma3"].iter().enumerate() {
                let trials: Vec<Trial> = per_rep.iter().map(|t| t[ei].clone()).collect();
                rows.push(MdRow::summarize(
                    format!("fig1-model{}", mi + 1),
                    resolved.seed,
                    name.to_string(),
                    format!(
                        "graphs={};k={k};jd_tol={};er_eps={};eps1={eps1};eps2={eps2}",
                        graph_counts[ei], cfg.estimators.jd_tol, f.er_eps
                    ),
                    n,
                    4,
                    &trials,
                    cfg.record_timing,
                ));
            }
        }
    }
    Ok(rows)
}
