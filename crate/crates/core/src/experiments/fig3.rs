use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;

use super::{
    build_graphs, draw_stream, mixing_matrix, Draw, EstimatorInput, EstimatorKind, ExperimentConfig,
    ExperimentKind, Fig3Model, GraphFiles, GraphModel, MdRow, Mixing, ScenarioTemplate, SourceTemplate,
    Trial,
};
use crate::error::Result;
use crate::separators::GraphSet;
use crate::sources::{gma_generate, mix_sources, GmaSpec, InnovationLaw, Scenario};
use crate::spectral::GraphSpectrum;

/// Four-source scenario of the combined-method comparison.
pub fn fig3_scenario(model: Fig3Model, er_eps: f64) -> ScenarioTemplate {
    use InnovationLaw::*;
    let t = |df: f64| StudentT { df };
    let (id, shared, theta, laws): (&str, bool, [f64; 4], [InnovationLaw; 4]) = match model {
        Fig3Model::M1 => ("M1", true, [0.02, 0.04, 0.06, 0.08], [t(5.0), t(10.0), t(15.0), Gaussian]),
        Fig3Model::M2 => ("M2", true, [0.05, 0.06, 0.07, 0.08], [t(5.0), Uniform, Exponential, Gaussian]),
        Fig3Model::M3 => ("M3", false, [0.05; 4], [t(15.0); 4]),
        Fig3Model::M4 => ("M4", true, [0.04, 0.04, 0.08, 0.08], [t(15.0), Gaussian, Uniform, Gaussian]),
    };
    let graphs = vec![GraphModel::Er { eps: er_eps }; if shared { 1 } else { 4 }];
    let sources = (0..4)
        .map(|i| SourceTemplate { graph: if shared { 0 } else { i }, theta: theta[i], innovation: laws[i] })
        .collect();
    ScenarioTemplate { id: format!("fig3-{id}"), graphs, sources, mixing: Mixing::RandomNormal }
}

/// Per-repetition data of a scenario template, ready for the estimators.
struct Replicate {
    x: nalgebra::DMatrix<f64>,
    omega: nalgebra::DMatrix<f64>,
    graph_set: GraphSet,
    spectra: Option<(GraphSpectrum, GraphSpectrum)>,
    fastica_seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn replicate(
    template: &ScenarioTemplate,
    n: usize,
    k: u32,
    files: &GraphFiles,
    seed: u64,
    rep: usize,
    cell: usize,
    want_spectra: bool,
) -> Result<Replicate> {
    let graphs = build_graphs(&template.graphs, n, files, |g| draw_stream(seed, rep, Draw::Graph, cell, g))?;
    let p = template.sources.len();
    let specs = template
        .sources
        .iter()
        .map(|s| GmaSpec::gma1(Arc::clone(&graphs[s.graph]), s.theta, s.innovation))
        .collect::<Result<Vec<_>>>()?;
    let rows = specs
        .iter()
        .enumerate()
        .map(|(i, spec)| gma_generate(spec, &mut draw_stream(seed, rep, Draw::Source, cell, i)))
        .collect::<Result<Vec<_>>>()?;
    let omega = mixing_matrix(&template.mixing, p, &mut draw_stream(seed, rep, Draw::Mixing, cell, 0));
    // checks that Ω is invertible
    Scenario::new(specs, omega.clone())?;
    let x = mix_sources(&omega, &rows).x;
    let used: Vec<_> = template.sources.iter().map(|s| Arc::clone(&graphs[s.graph])).collect();
    let graph_set = GraphSet::from_graphs(&used, k)?;
    let spectra = (want_spectra && p == 2)
        .then(|| (GraphSpectrum::new(Arc::clone(&used[0])), GraphSpectrum::new(Arc::clone(&used[1]))));
    let fastica_seed = draw_stream(seed, rep, Draw::Estimator, cell, 0).next_u64();
    Ok(Replicate { x, omega, graph_set, spectra, fastica_seed })
}

/// MD-index study of several scenario templates; one row per
/// (scenario, N, estimator) in that order.
pub(crate) fn run_templates(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    templates: &[ScenarioTemplate],
    estimators: &[EstimatorKind],
) -> Result<Vec<MdRow>> {
    let resolved = cfg.resolve(kind)?;
    let settings = &cfg.estimators;
    let files = GraphFiles::preload(&templates.iter().flat_map(|t| t.graphs.clone()).collect::<Vec<_>>())?;
    let want_spectra = estimators.iter().any(|e| matches!(e, EstimatorKind::Ml | EstimatorKind::MlOracle));
    let mut rows = Vec::new();
    for (si, template) in templates.iter().enumerate() {
        template.validate()?;
        let p = template.sources.len();
        for (ni, &n) in resolved.n.iter().enumerate() {
            let cell = si * 16 + ni;
            log::info!("{} N={n}: {} repetitions", template.id, resolved.reps);
            let per_rep: Vec<Vec<Trial>> = (0..resolved.reps)
                .into_par_iter()
                .map(|rep| {
                    let data = replicate(template, n, settings.k, &files, resolved.seed, rep, cell, want_spectra)?;
                    let input = EstimatorInput {
                        x: &data.x,
                        graphs: &data.graph_set,
                        spectra: data.spectra.as_ref().map(|(a, b)| (a, b)),
                        omega: &data.omega,
                        fastica_seed: data.fastica_seed,
                    };
                    Ok(estimators.iter().map(|&e| settings.trial(e, &input).0).collect())
                })
                .collect::<Result<_>>()?;
            for (ei, &e) in estimators.iter().enumerate() {
                let trials: Vec<Trial> = per_rep.iter().map(|t| t[ei].clone()).collect();
                rows.push(MdRow::summarize(
                    template.id.clone(),
                    resolved.seed,
                    e.name().to_string(),
                    settings.describe(e),
                    n,
                    p,
                    &trials,
                    cfg.record_timing,
                ));
            }
        }
    }
    Ok(rows)
}

/// Five estimators on models M1–M4 for every configured N.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Vec<MdRow>> {
    let f = &cfg.fig3;
    let templates: Vec<_> = f.models.iter().map(|&m| fig3_scenario(m, f.er_eps)).collect();
    run_templates(cfg, ExperimentKind::Fig3, &templates, &f.estimators)
}

/// User-defined scenario from `[custom.scenario]`.
pub fn run_custom(cfg: &ExperimentConfig) -> Result<Vec<MdRow>> {
    cfg.resolve(ExperimentKind::Custom)?;
    let template = cfg.custom.scenario.clone().expect("checked by resolve");
    run_templates(cfg, ExperimentKind::Custom, &[template], &cfg.custom.estimators)
}
