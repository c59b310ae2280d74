use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    build_graphs, draw_stream, Draw, EstimatorInput, EstimatorKind, ExperimentConfig, ExperimentKind,
    Fig2Settings, Fig2Setup, GraphFiles, GraphModel,
};
use crate::crb::two_source_summary;
use crate::error::{BssError, Result};
use crate::metrics::{align, entry_deviations, mean_se, variance_sum};
use crate::separators::GraphSet;
use crate::sources::{gma_generate, GmaSpec, InnovationLaw, Variance};
use crate::spectral::{kappa_pair, GraphSpectrum, SpectralOverlap};

/// Bounds per setup and θ₂ for one graph draw; `None` where not identifiable.
type BoundTable = Vec<Vec<Option<(f64, f64)>>>;

const METADATA: &str = "alignment=md_optimal_signed_permutation;graphs=per_repetition";

/// One row per (setup, estimator or bound, θ₂). Variances are `N`-scaled
/// sums over entries of the aligned mixing estimate.
#[derive(Debug, Clone, Serialize)]
pub struct Fig2Row {
    pub scenario: String,
    pub seed: u64,
    pub estimator: String,
    pub hyperparameters: String,
    pub n: usize,
    pub reps: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub total_variance: f64,
    pub se_total: f64,
    pub offdiag_variance: f64,
    pub se_offdiag: f64,
    pub failures: usize,
    /// `ok` or `non_identifiable`.
    pub status: String,
    pub metadata: String,
    /// Per-repetition contributions to `total_variance`, for paired comparisons.
    #[serde(skip)]
    pub samples_total: Vec<Option<f64>>,
    #[serde(skip)]
    pub samples_offdiag: Vec<Option<f64>>,
}

/// Bound-only row of the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct CrbRow {
    pub scenario: String,
    pub seed: u64,
    pub n: usize,
    pub graph_draws: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub crb_trace: f64,
    pub se_trace: f64,
    pub crb_offdiag: f64,
    pub se_offdiag: f64,
    pub status: String,
}

/// Indices into `[community, geometric, Erdős–Rényi]` of the graphs of the
/// first and second source.
fn setup_graphs(setup: Fig2Setup) -> (usize, usize) {
    match setup {
        Fig2Setup::C1 => (0, 1),
        Fig2Setup::C2 => (0, 2),
        Fig2Setup::C3 => (1, 2),
        Fig2Setup::C4 => (0, 0),
    }
}

fn graph_models(f: &Fig2Settings) -> [GraphModel; 3] {
    [
        GraphModel::Sbm { p_in: f.sbm_p_in, p_out: f.sbm_p_out },
        GraphModel::Geometric { radius: f.geometric_radius },
        GraphModel::Er { eps: f.er_eps },
    ]
}

fn graph_params(f: &Fig2Settings) -> String {
    format!(
        "sbm_p_in={};sbm_p_out={};radius={};er_eps={}",
        f.sbm_p_in, f.sbm_p_out, f.geometric_radius, f.er_eps
    )
}

/// `N·tr(CRB)` and `N·(off-diagonal entries)` for one graph draw, or `None`
/// when the mixing matrix is not identifiable there.
fn crb_point(s1: &GraphSpectrum, s2: &GraphSpectrum, overlap: &SpectralOverlap, t1: f64, t2: f64) -> Result<Option<(f64, f64)>> {
    let n = s1.n() as f64;
    let (k12, k21) = kappa_pair(s1, t1, s2, t2, Variance::Normalized, overlap);
    let z1 = s1.zeta(t1, Variance::Normalized)?;
    let z2 = s2.zeta(t2, Variance::Normalized)?;
    if k12 * k21 - n * n < 1e-6 * n * n || z1 <= 1e-6 * n || z2 <= 1e-6 * n {
        return Ok(None);
    }
    Ok(Some(two_source_summary(k12, k21, z1, z2, n)))
}


fn bound_rows(
    scenario: &str,
    seed: u64,
    n: usize,
    t1: f64,
    t2: f64,
    per_draw: &[Option<(f64, f64)>],
) -> (Option<(f64, f64, f64, f64)>, CrbRow) {
    let ok = per_draw.iter().all(Option::is_some);
    let values = if ok {
        let tr: Vec<f64> = per_draw.iter().map(|v| v.unwrap().0).collect();
        let off: Vec<f64> = per_draw.iter().map(|v| v.unwrap().1).collect();
        let (a, b) = (mean_se(&tr), mean_se(&off));
        Some((a.mean, a.se, b.mean, b.se))
    } else {
        None
    };
    let (tr, se_tr, off, se_off) = values.unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
    let row = CrbRow {
        scenario: scenario.to_string(),
        seed,
        n,
        graph_draws: per_draw.len(),
        theta1: t1,
        theta2: t2,
        crb_trace: tr,
        se_trace: se_tr,
        crb_offdiag: off,
        se_offdiag: se_off,
        status: if ok { "ok" } else { "non_identifiable" }.to_string(),
    };
    (values, row)
}

fn draw_spectra(f: &Fig2Settings, seed: u64, rep: usize, n: usize) -> Result<Vec<GraphSpectrum>> {
    let graphs = build_graphs(&graph_models(f), n, &GraphFiles::default(), |g| {
        draw_stream(seed, rep, Draw::Graph, 0, g)
    })?;
    Ok(graphs.into_iter().map(GraphSpectrum::new).collect())
}

fn bound_table(f: &Fig2Settings, spectra: &[GraphSpectrum], theta2: &[f64]) -> Result<BoundTable> {
    f.setups
        .iter()
        .map(|&setup| {
            let (a, b) = setup_graphs(setup);
            let overlap = SpectralOverlap::new(&spectra[a], &spectra[b]);
            theta2
                .iter()
                .map(|&t2| crb_point(&spectra[a], &spectra[b], &overlap, f.theta1, t2))
                .collect()
        })
        .collect()
}

/// Aligned `Ω̂` of every estimator in one repetition; `[setup][θ₂][estimator]`.
type RepEstimates = Vec<Vec<Vec<Option<DMatrix<f64>>>>>;

/// Bounds and estimator variances for the two-source setups.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<Fig2Row>> {
    let resolved = cfg.resolve(ExperimentKind::Fig2)?;
    let f = &cfg.fig2;
    let settings = &cfg.estimators;
    let theta2 = f.theta2.points()?;
    if theta2.len() > 1024 || f.setups.len() > 4 {
        return Err(BssError::Config("at most 1024 theta2 points and 4 setups".into()));
    }
    let seed = resolved.seed;
    let omega = DMatrix::<f64>::identity(2, 2);
    let mut rows = Vec::new();
    for &n in &resolved.n {
        log::info!("fig2 N={n}: {} repetitions", resolved.reps);
        let per_rep: Vec<(BoundTable, RepEstimates)> = (0..resolved.reps)
            .into_par_iter()
            .map(|rep| {
                let spectra = draw_spectra(f, seed, rep, n)?;
                let bounds = bound_table(f, &spectra, &theta2)?;
                let mut est = Vec::with_capacity(f.setups.len());
                for (si, &setup) in f.setups.iter().enumerate() {
                    let (a, b) = setup_graphs(setup);
                    let (ga, gb) = (spectra[a].graph(), spectra[b].graph());
                    let graph_set = GraphSet::from_graphs(&[Arc::clone(ga), Arc::clone(gb)], settings.k)?;
                    let mut per_theta = Vec::with_capacity(theta2.len());
                    for (ti, &t2) in theta2.iter().enumerate() {
                        if bounds[si][ti].is_none() {
                            per_theta.push(vec![None; f.estimators.len()]);
                            continue;
                        }
                        let cell = si * 1024 + ti;
                        let specs =
                            [GmaSpec::gma1(Arc::clone(ga), f.theta1, InnovationLaw::Gaussian)?, GmaSpec::gma1(Arc::clone(gb), t2, InnovationLaw::Gaussian)?];
                        let mut x = DMatrix::zeros(2, n);
                        for (i, spec) in specs.iter().enumerate() {
                            let z = gma_generate(spec, &mut draw_stream(seed, rep, Draw::Source, cell, i))?;
                            x.set_row(i, &z.transpose());
                        }
                        let input = EstimatorInput {
                            x: &x,
                            graphs: &graph_set,
                            spectra: Some((&spectra[a], &spectra[b])),
                            omega: &omega,
                            fastica_seed: 0,
                        };
                        per_theta.push(
                            f.estimators
                                .iter()
                                .map(|&e| {
                                    let (_, res) = settings.trial(e, &input);
                                    res.and_then(|r| {
                                        let omega_hat = r.gamma_hat.try_inverse()?;
                                        align(&omega_hat, &omega).ok()
                                    })
                                })
                                .collect(),
                        );
                    }
                    est.push(per_theta);
                }
                Ok((bounds, est))
            })
            .collect::<Result<_>>()?;

        for (si, &setup) in f.setups.iter().enumerate() {
            let scenario = format!("fig2-{}", setup.name());
            for (ti, &t2) in theta2.iter().enumerate() {
                let per_draw: Vec<_> = per_rep.iter().map(|(b, _)| b[si][ti]).collect();
                let (bound, _) = bound_rows(&scenario, seed, n, f.theta1, t2, &per_draw);
                let status = if bound.is_some() { "ok" } else { "non_identifiable" };
                let (tr, se_tr, off, se_off) = bound.unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
                rows.push(Fig2Row {
                    scenario: scenario.clone(),
                    seed,
                    estimator: "crb".into(),
                    hyperparameters: graph_params(f),
                    n,
                    reps: resolved.reps,
                    theta1: f.theta1,
                    theta2: t2,
                    total_variance: tr,
                    se_total: se_tr,
                    offdiag_variance: off,
                    se_offdiag: se_off,
                    failures: 0,
                    status: status.into(),
                    metadata: METADATA.into(),
                    samples_total: Vec::new(),
                    samples_offdiag: Vec::new(),
                });
                for (ei, &e) in f.estimators.iter().enumerate() {
                    let mats: Vec<Option<&DMatrix<f64>>> =
                        per_rep.iter().map(|(_, est)| est[si][ti][ei].as_ref()).collect();
                    rows.push(estimator_row(
                        &scenario,
                        seed,
                        e,
                        settings.describe(e),
                        n,
                        f.theta1,
                        t2,
                        &mats,
                        bound.is_some(),
                    ));
                }
            }
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn estimator_row(
    scenario: &str,
    seed: u64,
    e: EstimatorKind,
    hyperparameters: String,
    n: usize,
    theta1: f64,
    theta2: f64,
    mats: &[Option<&DMatrix<f64>>],
    identifiable: bool,
) -> Fig2Row {
    let reps = mats.len();
    let ok: Vec<&DMatrix<f64>> = mats.iter().flatten().copied().collect();
    let failures = if identifiable { reps - ok.len() } else { 0 };
    let mut row = Fig2Row {
        scenario: scenario.to_string(),
        seed,
        estimator: e.name().to_string(),
        hyperparameters,
        n,
        reps,
        theta1,
        theta2,
        total_variance: f64::NAN,
        se_total: f64::NAN,
        offdiag_variance: f64::NAN,
        se_offdiag: f64::NAN,
        failures,
        status: if identifiable { "ok" } else { "non_identifiable" }.to_string(),
        metadata: METADATA.into(),
        samples_total: vec![None; reps],
        samples_offdiag: vec![None; reps],
    };
    if !identifiable || ok.len() < 2 {
        return row;
    }
    let r = ok.len() as f64;
    let factor = n as f64 * r / (r - 1.0);
    for (offdiag, (mean, se, samples)) in [
        (false, (&mut row.total_variance, &mut row.se_total, &mut row.samples_total)),
        (true, (&mut row.offdiag_variance, &mut row.se_offdiag, &mut row.samples_offdiag)),
    ] {
        let dev = entry_deviations(&ok, offdiag);
        let est = variance_sum(&dev, n);
        *mean = est.mean;
        *se = est.se;
        let mut it = dev.iter();
        for (slot, m) in samples.iter_mut().zip(mats) {
            if m.is_some() {
                *slot = it.next().map(|d| factor * d);
            }
        }
    }
    row
}

/// Bound-only sweep over the `[crb_sweep]` setups, averaged over `reps`
/// graph draws.
pub fn crb_sweep(cfg: &ExperimentConfig) -> Result<Vec<CrbRow>> {
    let resolved = cfg.resolve(ExperimentKind::CrbSweep)?;
    let f = &cfg.crb_sweep;
    let theta2 = f.theta2.points()?;
    let mut rows = Vec::new();
    for &n in &resolved.n {
        let tables: Vec<_> = (0..resolved.reps)
            .into_par_iter()
            .map(|rep| bound_table(f, &draw_spectra(f, resolved.seed, rep, n)?, &theta2))
            .collect::<Result<_>>()?;
        for (si, &setup) in f.setups.iter().enumerate() {
            let scenario = format!("crb-{}", setup.name());
            for (ti, &t2) in theta2.iter().enumerate() {
                let per_draw: Vec<_> = tables.iter().map(|t| t[si][ti]).collect();
                rows.push(bound_rows(&scenario, resolved.seed, n, f.theta1, t2, &per_draw).1);
            }
        }
    }
    Ok(rows)
}
