use nalgebra::{DMatrix, DVector};

use super::{autocorrelation_set, check_graphs, composite_autocorrelation_set, check_lambda, Diagnostics, GraphSet, SeparationResult};
use crate::error::Result;
use crate::jointdiag::{joint_diagonalize, whiten, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};

pub const GRAPH_JADE_LAMBDA: f64 = 0.8;

#[derive(Debug, Clone, Copy)]
pub struct JdOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for JdOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_sweeps: DEFAULT_MAX_SWEEPS }
    }
}

/// Fourth-order cumulant matrices `Ĉ^{k,l}` of whitened data, indexed `k·P + l`.
pub fn jade_cumulants(x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (p, n) = x.shape();
    let mut out = Vec::with_capacity(p * p);
    for k in 0..p {
        for l in 0..p {
            let weights = DVector::from_fn(n, |i, _| x[(k, i)] * x[(l, i)] / n as f64);
            let mut scaled = x.clone();
            for (i, mut col) in scaled.column_iter_mut().enumerate() {
                col *= weights[i];
            }
            let mut c = &scaled * x.transpose();
            c[(k, l)] -= 1.0;
            c[(l, k)] -= 1.0;
            if k == l {
                for i in 0..p {
                    c[(i, i)] -= 1.0;
                }
            }
            out.push((&c + c.transpose()) * 0.5);
        }
    }
    out
}

/// `Σ ‖diag(U M Uᵀ)‖²` over a matrix set.
pub fn diagonal_energy(u: &DMatrix<f64>, mats: &[DMatrix<f64>]) -> f64 {
    mats.iter()
        .map(|m| (u * m * u.transpose()).diagonal().norm_squared())
        .sum()
}

/// Joint diagonalization of `{√λ S̃} ∪ {√(1−λ) Ĉ}`; a group with zero
/// weight is left out entirely.
fn composite(
    x: &DMatrix<f64>,
    graphs: Option<&GraphSet>,
    lambda: f64,
    opts: JdOptions,
) -> Result<SeparationResult> {
    check_lambda(lambda)?;
    if let Some(g) = graphs {
        check_graphs(x, g)?;
    }
    let wh = whiten(x)?;
    let graph_mats = match graphs {
        Some(g) if lambda == 1.0 => autocorrelation_set(&wh.x, g)?,
        Some(g) if lambda > 0.0 => composite_autocorrelation_set(&wh.x, g)?,
        _ => Vec::new(),
    };
    let cum_mats = if lambda < 1.0 { jade_cumulants(&wh.x) } else { Vec::new() };

    let (wg, wc) = if graph_mats.is_empty() || cum_mats.is_empty() {
        (1.0, 1.0)
    } else {
        (lambda.sqrt(), (1.0 - lambda).sqrt())
    };
    let mats: Vec<DMatrix<f64>> = graph_mats
        .iter()
        .map(|m| m * wg)
        .chain(cum_mats.iter().map(|m| m * wc))
        .collect();

    let jd = joint_diagonalize(&mats, opts.tol, opts.max_sweeps)?;
    let total: f64 = mats.iter().map(|m| m.norm_squared()).sum();
    let objective_trace = jd.off_trace.iter().map(|off| total - off).collect();
    let diagnostics = Diagnostics {
        graph_term: (!graph_mats.is_empty()).then(|| lambda * diagonal_energy(&jd.u, &graph_mats)),
        ica_term: (!cum_mats.is_empty())
            .then(|| (1.0 - lambda) * diagonal_energy(&jd.u, &cum_mats)),
        ..Diagnostics::default()
    };
    Ok(SeparationResult::assemble(
        jd.u,
        wh.inv_sqrt,
        jd.converged,
        jd.sweeps,
        objective_trace,
        diagnostics,
    ))
}

/// GraDe: joint diagonalization of the graph autocorrelation matrices.
pub fn grade(x: &DMatrix<f64>, graphs: &GraphSet) -> Result<SeparationResult> {
    grade_with(x, graphs, JdOptions::default())
}

pub fn grade_with(x: &DMatrix<f64>, graphs: &GraphSet, opts: JdOptions) -> Result<SeparationResult> {
    composite(x, Some(graphs), 1.0, opts)
}

/// JADE: joint diagonalization of the fourth-order cumulant matrices.
pub fn jade(x: &DMatrix<f64>) -> Result<SeparationResult> {
    jade_with(x, JdOptions::default())
}

pub fn jade_with(x: &DMatrix<f64>, opts: JdOptions) -> Result<SeparationResult> {
    composite(x, None, 0.0, opts)
}

/// Graph JADE with weight `lambda` on the graph part (default 0.8).
pub fn graph_jade(x: &DMatrix<f64>, graphs: &GraphSet, lambda: f64) -> Result<SeparationResult> {
    graph_jade_with(x, graphs, lambda, JdOptions::default())
}

pub fn graph_jade_with(
    x: &DMatrix<f64>,
    graphs: &GraphSet,
    lambda: f64,
    opts: JdOptions,
) -> Result<SeparationResult> {
    composite(x, Some(graphs), lambda, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::erdos_renyi;
    use crate::rng::seeded;
    use crate::sources::{mix, GmaSpec, InnovationLaw, Scenario};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn randn(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn cumulants_match_quadruple_loop() {
        let x = DMatrix::from_row_slice(
            2,
            6,
            &[0.3, -1.2, 0.8, 1.9, -0.4, 0.1, 1.1, 0.2, -0.7, 0.5, -1.6, 0.9],
        );
        let c = jade_cumulants(&x);
        assert_eq!(c.len(), 4);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for k in 0..2 {
            for l in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut m = 0.0;
                        for t in 0..6 {
                            m += x[(k, t)] * x[(l, t)] * x[(i, t)] * x[(j, t)];
                        }
                        let v = m / 6.0 - d(k, l) * d(i, j) - d(k, i) * d(l, j) - d(k, j) * d(l, i);
                        assert!((c[k * 2 + l][(i, j)] - v).abs() < 1e-14);
                    }
                }
                assert_eq!(c[k * 2 + l], c[l * 2 + k]);
            }
        }
    }

    #[test]
    fn gaussian_cumulants_vanish() {
        let mut rng = seeded(9);
        let n = 100_000;
        let x = randn(3, n, &mut rng);
        for c in jade_cumulants(&x) {
            // every entry has O(1) variance per sample (at most 96 for x⁴)
            let tol = 5.0 * (96.0f64 / n as f64).sqrt();
            assert!(c.abs().max() < tol, "{}", c.abs().max());
        }
    }

    #[test]
    fn special_cases_are_bit_identical() {
        let mut rng = seeded(17);
        let w = Arc::new(erdos_renyi(200, 0.05, &mut rng).unwrap());
        let specs = vec![
            GmaSpec::gma1(w.clone(), 0.3, InnovationLaw::StudentT { df: 5.0 }).unwrap(),
            GmaSpec::gma1(w.clone(), 0.05, InnovationLaw::Uniform).unwrap(),
        ];
        let sc = Scenario::new(specs, randn(2, 2, &mut rng)).unwrap();
        let x = mix(&sc, &mut rng).unwrap().x;
        let gs = GraphSet::single(w, 1).unwrap();
        let g1 = graph_jade(&x, &gs, 1.0).unwrap();
        let gr = grade(&x, &gs).unwrap();
        assert_eq!(g1.gamma_hat, gr.gamma_hat);
        let g0 = graph_jade(&x, &gs, 0.0).unwrap();
        let jd = jade(&x).unwrap();
        assert_eq!(g0.gamma_hat, jd.gamma_hat);
        let mid = graph_jade(&x, &gs, 0.8).unwrap();
        assert!(mid.diagnostics.graph_term.unwrap() > 0.0);
        assert!(mid.diagnostics.ica_term.unwrap() > 0.0);
        for r in [&g1, &g0, &mid] {
            let uut = &r.u_hat * r.u_hat.transpose();
            assert!((uut - DMatrix::identity(2, 2)).abs().max() < 1e-10);
            assert_eq!(r.gamma_hat, &r.u_hat * &r.whitener);
            assert!(r.converged);
        }
    }

    #[test]
    fn single_matrix_grade_is_eigendecomposition() {
        let mut rng = seeded(23);
        let w = Arc::new(erdos_renyi(300, 0.03, &mut rng).unwrap());
        let specs = (0..3)
            .map(|i| GmaSpec::gma1(w.clone(), 0.1 * i as f64, InnovationLaw::Gaussian).unwrap())
            .collect();
        let sc = Scenario::new(specs, randn(3, 3, &mut rng)).unwrap();
        let x = mix(&sc, &mut rng).unwrap().x;
        let r = grade(&x, &GraphSet::single(w.clone(), 1).unwrap()).unwrap();
        let wh = whiten(&x).unwrap();
        let s = crate::separators::graph_autocorrelation(&wh.x, &w, 1).unwrap();
        let eig = nalgebra::SymmetricEigen::new(s);
        // each row of Û is ± an eigenvector
        for i in 0..3 {
            let row = r.u_hat.row(i).transpose();
            let best = (0..3)
                .map(|j| row.dot(&eig.eigenvectors.column(j)).abs())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-8, "{best}");
        }
    }
}
