use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{autocorrelation_set, check_graphs, composite_autocorrelation_set, grade, jade, check_lambda, diagonal_energy, Diagnostics, GraphSet, SeparationResult};
use crate::error::{BssError, Result};
use crate::jointdiag::{symmetric_orthogonalize, whiten};
use crate::rng::seeded;

pub const GRAPH_FASTICA_LAMBDA: f64 = 0.001;

/// Nonlinearity `G = G₀ − E{G₀(y)}` with its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Nonlinearity {
    pub g0: fn(f64) -> f64,
    pub g: fn(f64) -> f64,
    pub g_prime: fn(f64) -> f64,
    /// `E{G₀(y)}` for standard Gaussian `y`.
    pub gauss_mean: f64,
}

impl Nonlinearity {
    #[inline]
    pub fn big_g(&self, x: f64) -> f64 {
        (self.g0)(x) - self.gauss_mean
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn tanh(x: f64) -> f64 {
    x.tanh()
}

fn tanh_prime(x: f64) -> f64 {
    let t = x.tanh();
    1.0 - t * t
}

/// Gauss–Hermite nodes and weights for the standard normal density
/// (Golub–Welsch on the probabilists' Jacobi matrix). Weights sum to one.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..order).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (nodes, weights)
}

pub(crate) fn gaussian_expectation(f: impl Fn(f64) -> f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_hermite(order);
    nodes.iter().zip(&weights).map(|(x, w)| w * f(*x)).sum()
}

/// `G₀ = log cosh`, `g = tanh`, `g′ = 1 − tanh²`.
pub fn tanh_nonlinearity() -> Nonlinearity {
    static MEAN: OnceLock<f64> = OnceLock::new();
    let gauss_mean = *MEAN.get_or_init(|| gaussian_expectation(log_cosh, 200));
    Nonlinearity { g0: log_cosh, g: tanh, g_prime: tanh_prime, gauss_mean }
}

#[derive(Debug, Clone)]
pub struct FastIcaOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_restarts: usize,
    /// Seed for the random directions used to restart degenerate rows.
    pub seed: u64,
    /// Starting `U`; the identity when absent.
    pub init: Option<DMatrix<f64>>,
}

impl Default for FastIcaOptions {
    fn default() -> Self {
        Self {
            lambda: GRAPH_FASTICA_LAMBDA,
            tol: 1e-9,
            max_iter: 2000,
            max_restarts: 5,
            seed: 0,
            init: None,
        }
    }
}

/// Flips `v` so that its largest-magnitude entry is non-negative.
fn sign_fix(v: &mut DVector<f64>) {
    let idx = v.iamax();
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    s_mats: Vec<DMatrix<f64>>,
    lambda: f64,
    nl: &'a Nonlinearity,
}

impl Problem<'_> {
    fn ica_value(&self, u: &DMatrix<f64>) -> f64 {
        let n = self.x.ncols() as f64;
        let y = u * self.x;
        y.row_iter()
            .map(|r| (r.iter().map(|&v| self.nl.big_g(v)).sum::<f64>() / n).powi(2))
            .sum()
    }

    fn objective(&self, u: &DMatrix<f64>) -> (f64, f64) {
        let f1 = if self.s_mats.is_empty() { 0.0 } else { diagonal_energy(u, &self.s_mats) };
        let f2 = if self.lambda < 1.0 { self.ica_value(u) } else { 0.0 };
        (self.lambda * f1, (1.0 - self.lambda) * f2)
    }

    /// Unorthogonalized update of one row.
    fn update(&self, u: &DVector<f64>) -> DVector<f64> {
        let p = u.len();
        let mut out = DVector::zeros(p);
        if self.lambda > 0.0 {
            let mut a = DVector::zeros(p);
            for s in &self.s_mats {
                let su = s * u;
                a.axpy(2.0 * self.lambda * u.dot(&su), &su, 1.0);
            }
            sign_fix(&mut a);
            out += a;
        }
        if self.lambda < 1.0 {
            let n = self.x.ncols();
            let y = self.x.tr_mul(u);
            let mut mean_big_g = 0.0;
            let mut mean_gp = 0.0;
            let mut gy = DVector::zeros(n);
            for (i, &v) in y.iter().enumerate() {
                mean_big_g += self.nl.big_g(v);
                mean_gp += (self.nl.g_prime)(v);
                gy[i] = (self.nl.g)(v);
            }
            mean_big_g /= n as f64;
            mean_gp /= n as f64;
            let mut b = self.x * gy / n as f64;
            b.axpy(-mean_gp, u, 1.0);
            b *= (1.0 - self.lambda) * mean_big_g;
            sign_fix(&mut b);
            out += b;
        }
        out
    }
}

/// Rows shorter than this fraction of the longest one are restarted; matches
/// the conditioning floor of the symmetric orthogonalization.
const DEGENERATE_ROW: f64 = 1e-6;

/// `(AAᵀ)^{-1/2}A` computed as `U Vᵀ` from the SVD, which stays well defined
/// when the rows of `A` are nearly collinear.
fn polar_factor(a: DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

fn random_direction(p: usize, scale: f64, rng: &mut impl Rng) -> DVector<f64> {
    let v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize() * scale
}

struct Outcome {
    u: DMatrix<f64>,
    converged: bool,
    iterations: usize,
    objective_trace: Vec<f64>,
    restarts: usize,
    ill_conditioned: usize,
    value: f64,
}

fn iterate(problem: &Problem, mut u: DMatrix<f64>, opts: &FastIcaOptions) -> Result<Outcome> {
    let p = u.nrows();
    let mut rng = None;
    let mut restarts_per_row = vec![0usize; p];
    let mut objective_trace = vec![{
        let (a, b) = problem.objective(&u);
        a + b
    }];
    let mut converged = false;
    let mut iterations = 0;
    let mut ill_conditioned = 0usize;

    while iterations < opts.max_iter {
        iterations += 1;
        let mut rows: Vec<DVector<f64>> =
            (0..p).map(|j| problem.update(&u.row(j).transpose())).collect();
        let max_norm = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let scale = if max_norm.is_finite() && max_norm > 0.0 { max_norm } else { 1.0 };
        for (j, row) in rows.iter_mut().enumerate() {
            let norm = row.norm();
            if !norm.is_finite() || norm <= DEGENERATE_ROW * scale {
                restarts_per_row[j] += 1;
                if restarts_per_row[j] > opts.max_restarts {
                    return Err(BssError::RankDeficient(norm));
                }
                let r = rng.get_or_insert_with(|| seeded(opts.seed));
                *row = random_direction(p, scale, r);
            }
        }
        let stacked = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        let new_u = match symmetric_orthogonalize(&stacked) {
            Ok(u) => u,
            Err(BssError::RankDeficient(_)) => {
                ill_conditioned += 1;
                polar_factor(stacked)
            }
            Err(e) => return Err(e),
        };
        let delta = (0..p)
            .map(|j| 1.0 - new_u.row(j).dot(&u.row(j)).abs())
            .fold(0.0, f64::max);
        u = new_u;
        let (a, b) = problem.objective(&u);
        objective_trace.push(a + b);
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let value = *objective_trace.last().unwrap();
    Ok(Outcome {
        u,
        converged,
        iterations,
        objective_trace,
        restarts: restarts_per_row.iter().sum(),
        ill_conditioned,
        value,
    })
}

fn run(
    x: &DMatrix<f64>,
    graphs: Option<&GraphSet>,
    nl: &Nonlinearity,
    lambda: f64,
    opts: &FastIcaOptions,
) -> Result<SeparationResult> {
    check_lambda(lambda)?;
    if let Some(g) = graphs {
        check_graphs(x, g)?;
    }
    let wh = whiten(x)?;
    let p = wh.x.nrows();
    let s_mats = match graphs {
        Some(g) if lambda > 0.0 => {
            if lambda < 1.0 {
                composite_autocorrelation_set(&wh.x, g)?
            } else {
                autocorrelation_set(&wh.x, g)?
            }
        }
        _ => Vec::new(),
    };
    let problem = Problem { x: &wh.x, s_mats, lambda, nl };

    let starts = match &opts.init {
        Some(init) => {
            if init.shape() != (p, p) {
                return Err(BssError::param(format!("initial U must be {p}x{p}")));
            }
            vec![symmetric_orthogonalize(init)?]
        }
        None => {
            let mut v = vec![DMatrix::identity(p, p), jade(x)?.u_hat];
            if let (Some(g), true) = (graphs, lambda > 0.0) {
                v.push(grade(x, g)?.u_hat);
            }
            v
        }
    };
    let n_starts = starts.len();
    let mut best: Option<Outcome> = None;
    for u0 in starts {
        let out = iterate(&problem, u0, opts)?;
        if best.as_ref().is_none_or(|b| out.value > b.value) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");

    let (graph_part, ica_part) = problem.objective(&best.u);
    let mut warnings = Vec::new();
    if best.ill_conditioned > 0 {
        warnings.push(format!(
            "{} updates had nearly collinear rows; orthogonalized via SVD",
            best.ill_conditioned
        ));
    }
    if n_starts > 1 {
        log::debug!("fastica: best of {n_starts} starts, objective {}", best.value);
    }
    let diagnostics = Diagnostics {
        restarts: best.restarts,
        warnings,
        graph_term: (!problem.s_mats.is_empty()).then_some(graph_part),
        ica_term: (lambda < 1.0).then_some(ica_part),
        ..Diagnostics::default()
    };
    Ok(SeparationResult::assemble(
        best.u,
        wh.inv_sqrt,
        best.converged,
        best.iterations,
        best.objective_trace,
        diagnostics,
    ))
}

/// Graph FastICA: fixed-point maximization of
/// `λ Σ‖diag(U S̃ Uᵀ)‖² + (1 − λ) Σ_j (mean G(u_jᵀx̃))²`.
pub fn graph_fastica(
    x: &DMatrix<f64>,
    graphs: &GraphSet,
    nl: &Nonlinearity,
    opts: &FastIcaOptions,
) -> Result<SeparationResult> {
    run(x, Some(graphs), nl, opts.lambda, opts)
}

/// Squared symmetric FastICA; `opts.lambda` is ignored.
pub fn fastica_sq(x: &DMatrix<f64>, nl: &Nonlinearity, opts: &FastIcaOptions) -> Result<SeparationResult> {
    run(x, None, nl, 0.0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::erdos_renyi;
    use crate::sources::{mix, GmaSpec, InnovationLaw, Scenario};
    use std::sync::Arc;

    #[test]
    fn tanh_derivatives() {
        let nl = tanh_nonlinearity();
        assert_eq!((nl.g)(0.0), 0.0);
        assert_eq!((nl.g_prime)(0.0), 1.0);
        let h = 1e-5;
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5, 12.0] {
            let dg = (nl.big_g(x + h) - nl.big_g(x - h)) / (2.0 * h);
            assert!((dg - (nl.g)(x)).abs() < 1e-6);
            let d2 = ((nl.g)(x + h) - (nl.g)(x - h)) / (2.0 * h);
            assert!((d2 - (nl.g_prime)(x)).abs() < 1e-6);
        }
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn gauss_mean_quadrature() {
        let (nodes, weights) = gauss_hermite(20);
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // E y² = 1, E y⁴ = 3
        let m2: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m2 - 1.0).abs() < 1e-12 && (m4 - 3.0).abs() < 1e-11);

        let a = gaussian_expectation(log_cosh, 100);
        let b = gaussian_expectation(log_cosh, 200);
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        let nl = tanh_nonlinearity();
        assert_eq!(nl.gauss_mean, b);
        assert!((nl.gauss_mean - 0.3746).abs() < 1e-4);
        assert!(gaussian_expectation(|x| nl.big_g(x), 200).abs() < 1e-8);
    }

    #[test]
    fn monte_carlo_mean_of_g_is_zero() {
        let nl = tanh_nonlinearity();
        let mut rng = seeded(5);
        let n = 1_000_000;
        let vals: Vec<f64> = (0..n).map(|_| nl.big_g(rng.sample(StandardNormal))).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 5.0 * (var / n as f64).sqrt());
    }

    fn sample(seed: u64) -> (DMatrix<f64>, GraphSet) {
        let mut rng = seeded(seed);
        let w = Arc::new(erdos_renyi(300, 0.03, &mut rng).unwrap());
        let specs = vec![
            GmaSpec::gma1(w.clone(), 0.25, InnovationLaw::StudentT { df: 5.0 }).unwrap(),
            GmaSpec::gma1(w.clone(), 0.05, InnovationLaw::Uniform).unwrap(),
            GmaSpec::gma1(w.clone(), 0.12, InnovationLaw::Exponential).unwrap(),
        ];
        let omega = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = mix(&Scenario::new(specs, omega).unwrap(), &mut rng).unwrap().x;
        (x, GraphSet::single(w, 1).unwrap())
    }

    #[test]
    fn lambda_zero_is_fastica_sq() {
        let (x, gs) = sample(3);
        let nl = tanh_nonlinearity();
        let opts = FastIcaOptions { lambda: 0.0, ..FastIcaOptions::default() };
        let a = graph_fastica(&x, &gs, &nl, &opts).unwrap();
        let b = fastica_sq(&x, &nl, &opts).unwrap();
        assert_eq!(a.gamma_hat, b.gamma_hat);
        assert_eq!(a.iterations, b.iterations);
        assert!(a.converged);
    }

    #[test]
    fn graph_only_fixed_point_satisfies_kkt() {
        let (x, gs) = sample(8);
        let nl = tanh_nonlinearity();
        // tol = 0 keeps iterating to the round-off floor, where 1 − |cos| no longer resolves the angle
        let opts = FastIcaOptions { lambda: 1.0, tol: 0.0, max_iter: 3000, ..FastIcaOptions::default() };
        let r = graph_fastica(&x, &gs, &nl, &opts).unwrap();
        let wh = whiten(&x).unwrap();
        let s = autocorrelation_set(&wh.x, &gs).unwrap();
        let u = &r.u_hat;
        // S̃ carries an arbitrary overall scale, so the residual is taken relative to f₁
        let f1 = diagonal_energy(u, &s);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let (ui, uj) = (u.row(i).transpose(), u.row(j).transpose());
                let lhs: f64 = s.iter().map(|m| ui.dot(&(m * &uj)) * uj.dot(&(m * &uj))).sum();
                let rhs: f64 = s.iter().map(|m| uj.dot(&(m * &ui)) * ui.dot(&(m * &ui))).sum();
                assert!((lhs - rhs).abs() < 1e-8 * f1, "{i} {j}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn result_invariants() {
        let (x, gs) = sample(12);
        let nl = tanh_nonlinearity();
        let r = graph_fastica(&x, &gs, &nl, &FastIcaOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.gamma_hat, &r.u_hat * &r.whitener);
        let uut = &r.u_hat * r.u_hat.transpose();
        assert!((uut - DMatrix::identity(3, 3)).abs().max() < 1e-10);
        assert_eq!(r.objective_trace.len(), r.iterations + 1);
        assert!(r.diagnostics.graph_term.is_some() && r.diagnostics.ica_term.is_some());
    }
}
