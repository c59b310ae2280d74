//! Graph moving-average (GMA) signal synthesis, source covariance models,
//! innovation laws and mixing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{BssError, Result};
use crate::graphs::AdjacencyMatrix;

/// Innovation distribution, always standardized to mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationLaw {
    Gaussian,
    /// Student t scaled by `√((df−2)/df)`; needs `df > 2`.
    StudentT { df: f64 },
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Unit-rate exponential shifted by −1.
    Exponential,
}

impl InnovationLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::StudentT { df } if !(df > 2.0) => Err(BssError::param(format!(
                "student t needs df > 2 for finite variance, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    /// Excess kurtosis of the standardized law (infinite for `t` with `df <= 4`).
    pub fn excess_kurtosis(&self) -> f64 {
        match *self {
            InnovationLaw::Gaussian => 0.0,
            InnovationLaw::StudentT { df } if df > 4.0 => 6.0 / (df - 4.0),
            InnovationLaw::StudentT { .. } => f64::INFINITY,
            InnovationLaw::Uniform => -1.2,
            InnovationLaw::Exponential => 6.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            InnovationLaw::Gaussian => "gaussian".into(),
            InnovationLaw::StudentT { df } => format!("t{df}"),
            InnovationLaw::Uniform => "uniform".into(),
            InnovationLaw::Exponential => "exponential".into(),
        }
    }
}

/// I.i.d. standardized innovations of length `n`.
pub fn draw_innovations<R: Rng + ?Sized>(
    law: InnovationLaw,
    n: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    law.validate()?;
    if n == 0 {
        return Err(BssError::param("innovation length must be >= 1"));
    }
    let v = match law {
        InnovationLaw::Gaussian => DVector::from_fn(n, |_, _| rng.sample(StandardNormal)),
        InnovationLaw::StudentT { df } => {
            let t = StudentT::new(df).map_err(|e| BssError::param(e.to_string()))?;
            let scale = ((df - 2.0) / df).sqrt();
            DVector::from_fn(n, |_, _| t.sample(rng) * scale)
        }
        InnovationLaw::Uniform => {
            let a = 3f64.sqrt();
            DVector::from_fn(n, |_, _| rng.random_range(-a..a))
        }
        InnovationLaw::Exponential => {
            DVector::from_fn(n, |_, _| Distribution::<f64>::sample(&Exp1, rng) - 1.0)
        }
    };
    Ok(v)
}

/// Innovation variance of a GMA source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variance {
    Fixed(f64),
    /// `σ²(θ) = N / tr(AAᵀ)` with `A = I + Σ θ_l W^l`, so that `tr(C) = N`.
    Normalized,
}

/// One GMA(M) source: `z = (I + Σ_l θ_l W^l) y`, `y` scaled by `√σ²`.
#[derive(Debug, Clone)]
pub struct GmaSpec {
    pub w: Arc<AdjacencyMatrix>,
    pub theta: Vec<f64>,
    pub variance: Variance,
    pub innovation: InnovationLaw,
}

impl GmaSpec {
    pub fn new(
        w: Arc<AdjacencyMatrix>,
        theta: Vec<f64>,
        variance: Variance,
        innovation: InnovationLaw,
    ) -> Result<Self> {
        let spec = Self { w, theta, variance, innovation };
        spec.validate()?;
        Ok(spec)
    }

    /// Normalized-variance GMA(1) source.
    pub fn gma1(w: Arc<AdjacencyMatrix>, theta: f64, innovation: InnovationLaw) -> Result<Self> {
        Self::new(w, vec![theta], Variance::Normalized, innovation)
    }

    pub fn order(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(BssError::param("GMA order must be >= 1"));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(BssError::param("GMA coefficients must be finite"));
        }
        if let Variance::Fixed(s) = self.variance {
            if !(s > 0.0) {
                return Err(BssError::param(format!("variance must be positive, got {s}")));
            }
        }
        self.innovation.validate()
    }

    /// Effective innovation variance `σ²`.
    pub fn sigma2(&self) -> Result<f64> {
        match self.variance {
            Variance::Fixed(s) => Ok(s),
            Variance::Normalized => {
                if self.order() == 1 {
                    return Ok(normalized_sigma2(&self.w, self.theta[0]));
                }
                // tr(AAᵀ) = Σ_{l,m} θ_l θ_m tr(W^{l+m}) with θ_0 = 1 and tr(W^0) = N
                let n = self.w.n() as f64;
                let coef: Vec<f64> = std::iter::once(1.0).chain(self.theta.iter().copied()).collect();
                let mut tr = 0.0;
                for (l, a) in coef.iter().enumerate() {
                    for (m, b) in coef.iter().enumerate() {
                        let k = (l + m) as u32;
                        let t = if k == 0 { n } else { self.w.power(k)?.trace() as f64 };
                        tr += a * b * t;
                    }
                }
                Ok(n / tr)
            }
        }
    }
}

/// One realization of a GMA source.
pub fn gma_generate<R: Rng + ?Sized>(spec: &GmaSpec, rng: &mut R) -> Result<DVector<f64>> {
    spec.validate()?;
    let y = draw_innovations(spec.innovation, spec.w.n(), rng)? * spec.sigma2()?.sqrt();
    let mut z = y.clone();
    let mut wy = y;
    for &t in &spec.theta {
        wy = spec.w.apply(&wy);
        if t != 0.0 {
            z.axpy(t, &wy, 1.0);
        }
    }
    Ok(z)
}

/// `σ²(I + θW)(I + θW)ᵀ`, exactly symmetric. Fails if `I + θW` is singular.
pub fn gma1_covariance(w: &AdjacencyMatrix, theta: f64, sigma2: f64) -> Result<DMatrix<f64>> {
    let n = w.n();
    let a = DMatrix::<f64>::identity(n, n) + w.dense() * theta;
    // A is symmetric, so log|det A| = Σ log|λᵢ(A)|
    let eig = a.clone().symmetric_eigenvalues();
    let scale = eig.amax();
    let logdet: f64 = eig.iter().map(|l| l.abs().ln()).sum();
    if !logdet.is_finite() || eig.iter().any(|l| l.abs() <= 1e-12 * scale) || !(sigma2 > 0.0) {
        return Err(BssError::DegenerateModel(format!(
            "I + {theta} W is singular; covariance is not positive definite"
        )));
    }
    let c = &a * a.transpose() * sigma2;
    Ok((&c + c.transpose()) * 0.5)
}

/// Trace normalization `σ²(θ) = N / tr((I+θW)(I+θW)ᵀ)`.
pub fn normalized_sigma2(w: &AdjacencyMatrix, theta: f64) -> f64 {
    let n = w.n() as f64;
    // tr(W) = 0 and tr(W Wᵀ) = 2|E| for a symmetric 0/1 matrix
    n / (n + theta * theta * 2.0 * w.edge_count() as f64)
}

/// `dσ²/dθ = −N tr(W + Wᵀ + 2θWWᵀ) / tr²((I+θW)(I+θW)ᵀ)`.
pub fn normalized_sigma2_derivative(w: &AdjacencyMatrix, theta: f64) -> f64 {
    let n = w.n() as f64;
    let e2 = 2.0 * w.edge_count() as f64;
    let tr = n + theta * theta * e2;
    -n * (2.0 * theta * e2) / (tr * tr)
}

/// `D = dC/dθ` of a GMA(1) covariance, including the `dσ²/dθ` term when the
/// variance is tied to `θ`.
pub fn gma1_derivative(w: &AdjacencyMatrix, theta: f64, variance: Variance) -> DMatrix<f64> {
    let n = w.n();
    let wd = w.dense();
    let inner = wd + wd.transpose() + wd * wd.transpose() * (2.0 * theta);
    match variance {
        Variance::Fixed(s2) => inner * s2,
        Variance::Normalized => {
            let s2 = normalized_sigma2(w, theta);
            let ds2 = normalized_sigma2_derivative(w, theta);
            let a = DMatrix::<f64>::identity(n, n) + wd * theta;
            inner * s2 + (&a * a.transpose()) * ds2
        }
    }
}

/// Parametric source covariance `C(θ)` with derivatives `∂C/∂θ_m`.
pub trait CovarianceModel: Send + Sync {
    fn n(&self) -> usize;
    fn param_count(&self) -> usize;
    fn covariance(&self, theta: &[f64]) -> Result<DMatrix<f64>>;
    fn derivative(&self, theta: &[f64], m: usize) -> Result<DMatrix<f64>>;
}

/// GMA(1) with the trace-normalized variance `σ²(θ)`.
#[derive(Debug, Clone)]
pub struct Gma1Normalized {
    pub w: Arc<AdjacencyMatrix>,
}

/// GMA(1) with a fixed, θ-independent variance.
#[derive(Debug, Clone)]
pub struct Gma1Fixed {
    pub w: Arc<AdjacencyMatrix>,
    pub sigma2: f64,
}

fn single_param(theta: &[f64], m: usize) -> Result<f64> {
    if theta.len() != 1 || m != 0 {
        return Err(BssError::param("GMA(1) model has exactly one parameter"));
    }
    Ok(theta[0])
}

impl CovarianceModel for Gma1Normalized {
    fn n(&self) -> usize {
        self.w.n()
    }
    fn param_count(&self) -> usize {
        1
    }
    fn covariance(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let t = single_param(theta, 0)?;
        gma1_covariance(&self.w, t, normalized_sigma2(&self.w, t))
    }
    fn derivative(&self, theta: &[f64], m: usize) -> Result<DMatrix<f64>> {
        let t = single_param(theta, m)?;
        Ok(gma1_derivative(&self.w, t, Variance::Normalized))
    }
}

impl CovarianceModel for Gma1Fixed {
    fn n(&self) -> usize {
        self.w.n()
    }
    fn param_count(&self) -> usize {
        1
    }
    fn covariance(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let t = single_param(theta, 0)?;
        gma1_covariance(&self.w, t, self.sigma2)
    }
    fn derivative(&self, theta: &[f64], m: usize) -> Result<DMatrix<f64>> {
        let t = single_param(theta, m)?;
        Ok(gma1_derivative(&self.w, t, Variance::Fixed(self.sigma2)))
    }
}

/// Full generative description of one mixing experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub specs: Vec<GmaSpec>,
    pub omega: DMatrix<f64>,
}

/// Condition number above which a mixing matrix is treated as singular.
pub const MAX_MIXING_CONDITION: f64 = 1e12;

impl Scenario {
    pub fn new(specs: Vec<GmaSpec>, omega: DMatrix<f64>) -> Result<Self> {
        let p = specs.len();
        if p == 0 {
            return Err(BssError::param("scenario needs at least one source"));
        }
        if omega.nrows() != p || omega.ncols() != p {
            return Err(BssError::param(format!(
                "mixing matrix is {}x{}, expected {p}x{p}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        let n = specs[0].w.n();
        for s in &specs {
            s.validate()?;
            if s.w.n() != n {
                return Err(BssError::param("all sources must live on graphs of the same size"));
            }
        }
        let sv = omega.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond.is_finite() && cond < MAX_MIXING_CONDITION) {
            return Err(BssError::param(format!(
                "mixing matrix is singular (condition number {cond:e})"
            )));
        }
        Ok(Self { specs, omega })
    }

    pub fn p(&self) -> usize {
        self.specs.len()
    }

    pub fn n(&self) -> usize {
        self.specs[0].w.n()
    }
}

/// Observed mixture `X = ΩZ` together with the latent sources `Z`.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// Draws every source row in order from `rng` and mixes.
pub fn mix<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Mixture> {
    let rows = scenario
        .specs
        .iter()
        .map(|s| gma_generate(s, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(mix_sources(&scenario.omega, &rows))
}

/// Stacks source vectors into `Z` and forms `X = ΩZ`.
pub fn mix_sources(omega: &DMatrix<f64>, rows: &[DVector<f64>]) -> Mixture {
    let n = rows[0].len();
    let z = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    Mixture { x: omega * &z, z }
}

/// Writes a matrix as CSV, one matrix row per line, for debugging dumps.
pub fn write_matrix_csv<W: std::io::Write>(m: &DMatrix<f64>, mut out: W) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads a numeric CSV matrix (no header, comma separated).
pub fn read_matrix_csv<R: std::io::BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| BssError::param(format!("line {}: {e}", ln + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(BssError::param(format!("line {}: ragged row", ln + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(BssError::param("empty matrix file"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
