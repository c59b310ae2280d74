//! Fisher information and Cramér–Rao bounds for Gaussian graph-signal BSS.
//!
//! Parameters are `φ = [vec(Ω); θ₁; …; θ_P]` with `vec` stacking columns, so
//! `φ_{P·l + k} = ω_{k,l}` (0-based). Data are vectorized node by node: entry
//! `n·P + p` of `x` is signal `p` at node `n`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{BssError, Result};
use crate::sources::CovarianceModel;

pub use crate::sources::gma1_derivative;

/// Relative margin `(κ_{i,j}κ_{j,i} − N²)/N²` below which a pair is declared
/// non-identifiable; also the relative floor `ζ_p / N`.
pub const TOL_IDENT: f64 = 1e-6;

/// Largest `N·P` accepted by the dense Slepian–Bangs oracle.
pub const ORACLE_MAX_DIM: usize = 200;

/// A covariance model evaluated at given parameters.
#[derive(Clone)]
pub struct SourceModel {
    pub model: Arc<dyn CovarianceModel>,
    pub theta: Vec<f64>,
}

impl SourceModel {
    pub fn new(model: Arc<dyn CovarianceModel>, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != model.param_count() {
            return Err(BssError::param(format!(
                "model expects {} parameters, got {}",
                model.param_count(),
                theta.len()
            )));
        }
        Ok(Self { model, theta })
    }

    fn covariance(&self) -> Result<DMatrix<f64>> {
        self.model.covariance(&self.theta)
    }

    fn derivatives(&self) -> Result<Vec<DMatrix<f64>>> {
        (0..self.model.param_count()).map(|m| self.model.derivative(&self.theta, m)).collect()
    }
}

impl std::fmt::Debug for SourceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceModel")
            .field("n", &self.model.n())
            .field("theta", &self.theta)
            .finish()
    }
}

/// Covariance with no unknown parameters.
#[derive(Debug, Clone)]
pub struct KnownCovariance(pub DMatrix<f64>);

impl CovarianceModel for KnownCovariance {
    fn n(&self) -> usize {
        self.0.nrows()
    }
    fn param_count(&self) -> usize {
        0
    }
    fn covariance(&self, _theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
    fn derivative(&self, _theta: &[f64], _m: usize) -> Result<DMatrix<f64>> {
        Err(BssError::param("known covariance has no parameters"))
    }
}

fn spd(c: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(c.clone())
        .ok_or_else(|| BssError::DegenerateModel("covariance is not positive definite".into()))
}

/// `tr(AB)` without forming the product.
fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// `κ_{i,j} = tr(C_j⁻¹ C_i)`.
pub fn kappa(ci: &DMatrix<f64>, cj: &DMatrix<f64>) -> Result<f64> {
    Ok(spd(cj)?.solve(ci).trace())
}

/// Per-source quantities entering the FIM.
#[derive(Debug, Clone)]
pub struct SourceStats {
    pub n: usize,
    /// `κ_{i,j}`, with `N` on the diagonal.
    pub kappa: DMatrix<f64>,
    /// `s_p`, entries `tr(C_p⁻¹ D_{p,m})`.
    pub s: Vec<DVector<f64>>,
    /// `J_θp`, entries `½ tr(C_p⁻¹ D_{p,i} C_p⁻¹ D_{p,j})`.
    pub j_theta: Vec<DMatrix<f64>>,
    /// `ζ_p = 2N − s_pᵀ J_θp⁻¹ s_p`.
    pub zeta: DVector<f64>,
}

pub fn source_stats(models: &[SourceModel]) -> Result<SourceStats> {
    let p = models.len();
    if p == 0 {
        return Err(BssError::param("need at least one source model"));
    }
    let n = models[0].model.n();
    if models.iter().any(|m| m.model.n() != n) {
        return Err(BssError::param("all source models must have the same size"));
    }
    let covs: Vec<DMatrix<f64>> = models.iter().map(|m| m.covariance()).collect::<Result<_>>()?;
    let chols: Vec<Cholesky<f64, Dyn>> = covs.iter().map(spd).collect::<Result<_>>()?;

    let mut kappa = DMatrix::from_element(p, p, n as f64);
    for i in 0..p {
        for j in 0..p {
            if i != j {
                kappa[(i, j)] = chols[j].solve(&covs[i]).trace();
            }
        }
    }

    let mut s = Vec::with_capacity(p);
    let mut j_theta = Vec::with_capacity(p);
    let mut zeta = DVector::zeros(p);
    for (idx, model) in models.iter().enumerate() {
        let cd: Vec<DMatrix<f64>> =
            model.derivatives()?.iter().map(|d| chols[idx].solve(d)).collect();
        let m = cd.len();
        let sp = DVector::from_iterator(m, cd.iter().map(|x| x.trace()));
        let jp = DMatrix::from_fn(m, m, |a, b| 0.5 * trace_of_product(&cd[a], &cd[b]));
        zeta[idx] = if m == 0 {
            2.0 * n as f64
        } else {
            let inv = spd(&jp)
                .map_err(|_| BssError::DegenerateModel(format!("J_theta of source {idx} is singular")))?;
            2.0 * n as f64 - sp.dot(&inv.solve(&sp))
        };
        s.push(sp);
        j_theta.push(jp);
    }
    Ok(SourceStats { n, kappa, s, j_theta, zeta })
}

/// `ζ` of a single model.
pub fn zeta(model: &SourceModel) -> Result<f64> {
    Ok(source_stats(std::slice::from_ref(model))?.zeta[0])
}

#[derive(Debug, Clone)]
pub struct FimBlocks {
    pub j_omega: DMatrix<f64>,
    pub j_theta: DMatrix<f64>,
    pub j_omega_theta: DMatrix<f64>,
}

impl FimBlocks {
    /// The full `(P² + M) × (P² + M)` information matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        let a = self.j_omega.nrows();
        let m = self.j_theta.nrows();
        let mut full = DMatrix::zeros(a + m, a + m);
        full.view_mut((0, 0), (a, a)).copy_from(&self.j_omega);
        full.view_mut((a, a), (m, m)).copy_from(&self.j_theta);
        full.view_mut((0, a), (a, m)).copy_from(&self.j_omega_theta);
        full.view_mut((a, 0), (m, a)).copy_from(&self.j_omega_theta.transpose());
        full
    }

    /// `J_Ω − J_Ωθ J_θ⁻¹ J_Ωθᵀ`, the information left for `Ω` when `θ` is unknown.
    pub fn schur_complement(&self) -> Result<DMatrix<f64>> {
        if self.j_theta.nrows() == 0 {
            return Ok(self.j_omega.clone());
        }
        let chol = spd(&self.j_theta)?;
        Ok(&self.j_omega - &self.j_omega_theta * chol.solve(&self.j_omega_theta.transpose()))
    }
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or(BssError::RankDeficient(0.0))
}

pub fn fim(omega: &DMatrix<f64>, models: &[SourceModel]) -> Result<FimBlocks> {
    let stats = source_stats(models)?;
    fim_from_stats(omega, &stats)
}

pub fn fim_from_stats(omega: &DMatrix<f64>, stats: &SourceStats) -> Result<FimBlocks> {
    let p = stats.kappa.nrows();
    if omega.shape() != (p, p) {
        return Err(BssError::param(format!("mixing matrix must be {p}x{p}")));
    }
    let gamma = inverse(omega)?;
    let gt = gamma.transpose();
    let n = stats.n as f64;
    let mut j_omega = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        for j in 0..p {
            let mut inner = DMatrix::zeros(p, p);
            if i == j {
                for l in 0..p {
                    inner[(l, l)] = if l == i { 2.0 * n } else { stats.kappa[(i, l)] };
                }
            } else {
                inner[(j, i)] = n;
            }
            j_omega.view_mut((i * p, j * p), (p, p)).copy_from(&(&gt * inner * &gamma));
        }
    }
    let m_total: usize = stats.s.iter().map(|s| s.len()).sum();
    let mut j_theta = DMatrix::zeros(m_total, m_total);
    let mut j_omega_theta = DMatrix::zeros(p * p, m_total);
    let mut offset = 0;
    for q in 0..p {
        let m = stats.s[q].len();
        j_theta.view_mut((offset, offset), (m, m)).copy_from(&stats.j_theta[q]);
        // Ω^{-T} e_q s_qᵀ sits in the rows of column block q
        let block = gt.column(q) * stats.s[q].transpose();
        j_omega_theta.view_mut((q * p, offset), (p, m)).copy_from(&block);
        offset += m;
    }
    Ok(FimBlocks { j_omega, j_theta, j_omega_theta })
}

/// Checks the pairwise identifiability condition and returns the relative
/// margins `(κ_{i,j}κ_{j,i} − N²)/N²` (zero on the diagonal).
pub fn identifiability_margins(stats: &SourceStats) -> DMatrix<f64> {
    let p = stats.kappa.nrows();
    let n2 = (stats.n as f64).powi(2);
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            0.0
        } else {
            (stats.kappa[(i, j)] * stats.kappa[(j, i)] - n2) / n2
        }
    })
}

/// Closed-form bound at `Ω = I`; `known_theta` replaces `1/ζ` by `1/(2N)`.
pub fn crb_identity(stats: &SourceStats, known_theta: bool) -> Result<DMatrix<f64>> {
    let p = stats.kappa.nrows();
    let n = stats.n as f64;
    let margins = identifiability_margins(stats);
    for i in 0..p {
        for j in (i + 1)..p {
            if !(margins[(i, j)] >= TOL_IDENT) {
                return Err(BssError::NonIdentifiable(i, j));
            }
        }
        if !known_theta && !(stats.zeta[i] > TOL_IDENT * n) {
            return Err(BssError::DegenerateZeta(i));
        }
    }
    let k = &stats.kappa;
    let mut crb = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        for l in 0..p {
            let v = if l == i {
                if known_theta { 1.0 / (2.0 * n) } else { 1.0 / stats.zeta[i] }
            } else {
                k[(l, i)] / (k[(i, l)] * k[(l, i)] - n * n)
            };
            crb[(i * p + l, i * p + l)] = v;
        }
        for j in 0..p {
            if j != i {
                crb[(i * p + j, j * p + i)] = -n / (k[(i, j)] * k[(j, i)] - n * n);
            }
        }
    }
    Ok(crb)
}

/// `(I ⊗ Ω) B (I ⊗ Ωᵀ)`.
pub fn sandwich_omega(crb_i: &DMatrix<f64>, omega: &DMatrix<f64>) -> DMatrix<f64> {
    let p = omega.nrows();
    let k = DMatrix::<f64>::identity(p, p).kronecker(omega);
    &k * crb_i * k.transpose()
}

/// `(Γᵀ ⊗ I) B (Γ ⊗ I)`.
pub fn sandwich_gamma(crb_i: &DMatrix<f64>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = gamma.nrows();
    let k = gamma.transpose().kronecker(&DMatrix::<f64>::identity(p, p));
    &k * crb_i * k.transpose()
}

pub fn crb_omega(omega: &DMatrix<f64>, models: &[SourceModel]) -> Result<DMatrix<f64>> {
    let stats = source_stats(models)?;
    check_shape(omega, &stats)?;
    Ok(sandwich_omega(&crb_identity(&stats, false)?, omega))
}

pub fn crb_omega_known_theta(omega: &DMatrix<f64>, models: &[SourceModel]) -> Result<DMatrix<f64>> {
    let stats = source_stats(models)?;
    check_shape(omega, &stats)?;
    Ok(sandwich_omega(&crb_identity(&stats, true)?, omega))
}

/// Bound for `vec(Γ)`, `Γ = Ω⁻¹`.
pub fn crb_gamma(omega: &DMatrix<f64>, models: &[SourceModel]) -> Result<DMatrix<f64>> {
    let stats = source_stats(models)?;
    check_shape(omega, &stats)?;
    Ok(sandwich_gamma(&crb_identity(&stats, false)?, &inverse(omega)?))
}

fn check_shape(omega: &DMatrix<f64>, stats: &SourceStats) -> Result<()> {
    let p = stats.kappa.nrows();
    if omega.shape() != (p, p) {
        return Err(BssError::param(format!("mixing matrix must be {p}x{p}")));
    }
    Ok(())
}

/// `tr(CRB_I)` and the sum of its two off-diagonal-element entries for two
/// sources, scaled by `N`.
pub fn two_source_summary(k12: f64, k21: f64, zeta1: f64, zeta2: f64, n: f64) -> (f64, f64) {
    let off = (k12 + k21) / (k12 * k21 - n * n);
    (n * (1.0 / zeta1 + 1.0 / zeta2 + off), n * off)
}

/// Everything known about the bound at one parameter point. Matrices are
/// absent when the bound does not exist.
#[derive(Debug, Clone)]
pub struct CrbReport {
    pub crb_omega: Option<DMatrix<f64>>,
    pub crb_omega_known_theta: Option<DMatrix<f64>>,
    pub crb_gamma: Option<DMatrix<f64>>,
    pub kappa: DMatrix<f64>,
    pub zeta: DVector<f64>,
    /// `(i, j, identifiable)` for every pair `i < j`.
    pub identifiable: Vec<(usize, usize, bool)>,
    pub margins: DMatrix<f64>,
    /// Condition number of the assembled FIM.
    pub fim_condition: f64,
}

pub fn crb_report(omega: &DMatrix<f64>, models: &[SourceModel]) -> Result<CrbReport> {
    let stats = source_stats(models)?;
    check_shape(omega, &stats)?;
    let p = stats.kappa.nrows();
    let margins = identifiability_margins(&stats);
    let identifiable = (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, margins[(i, j)] >= TOL_IDENT))
        .collect();
    let full = fim_from_stats(omega, &stats)?.assemble();
    let eig = full.symmetric_eigenvalues();
    let (lo, hi) = (eig.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min), eig.amax());
    let fim_condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let crb_i = crb_identity(&stats, false).ok();
    let crb_known = crb_identity(&stats, true).ok();
    let gamma = inverse(omega)?;
    Ok(CrbReport {
        crb_omega: crb_i.as_ref().map(|c| sandwich_omega(c, omega)),
        crb_omega_known_theta: crb_known.map(|c| sandwich_omega(&c, omega)),
        crb_gamma: crb_i.as_ref().map(|c| sandwich_gamma(c, &gamma)),
        kappa: stats.kappa,
        zeta: stats.zeta,
        identifiable,
        margins,
        fim_condition,
    })
}

/// How the oracle differentiates `C_x`.
#[derive(Debug, Clone, Copy)]
pub enum Derivatives {
    Analytic,
    /// Central differences of `C_x(φ)` with step `h`.
    FiniteDifference(f64),
}

/// `M[(nP + a), (mP + b)] = Σ_q A[a,q] B[b,q] C_q[n,m]`, i.e.
/// `(I ⊗ A) C_z (I ⊗ Bᵀ)` for `C_z = Σ C_q ⊗ e_q e_qᵀ`.
fn kron_mix(a: &DMatrix<f64>, b: &DMatrix<f64>, cs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = a.nrows();
    let n = cs[0].nrows();
    let mut out = DMatrix::zeros(n * p, n * p);
    for (q, c) in cs.iter().enumerate() {
        let ab = a.column(q) * b.column(q).transpose();
        if ab.iter().all(|v| *v == 0.0) {
            continue;
        }
        for m in 0..n {
            for nn in 0..n {
                let cv = c[(nn, m)];
                if cv == 0.0 {
                    continue;
                }
                for bb in 0..p {
                    for aa in 0..p {
                        out[(nn * p + aa, m * p + bb)] += ab[(aa, bb)] * cv;
                    }
                }
            }
        }
    }
    out
}

fn covariance_of_x(omega: &DMatrix<f64>, models: &[SourceModel], thetas: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cs: Vec<DMatrix<f64>> = models
        .iter()
        .zip(thetas)
        .map(|(m, t)| m.model.covariance(t))
        .collect::<Result<_>>()?;
    Ok(kron_mix(omega, omega, &cs))
}

/// Numerically assembled FIM `½ tr(C_x⁻¹ ∂_i C_x C_x⁻¹ ∂_j C_x)` from the
/// explicit `NP × NP` covariance of the stacked data. Test-scale only.
pub fn slepian_bangs_oracle(
    omega: &DMatrix<f64>,
    models: &[SourceModel],
    derivatives: Derivatives,
) -> Result<DMatrix<f64>> {
    let p = models.len();
    let n = models.first().map(|m| m.model.n()).unwrap_or(0);
    if p == 0 || omega.shape() != (p, p) {
        return Err(BssError::param("mixing matrix and model count disagree"));
    }
    if n * p > ORACLE_MAX_DIM {
        return Err(BssError::param(format!(
            "oracle limited to N·P <= {ORACLE_MAX_DIM}, got {}",
            n * p
        )));
    }
    let thetas: Vec<Vec<f64>> = models.iter().map(|m| m.theta.clone()).collect();
    let cs: Vec<DMatrix<f64>> = models.iter().map(|m| m.covariance()).collect::<Result<_>>()?;
    let cx = kron_mix(omega, omega, &cs);
    let chol = spd(&cx)?;

    let mut partials: Vec<DMatrix<f64>> = Vec::new();
    for l in 0..p {
        for k in 0..p {
            let d = match derivatives {
                Derivatives::Analytic => {
                    let mut e = DMatrix::zeros(p, p);
                    e[(k, l)] = 1.0;
                    kron_mix(&e, omega, &cs) + kron_mix(omega, &e, &cs)
                }
                Derivatives::FiniteDifference(h) => {
                    let mut plus = omega.clone();
                    let mut minus = omega.clone();
                    plus[(k, l)] += h;
                    minus[(k, l)] -= h;
                    (covariance_of_x(&plus, models, &thetas)? - covariance_of_x(&minus, models, &thetas)?)
                        / (2.0 * h)
                }
            };
            partials.push(d);
        }
    }
    for (q, model) in models.iter().enumerate() {
        for m in 0..model.model.param_count() {
            let d = match derivatives {
                Derivatives::Analytic => {
                    let mut ds: Vec<DMatrix<f64>> = cs.iter().map(|c| c * 0.0).collect();
                    ds[q] = model.model.derivative(&model.theta, m)?;
                    kron_mix(omega, omega, &ds)
                }
                Derivatives::FiniteDifference(h) => {
                    let mut plus = thetas.clone();
                    let mut minus = thetas.clone();
                    plus[q][m] += h;
                    minus[q][m] -= h;
                    (covariance_of_x(omega, models, &plus)? - covariance_of_x(omega, models, &minus)?)
                        / (2.0 * h)
                }
            };
            partials.push(d);
        }
    }
    let solved: Vec<DMatrix<f64>> = partials.iter().map(|d| chol.solve(d)).collect();
    let k = solved.len();
    let mut j = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = 0.5 * trace_of_product(&solved[a], &solved[b]);
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}
