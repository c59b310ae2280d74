//! Minimum distance index, alignment of estimates and Monte Carlo summaries.

use nalgebra::DMatrix;

use crate::error::{BssError, Result};

/// Largest dimension for which the exact search is run.
pub const MAX_EXACT_P: usize = 8;

/// Row scores `g_{r,i}² / ‖g_r‖²` of `G = Γ̂ Ω`; zero rows score 0.
fn scores(g: &DMatrix<f64>) -> DMatrix<f64> {
    let p = g.nrows();
    let mut s = DMatrix::zeros(p, p);
    for r in 0..p {
        let norm2 = g.row(r).norm_squared();
        if norm2 > 0.0 {
            for i in 0..p {
                s[(r, i)] = g[(r, i)] * g[(r, i)] / norm2;
            }
        }
    }
    s
}

/// Assignment `π` (true source `i` ↦ estimated row `π[i]`) maximizing
/// `Σ_i score[π[i], i]`, by exact dynamic programming over subsets.
fn best_assignment(score: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let p = score.nrows();
    let full = 1usize << p;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        // column i = number of rows already used
        let i = mask.count_ones() as usize;
        if i == p {
            continue;
        }
        for r in 0..p {
            if mask & (1 << r) == 0 {
                let next = mask | (1 << r);
                let v = best[mask] + score[(r, i)];
                if v > best[next] {
                    best[next] = v;
                    choice[next] = r;
                }
            }
        }
    }
    let mut perm = vec![0; p];
    let mut mask = full - 1;
    for i in (0..p).rev() {
        let r = choice[mask];
        perm[i] = r;
        mask &= !(1 << r);
    }
    (perm, best[full - 1])
}

fn gain(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = omega.nrows();
    if gamma_hat.shape() != (p, p) || !omega.is_square() {
        return Err(BssError::param("MD index needs two square matrices of equal size"));
    }
    if p < 2 {
        return Err(BssError::param("MD index needs P >= 2"));
    }
    if p > MAX_EXACT_P {
        return Err(BssError::param(format!("exact MD index limited to P <= {MAX_EXACT_P}")));
    }
    Ok(gamma_hat * omega)
}

/// Unclamped MD index `D(Γ̂)`, the exact infimum over scaled permutations.
pub fn md_index_raw(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    let g = gain(gamma_hat, omega)?;
    let p = g.nrows() as f64;
    let (_, total) = best_assignment(&scores(&g));
    Ok(((p - total) / (p - 1.0)).max(0.0).sqrt())
}

/// MD index clamped to `[0, 1]`.
pub fn md_index(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<f64> {
    Ok(md_index_raw(gamma_hat, omega)?.min(1.0))
}

/// Signed permutation matching estimated sources to true ones: estimated
/// row `perm[i]` with sign `signs[i]` corresponds to true source `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
}

pub fn md_matching(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<Matching> {
    let g = gain(gamma_hat, omega)?;
    let (perm, _) = best_assignment(&scores(&g));
    let signs = perm
        .iter()
        .enumerate()
        .map(|(i, &r)| if g[(r, i)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    Ok(Matching { perm, signs })
}

/// Reorders and sign-corrects the columns of a mixing estimate `Ω̂` using the
/// MD-optimal matching of `Ω̂⁻¹` against `Ω`. Column scales are left as estimated.
pub fn align(omega_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gamma_hat = omega_hat
        .clone()
        .try_inverse()
        .ok_or(BssError::RankDeficient(0.0))?;
    let m = md_matching(&gamma_hat, omega)?;
    let p = omega.nrows();
    Ok(DMatrix::from_fn(p, p, |r, i| m.signs[i] * omega_hat[(r, m.perm[i])]))
}

/// Row counterpart of [`align`] for an unmixing estimate.
pub fn align_unmixing(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = md_matching(gamma_hat, omega)?;
    let p = omega.nrows();
    Ok(DMatrix::from_fn(p, p, |i, c| m.signs[i] * gamma_hat[(m.perm[i], c)]))
}

/// Mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se(values: &[f64]) -> Estimate {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    Estimate { mean, se: (var / r).sqrt() }
}

/// Result of one repetition for one estimator.
#[derive(Debug, Clone)]
pub struct RepetitionResult {
    pub md: f64,
    /// Aligned `Ω̂`, when variances of its entries are wanted.
    pub omega_hat: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub reps: usize,
    /// `N(P−1) E{D²}`.
    pub scaled_md: Estimate,
    /// `N Σ_e var(ω̂_e)` over all entries.
    pub total_variance: Option<Estimate>,
    /// `N Σ_{i≠j} var(ω̂_{ij})`.
    pub offdiag_variance: Option<Estimate>,
}

/// Per-repetition squared deviations `Σ_e (ω̂_{e,r} − ω̄_e)²` over all
/// entries, or over the off-diagonal ones only.
pub fn entry_deviations(mats: &[&DMatrix<f64>], offdiag_only: bool) -> Vec<f64> {
    if mats.is_empty() {
        return Vec::new();
    }
    let (rows, cols) = mats[0].shape();
    let mut mean = DMatrix::zeros(rows, cols);
    for m in mats {
        mean += *m;
    }
    mean /= mats.len() as f64;
    mats.iter()
        .map(|m| {
            let mut s = 0.0;
            for j in 0..cols {
                for i in 0..rows {
                    if !(offdiag_only && i == j) {
                        s += (m[(i, j)] - mean[(i, j)]).powi(2);
                    }
                }
            }
            s
        })
        .collect()
}

/// `N Σ_e var(ω̂_e)` from the squared deviations, with a standard error
/// from their spread.
pub fn variance_sum(deviations: &[f64], n: usize) -> Estimate {
    let r = deviations.len() as f64;
    let est = mean_se(deviations);
    let factor = n as f64 * r / (r - 1.0);
    Estimate { mean: factor * est.mean, se: factor * est.se }
}

/// Mean of `a − b` over repetitions where both are present, with its standard error.
pub fn paired_difference(a: &[Option<f64>], b: &[Option<f64>]) -> Option<Estimate> {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((*x)? - (*y)?))
        .collect();
    (d.len() >= 2).then(|| mean_se(&d))
}

pub fn aggregate(results: &[RepetitionResult], n: usize, p: usize) -> Result<Summary> {
    if results.len() < 2 {
        return Err(BssError::param("aggregation needs at least two repetitions"));
    }
    let nf = n as f64;
    let scaled: Vec<f64> = results.iter().map(|r| nf * (p as f64 - 1.0) * r.md * r.md).collect();
    let mats: Vec<&DMatrix<f64>> = results.iter().filter_map(|r| r.omega_hat.as_ref()).collect();
    let (total_variance, offdiag_variance) = if mats.len() == results.len() {
        (
            Some(variance_sum(&entry_deviations(&mats, false), n)),
            Some(variance_sum(&entry_deviations(&mats, true), n)),
        )
    } else {
        (None, None)
    };
    Ok(Summary { reps: results.len(), scaled_md: mean_se(&scaled), total_variance, offdiag_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn all_perms(p: usize) -> Vec<Vec<usize>> {
        if p == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for rest in all_perms(p - 1) {
            for pos in 0..=rest.len() {
                let mut v = rest.clone();
                v.insert(pos, p - 1);
                out.push(v);
            }
        }
        out
    }

    /// Brute force: all permutations, per-row scale by golden-section search.
    fn md_oracle(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
        let g = gamma_hat * omega;
        let p = g.nrows();
        let row_cost = |r: usize, i: usize| {
            let f = |c: f64| {
                (0..p).map(|k| (c * g[(r, k)] - if k == i { 1.0 } else { 0.0 }).powi(2)).sum::<f64>()
            };
            let bound = 10.0 / g.row(r).amax().max(1e-12);
            let (mut a, mut b) = (-bound, bound);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c1 = b - phi * (b - a);
                let c2 = a + phi * (b - a);
                if f(c1) < f(c2) {
                    b = c2;
                } else {
                    a = c1;
                }
            }
            f((a + b) / 2.0)
        };
        let best = all_perms(p)
            .iter()
            .map(|perm| (0..p).map(|i| row_cost(perm[i], i)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        (best / (p as f64 - 1.0)).sqrt()
    }

    #[test]
    fn exact_cases() {
        let mut rng = seeded(1);
        let omega = randn(4, 4, &mut rng);
        let gamma = omega.clone().try_inverse().unwrap();
        assert!(md_index(&gamma, &omega).unwrap() < 1e-7);
        // signed permutation and scaling
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let pd = DMatrix::from_fn(4, 4, |i, j| {
            if perm[i] == j { [2.0, -0.5, 3.0, -1.0][i] } else { 0.0 }
        });
        assert!(md_index(&(&pd * &gamma), &omega).unwrap() < 1e-7);
        // rank one gain
        let a = randn(4, 1, &mut rng);
        let b = randn(1, 4, &mut rng);
        let rank_one = &a * &b * &gamma;
        assert!((md_index(&rank_one, &omega).unwrap() - 1.0).abs() < 1e-10);
        assert!(md_index(&DMatrix::identity(9, 9), &DMatrix::identity(9, 9)).is_err());
    }

    #[test]
    fn matches_golden_section_oracle() {
        let mut rng = seeded(2);
        for case in 0..200 {
            let p = 2 + case % 3;
            let omega = randn(p, p, &mut rng);
            let g = omega.clone().try_inverse().unwrap() + randn(p, p, &mut rng) * 0.3;
            let exact = md_index_raw(&g, &omega).unwrap();
            let oracle = md_oracle(&g, &omega);
            assert!((exact - oracle).abs() < 1e-6, "{exact} vs {oracle}");
            assert!((0.0..=1.0).contains(&md_index(&g, &omega).unwrap()));
        }
    }

    #[test]
    fn depends_only_on_gain() {
        let mut rng = seeded(3);
        for _ in 0..50 {
            let omega = randn(3, 3, &mut rng);
            let g = randn(3, 3, &mut rng);
            let a = randn(3, 3, &mut rng);
            let ainv = a.clone().try_inverse().unwrap();
            let d1 = md_index(&g, &omega).unwrap();
            let d2 = md_index(&(&g * &ainv), &(&a * &omega)).unwrap();
            assert!((d1 - d2).abs() < 1e-10);
        }
    }

    #[test]
    fn alignment_examples() {
        let mut rng = seeded(4);
        let omega = randn(3, 3, &mut rng);
        assert!((align(&omega, &omega).unwrap() - &omega).abs().max() < 1e-12);
        let swapped = DMatrix::from_fn(3, 3, |r, c| {
            let src = [2, 0, 1][c];
            let sign = [1.0, -1.0, -1.0][c];
            sign * omega[(r, src)]
        });
        assert!((align(&swapped, &omega).unwrap() - &omega).abs().max() < 1e-12);

        // noisy estimates with random column permutations: alignment reduces variance
        let reps: Vec<DMatrix<f64>> = (0..200)
            .map(|_| {
                let noisy = &omega + randn(3, 3, &mut rng) * 0.05;
                let mut perm: Vec<usize> = (0..3).collect();
                perm.shuffle(&mut rng);
                DMatrix::from_fn(3, 3, |r, c| noisy[(r, perm[c])])
            })
            .collect();
        let before = variance_sum(&entry_deviations(&reps.iter().collect::<Vec<_>>(), false), 1).mean;
        let aligned: Vec<DMatrix<f64>> = reps.iter().map(|m| align(m, &omega).unwrap()).collect();
        let after = variance_sum(&entry_deviations(&aligned.iter().collect::<Vec<_>>(), false), 1).mean;
        assert!(after < before);
    }

    #[test]
    fn paired_difference_skips_failures() {
        let a = [Some(3.0), None, Some(5.0), Some(7.0)];
        let b = [Some(1.0), Some(2.0), None, Some(4.0)];
        let d = paired_difference(&a, &b).unwrap();
        assert_eq!(d.mean, 2.5);
        assert!((d.se - 0.5).abs() < 1e-12);
        assert!(paired_difference(&a[..2], &b[..2]).is_none());
    }

    #[test]
    fn aggregate_trivial_cases() {
        let same = RepetitionResult { md: 0.0, omega_hat: Some(DMatrix::identity(2, 2)) };
        let s = aggregate(&[same.clone(), same.clone(), same], 100, 2).unwrap();
        assert_eq!(s.scaled_md.mean, 0.0);
        assert_eq!(s.total_variance.unwrap().mean, 0.0);
        assert_eq!(s.offdiag_variance.unwrap().mean, 0.0);
        assert!(aggregate(&[RepetitionResult { md: 0.1, omega_hat: None }], 10, 2).is_err());
    }

    #[test]
    fn scaled_md_tracks_offdiagonal_variance() {
        let mut rng = seeded(5);
        let n = 10_000usize;
        let p = 3;
        let eye = DMatrix::identity(p, p);
        let results: Vec<RepetitionResult> = (0..2000)
            .map(|_| {
                let g = &eye + randn(p, p, &mut rng) / (n as f64).sqrt();
                RepetitionResult { md: md_index(&g, &eye).unwrap(), omega_hat: Some(g) }
            })
            .collect();
        let s = aggregate(&results, n, p).unwrap();
        let off = s.offdiag_variance.unwrap().mean;
        assert!((s.scaled_md.mean - off).abs() < 0.1 * off, "{} vs {off}", s.scaled_md.mean);
    }
}
