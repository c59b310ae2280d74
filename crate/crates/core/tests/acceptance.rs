//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows in plain `cargo test` output) and then asserts.
//!
//! Comparison rules for Monte Carlo means:
//! * "strictly below": paired difference `mean + 2·SE < 0`, or disjoint
//!   `±2 SE` bands where the criterion asks for them;
//! * "≤": paired difference `mean ≤ 2·SE`.

use std::io::Write;
use std::sync::Arc;

use graphbss::crb::{
    crb_gamma, crb_omega, crb_omega_known_theta, fim, sandwich_gamma, sandwich_omega, slepian_bangs_oracle, zeta,
    Derivatives, KnownCovariance, SourceModel,
};
use graphbss::experiments::{
    crb_sweep, run_custom, run_fig1, run_fig2, run_fig3, to_csv, ExperimentConfig, Fig2Row, Fig2Setup, Fig3Model,
    Grid, MdRow,
};
use graphbss::graphs::erdos_renyi;
use graphbss::jointdiag::{joint_diagonalize, DEFAULT_MAX_SWEEPS};
use graphbss::metrics::{md_index, md_index_raw, paired_difference, Estimate};
use graphbss::rng::seeded;
use graphbss::sources::{gma1_covariance, Gma1Normalized};
use graphbss::BssError;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] criterion {id:>2} {status}: {name} ({detail})");
}

fn randn(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

/// Random GMA(1) sources with `|θ| ρ(W) ≤ 0.9`, so every covariance has
/// condition number below 400 and the dense oracle stays accurate.
fn gma_instance(rng: &mut impl Rng, n: usize, p: usize) -> (DMatrix<f64>, Vec<SourceModel>) {
    let models = (0..p)
        .map(|_| {
            let w = loop {
                let w = erdos_renyi(n, rng.random_range(0.2..0.7), rng).unwrap();
                if w.edge_count() > 0 {
                    break Arc::new(w);
                }
            };
            let rho = w.dense().clone().symmetric_eigenvalues().amax();
            let theta = rng.random_range(0.02..0.9) / rho;
            SourceModel::new(Arc::new(Gma1Normalized { w }), vec![theta]).unwrap()
        })
        .collect();
    let omega = randn(p, p, rng) + DMatrix::identity(p, p) * 2.0;
    (omega, models)
}

#[test]
fn criterion_01_fim_matches_slepian_bangs() {
    let mut rng = seeded(101);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = 3 + case % 18;
        let (omega, models) = gma_instance(&mut rng, n, 2);
        let closed = fim(&omega, &models).unwrap().assemble();
        let oracle = slepian_bangs_oracle(&omega, &models, Derivatives::Analytic).unwrap();
        worst = worst.max(rel_err(&closed, &oracle));
    }
    let pass = worst <= 1e-8;
    report(1, "closed-form FIM equals numerical Slepian-Bangs FIM", pass, &format!("worst rel err {worst:.2e}, tol 1e-8, 50 instances"));
    assert!(pass);
}

#[test]
fn criterion_02_bound_inverts_schur_complement() {
    let mut rng = seeded(102);
    let mut worst_inv: f64 = 0.0;
    for case in 0..50 {
        let n = 3 + case % 18;
        let (omega, models) = gma_instance(&mut rng, n, 2);
        let oracle = slepian_bangs_oracle(&omega, &models, Derivatives::Analytic).unwrap();
        let a = oracle.view((0, 0), (4, 4));
        let b = oracle.view((0, 4), (4, 2));
        let jt_inv = oracle.view((4, 4), (2, 2)).into_owned().try_inverse().unwrap();
        let schur = a - b * jt_inv * b.transpose();
        let numeric = schur.try_inverse().unwrap();
        worst_inv = worst_inv.max(rel_err(&crb_omega(&omega, &models).unwrap(), &numeric));
    }
    // equivariance: bounds at Ω from the identity bound, against direct
    // inversion of the FIM blocks evaluated at Ω
    let (_, models) = gma_instance(&mut rng, 8, 3);
    let eye = DMatrix::identity(3, 3);
    let base = crb_omega(&eye, &models).unwrap();
    let mut worst_eq: f64 = 0.0;
    for _ in 0..100 {
        let omega = randn(3, 3, &mut rng);
        let gamma = omega.clone().try_inverse().unwrap();
        let direct = fim(&omega, &models).unwrap().schur_complement().unwrap().try_inverse().unwrap();
        worst_eq = worst_eq.max(rel_err(&sandwich_omega(&base, &omega), &direct));
        let jac = -gamma.transpose().kronecker(&gamma);
        let direct_gamma = &jac * &direct * jac.transpose();
        worst_eq = worst_eq.max(rel_err(&sandwich_gamma(&base, &gamma), &direct_gamma));
        worst_eq = worst_eq.max(rel_err(&crb_gamma(&omega, &models).unwrap(), &direct_gamma));
    }
    let pass = worst_inv <= 1e-8 && worst_eq <= 1e-10;
    report(
        2,
        "closed-form CRB equals inverted Schur complement; equivariance",
        pass,
        &format!("inversion {worst_inv:.2e} (tol 1e-8), equivariance {worst_eq:.2e} (tol 1e-10)"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_ordering_zeta_range_nonidentifiability() {
    let mut rng = seeded(103);
    let mut worst_order = f64::INFINITY;
    let mut instances = 0;
    while instances < 100 {
        let p = 2 + instances % 2;
        let (omega, models) = gma_instance(&mut rng, 5 + instances % 6, p);
        let (Ok(full), Ok(known)) = (crb_omega(&omega, &models), crb_omega_known_theta(&omega, &models)) else {
            continue;
        };
        instances += 1;
        let diff = &full - &known;
        let scale = full.abs().max();
        worst_order = worst_order.min(diff.symmetric_eigenvalues().min() / scale);
    }
    let mut zeta_ok = true;
    let mut draws = 0;
    while draws < 1000 {
        let n = rng.random_range(3..15);
        let w = Arc::new(erdos_renyi(n, rng.random_range(0.1..0.9), &mut rng).unwrap());
        let m = SourceModel::new(Arc::new(Gma1Normalized { w }), vec![rng.random_range(-0.3..0.3)]).unwrap();
        if let Ok(z) = zeta(&m) {
            draws += 1;
            zeta_ok &= (-1e-9..=2.0 * n as f64 + 1e-9).contains(&z);
        }
    }
    let mut nonident = true;
    for k in 0..20 {
        let w = erdos_renyi(10, 0.4, &mut seeded(k)).unwrap();
        let c = gma1_covariance(&w, 0.2, 1.0).unwrap();
        let models = vec![
            SourceModel::new(Arc::new(KnownCovariance(c.clone())), vec![]).unwrap(),
            SourceModel::new(Arc::new(KnownCovariance(c * (1.0 + k as f64))), vec![]).unwrap(),
        ];
        for _ in 0..2 {
            nonident &= matches!(crb_omega(&randn(2, 2, &mut rng), &models), Err(BssError::NonIdentifiable(0, 1)));
        }
    }
    let pass = worst_order >= -1e-8 && zeta_ok && nonident;
    report(
        3,
        "CRB ordering, zeta range, proportional covariances not identifiable",
        pass,
        &format!("min eig/norm {worst_order:.2e}, zeta in [0,2N]: {zeta_ok}, NonIdentifiable raised: {nonident}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_shared_graph_bound_diverges() {
    let start = std::time::Instant::now();
    let mut cfg = ExperimentConfig::from_toml("seed = 2024\nreps = 1\nn = [250]").unwrap();
    cfg.crb_sweep.setups = vec![Fig2Setup::C4];
    let rows = crb_sweep(&cfg).unwrap();
    let at = |t: f64| rows.iter().find(|r| (r.theta2 - t).abs() < 1e-9).unwrap().crb_trace;
    let (lo, hi, far) = (at(0.09), at(0.11), at(0.2));
    let secs = start.elapsed().as_secs_f64();
    let pass = lo > 5.0 * far && hi > 5.0 * far && secs < 60.0;
    report(
        4,
        "C4 bound diverges at theta2 = theta1",
        pass,
        &format!("ratios {:.1} and {:.1} (need > 5), {secs:.1}s", lo / far, hi / far),
    );
    assert!(pass);
}

fn weakly_below(a: &[Option<f64>], b: &[Option<f64>]) -> (bool, Estimate) {
    let d = paired_difference(a, b).expect("enough paired repetitions");
    (d.mean <= 2.0 * d.se, d)
}

fn strictly_below(a: &[Option<f64>], b: &[Option<f64>]) -> (bool, Estimate) {
    let d = paired_difference(a, b).expect("enough paired repetitions");
    (d.mean + 2.0 * d.se < 0.0, d)
}

#[test]
fn criterion_05_estimators_above_bound_and_ml_below_grade() {
    let mut cfg = ExperimentConfig::from_toml("seed = 2024\nreps = 500\nn = [250]").unwrap();
    cfg.fig2.setups = vec![Fig2Setup::C1, Fig2Setup::C2, Fig2Setup::C3];
    let rows = run_fig2(&cfg).unwrap();
    let find = |s: &str, t: f64, e: &str| -> &Fig2Row {
        rows.iter().find(|r| r.scenario == s && (r.theta2 - t).abs() < 1e-9 && r.estimator == e).unwrap()
    };
    let mut bound_violations = Vec::new();
    let mut order_violations = Vec::new();
    let mut failures = 0;
    let mut points = 0;
    for setup in ["fig2-C1", "fig2-C2", "fig2-C3"] {
        for t in cfg.fig2.theta2.points().unwrap() {
            let crb = find(setup, t, "crb");
            let grade = find(setup, t, "grade");
            let ml = find(setup, t, "ml");
            points += 1;
            for est in [grade, ml] {
                failures += est.failures;
                if est.total_variance < crb.total_variance - 2.0 * est.se_total
                    || est.offdiag_variance < crb.offdiag_variance - 2.0 * est.se_offdiag
                {
                    bound_violations.push(format!("{setup} {t} {}", est.estimator));
                }
            }
            if t >= 0.15 - 1e-9 {
                for (what, a, b) in [
                    ("total", &ml.samples_total, &grade.samples_total),
                    ("offdiag", &ml.samples_offdiag, &grade.samples_offdiag),
                ] {
                    let (ok, d) = weakly_below(a, b);
                    if !ok {
                        order_violations.push(format!("{setup} {t} {what}: diff {:.3} se {:.3}", d.mean, d.se));
                    }
                }
            }
        }
    }
    let pass = bound_violations.is_empty() && order_violations.is_empty();
    report(
        5,
        "GraDe/ML variances above the bound; ML <= GraDe for theta2 >= 0.15",
        pass,
        &format!(
            "{points} points x 500 reps, {failures} failed fits, below bound: {:?}, ML > GraDe: {:?}",
            bound_violations, order_violations
        ),
    );
    assert!(pass);
}

fn md_row<'a>(rows: &'a [MdRow], scenario: &str, estimator: &str) -> &'a MdRow {
    rows.iter().find(|r| r.scenario == scenario && r.estimator == estimator).unwrap()
}

#[test]
fn criterion_06_more_graphs_help_under_graph_errors() {
    let cfg = ExperimentConfig::from_toml("seed = 2024\nreps = 200\nn = [500]").unwrap();
    let rows = run_fig1(&cfg).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for m in 1..=4 {
        let s = format!("fig1-model{m}");
        let (g1, g2, g3) = (md_row(&rows, &s, "gamma1"), md_row(&rows, &s, "gamma2"), md_row(&rows, &s, "gamma3"));
        if m >= 3 {
            let separated = g2.mean_scaled_md + 2.0 * g2.se_scaled_md < g1.mean_scaled_md - 2.0 * g1.se_scaled_md;
            pass &= separated;
        }
        // "within 2×" as two "≤" comparisons on paired samples
        let scaled = |r: &MdRow, c: f64| r.samples.iter().map(|v| v.map(|x| c * x)).collect::<Vec<_>>();
        let (upper, _) = weakly_below(&g3.samples, &scaled(g2, 2.0));
        let (lower, _) = weakly_below(&g2.samples, &scaled(g3, 2.0));
        pass &= upper && lower;
        let ratio = g3.mean_scaled_md / g2.mean_scaled_md;
        detail.push(format!(
            "model {m}: G1 {:.0}±{:.0}, G2 {:.0}±{:.0}, G3 {:.0}±{:.0}, G3/G2 {ratio:.2}",
            g1.mean_scaled_md, g1.se_scaled_md, g2.mean_scaled_md, g2.se_scaled_md, g3.mean_scaled_md, g3.se_scaled_md
        ));
    }
    report(6, "G2 below G1 in models 3-4, G3 within 2x of G2", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_composite_methods_orderings() {
    let cfg = ExperimentConfig::from_toml("seed = 2024\nreps = 200\nn = [1000]").unwrap();
    let rows = run_fig3(&cfg).unwrap();
    let singles = ["grade", "jade", "fastica_sq"];
    let composites = ["graph_jade", "graph_fastica"];
    let samples = |m: &str, e: &str| md_row(&rows, &format!("fig3-{m}"), e).samples.clone();
    let mean = |m: &str, e: &str| md_row(&rows, &format!("fig3-{m}"), e).mean_scaled_md;
    let mut checks: Vec<(String, bool)> = Vec::new();
    for c in composites {
        for s in singles {
            let (ok, d) = strictly_below(&samples("M4", c), &samples("M4", s));
            checks.push((format!("M4 {c}<{s} ({:.0}±{:.0})", d.mean, d.se), ok));
            let (ok, d) = weakly_below(&samples("M1", c), &samples("M1", s));
            checks.push((format!("M1 {c}<={s} ({:.0}±{:.0})", d.mean, d.se), ok));
        }
        let rel = (mean("M3", c) - mean("M3", "grade")).abs() / mean("M3", "grade");
        checks.push((format!("M3 {c} vs grade {:.0}%", 100.0 * rel), rel <= 0.25));
    }
    let (ok, d) = weakly_below(&samples("M2", "graph_fastica"), &samples("M2", "jade"));
    checks.push((format!("M2 graph_fastica<=jade ({:.1}±{:.1})", d.mean, d.se), ok));
    let nonconverged: usize = rows.iter().map(|r| r.nonconverged + r.failures).sum();
    let pass = checks.iter().all(|c| c.1);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    let means: Vec<String> = ["M1", "M2", "M3", "M4"]
        .iter()
        .map(|m| {
            let v: Vec<String> =
                singles.iter().chain(&composites).map(|e| format!("{e}={:.0}", mean(m, e))).collect();
            format!("{m}: {}", v.join(" "))
        })
        .collect();
    report(
        7,
        "composite methods dominate in M4, competitive in M1-M3",
        pass,
        &format!("{}; non-converged or failed runs {nonconverged}; failing checks {failed:?}", means.join("; ")),
    );
    assert!(pass, "{checks:?}");
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

/// Minimum over permutations and row scales of `‖C Γ̂Ω − I‖²/(P−1)`, with
/// each scale found by golden-section search.
fn md_scale_search(gamma_hat: &DMatrix<f64>, omega: &DMatrix<f64>) -> f64 {
    let g = gamma_hat * omega;
    let p = g.nrows();
    let row_cost = |r: usize, i: usize| {
        let f = |c: f64| (0..p).map(|k| (c * g[(r, k)] - if k == i { 1.0 } else { 0.0 }).powi(2)).sum::<f64>();
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
fn criterion_08_md_index_exactness() {
    let mut rng = seeded(108);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let omega = randn(4, 4, &mut rng);
        let g = omega.clone().try_inverse().unwrap() + randn(4, 4, &mut rng) * rng.random_range(0.05..0.6);
        worst = worst.max((md_index_raw(&g, &omega).unwrap() - md_scale_search(&g, &omega)).abs());
    }
    let mut class_max: f64 = 0.0;
    for _ in 0..200 {
        let omega = randn(4, 4, &mut rng);
        let gamma = omega.clone().try_inverse().unwrap();
        let mut perm: Vec<usize> = (0..4).collect();
        perm.shuffle(&mut rng);
        let pd = DMatrix::from_fn(4, 4, |i, j| {
            if perm[i] == j {
                let s: f64 = rng.random_range(0.1..10.0);
                if rng.random::<bool>() { s } else { -s }
            } else {
                0.0
            }
        });
        class_max = class_max.max(md_index(&(&pd * &gamma), &omega).unwrap());
    }
    // N(P−1)E D² against N Σ_{i≠j} var(ĝ_ij) for ĝ = I + E/√N
    let (n, p, reps) = (10_000.0f64, 4usize, 2000);
    let eye = DMatrix::<f64>::identity(p, p);
    let mut scaled = 0.0;
    let mut off = 0.0;
    for _ in 0..reps {
        let e = randn(p, p, &mut rng);
        let g = &eye + &e / n.sqrt();
        scaled += n * (p as f64 - 1.0) * md_index(&g, &eye).unwrap().powi(2);
        off += (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| e[(i, j)].powi(2)).sum::<f64>();
    }
    let (scaled, off) = (scaled / reps as f64, off / reps as f64);
    let asym = (scaled - off).abs() / off;
    let pass = worst <= 1e-6 && class_max < 1e-7 && asym <= 0.1;
    report(
        8,
        "MD index: exact search vs scale-search oracle, invariance, asymptotic identity",
        pass,
        &format!("max |diff| {worst:.1e} (P=4, 200 instances), class max {class_max:.1e}, asymptotic rel diff {asym:.3}"),
    );
    assert!(pass);
}

fn random_orthogonal(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    randn(p, p, rng).qr().q()
}

/// `max |U V − S|` over the best signed permutation `S`.
fn signed_permutation_distance(m: &DMatrix<f64>) -> f64 {
    let p = m.nrows();
    all_perms(p)
        .iter()
        .map(|perm| {
            (0..p)
                .flat_map(|i| (0..p).map(move |j| (i, j)))
                .map(|(i, j)| {
                    if perm[i] == j {
                        (m[(i, j)].abs() - 1.0).abs()
                    } else {
                        m[(i, j)].abs()
                    }
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn criterion_09_joint_diagonalizer_recovers_planted_basis() {
    let mut rng = seeded(109);
    let mut recovered = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let p = 2 + trial % 5;
        let v = random_orthogonal(p, &mut rng);
        let mats: Vec<DMatrix<f64>> = (0..10)
            .map(|_| {
                let d = DMatrix::from_diagonal(&randn(p, 1, &mut rng).column(0).into_owned());
                &v * d * v.transpose()
            })
            .collect();
        let res = joint_diagonalize(&mats, 1e-14, DEFAULT_MAX_SWEEPS).unwrap();
        let dist = signed_permutation_distance(&(&res.u * &v));
        worst = worst.max(dist);
        if dist < 1e-8 {
            recovered += 1;
        }
    }
    let mut single_ok = true;
    for p in 2..=6 {
        let a = randn(p, p, &mut rng);
        let m = &a + a.transpose();
        let res = joint_diagonalize(std::slice::from_ref(&m), 1e-14, DEFAULT_MAX_SWEEPS).unwrap();
        let mut got: Vec<f64> = (&res.u * &m * res.u.transpose()).diagonal().iter().copied().collect();
        let mut want: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        single_ok &= got.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-10 * (1.0 + y.abs()));
        let eig = m.clone().symmetric_eigen();
        single_ok &= signed_permutation_distance(&(&res.u * &eig.eigenvectors)) < 1e-8;
    }
    let pass = recovered == 100 && single_ok;
    report(
        9,
        "joint diagonalizer recovers planted basis; single matrix = eigendecomposition",
        pass,
        &format!("{recovered}/100 recovered, worst distance {worst:.1e}, single-matrix case {single_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut fig1 = ExperimentConfig::from_toml("seed = 77\nreps = 2\nn = [100]").unwrap();
    fig1.fig1.extra_graphs = 3;
    let mut fig2 = ExperimentConfig::from_toml("seed = 77\nreps = 2\nn = [60]").unwrap();
    fig2.fig2.theta2 = Grid { start: 0.05, stop: 0.15, step: 0.05 };
    fig2.fig2.sbm_p_in = 0.3;
    fig2.fig2.er_eps = 0.15;
    fig2.fig2.geometric_radius = 0.3;
    let mut fig3 = ExperimentConfig::from_toml("seed = 77\nreps = 2\nn = [80]").unwrap();
    fig3.fig3.models = vec![Fig3Model::M1, Fig3Model::M4];
    let custom = ExperimentConfig::from_toml(
        r#"
seed = 77
reps = 2
n = [80]
[custom]
estimators = ["grade", "jade", "graph_fastica", "ml"]
[custom.scenario]
id = "pair"
graphs = [{ kind = "er", eps = 0.1 }, { kind = "geometric", radius = 0.3 }]
sources = [
  { graph = 0, theta = 0.2, innovation = { kind = "student_t", df = 5.0 } },
  { graph = 1, theta = 0.1, innovation = { kind = "uniform" } },
]
"#,
    )
    .unwrap();
    let crb = ExperimentConfig::from_toml("seed = 77\nn = [60]").unwrap();

    type Runner = Box<dyn Fn() -> String>;
    let runs: Vec<(&str, Runner)> = vec![
        ("fig1", Box::new(move || to_csv(&run_fig1(&fig1).unwrap()).unwrap())),
        ("fig2", Box::new(move || to_csv(&run_fig2(&fig2).unwrap()).unwrap())),
        ("fig3", Box::new(move || to_csv(&run_fig3(&fig3).unwrap()).unwrap())),
        ("custom", Box::new(move || to_csv(&run_custom(&custom).unwrap()).unwrap())),
        ("crb_sweep", Box::new(move || to_csv(&crb_sweep(&crb).unwrap()).unwrap())),
    ];
    let mut same = Vec::new();
    for (name, run) in &runs {
        let a = dir.path().join(format!("{name}-a.csv"));
        let b = dir.path().join(format!("{name}-b.csv"));
        std::fs::write(&a, run()).unwrap();
        std::fs::write(&b, run()).unwrap();
        same.push((*name, std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap()));
    }

    // the binary, twice, into separate directories
    let bin = env!("CARGO_BIN_EXE_graphbss");
    let out = |d: &str| {
        let path = dir.path().join(d);
        let status = std::process::Command::new(bin)
            .args(["fig3", "--seed", "5", "--reps", "2", "--n", "60", "--out"])
            .arg(&path)
            .env("RUST_LOG", "error")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path.join("fig3.csv")).unwrap()
    };
    same.push(("cli fig3", out("cli-a") == out("cli-b")));

    let pass = same.iter().all(|s| s.1);
    report(10, "identical config and seed give byte-identical CSV", pass, &format!("{same:?}"));
    assert!(pass);
}
