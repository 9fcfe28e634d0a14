//! Acceptance run: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit if
//! any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use nibr_core::conjugate::{marginal_sigma2, marginal_theta, predictive_row};
use nibr_core::evidence::{compare_priors, default_support, grid_evidence, laplace_evidence};
use nibr_core::fatigue::{
    fit_strain_life, holdout_performance, life_at_pof, lives_from_chain, sample_fit_posterior, LifeMethod,
    PredictiveKind,
};
use nibr_core::fixtures::{fatigue_tests, regression_example, FATIGUE_HOLDOUT, REGRESSION_X, REGRESSION_Y};
use nibr_core::infogeom::{
    ali_exponent, fisher_info_numeric, fisher_monte_carlo, gaussian_draws, gaussian_mean_sd, gaussian_mean_variance, gaussian_sd,
    gaussian_variance, jeffreys_exponent, kl_hessian_check,
};
use nibr_core::linmodel::{ls_prediction_bounds, ols_fit, Dataset};
use nibr_core::mcmc::{metropolis, sample_posterior, validate_against_analytic, MetropolisOptions, SampleSpace};
use nibr_core::special::log_gamma;
use nibr_core::{limiting_nig_from_q, posterior_update, FDist, InverseGamma, NigParams, SigmaPowerPrior, StudentT};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

/// OLS by the normal equations with an LU solve, independent of the QR path.
struct NormalEquations {
    theta: DVector<f64>,
    gram_inverse: DMatrix<f64>,
    sse: f64,
}

fn normal_equations(x: &DMatrix<f64>, y: &DVector<f64>) -> NormalEquations {
    let gram = x.transpose() * x;
    let gram_inverse = gram.clone().try_inverse().expect("full-rank design");
    let theta = gram.lu().solve(&(x.transpose() * y)).expect("full-rank design");
    let r = y - x * &theta;
    NormalEquations { theta, gram_inverse, sse: r.dot(&r) }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn max_rel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / b.amax()
}

fn polynomial_rows(n: usize, degree: usize) -> Dataset {
    let x = DMatrix::from_fn(n, degree + 1, |i, j| REGRESSION_X[i].powi(j as i32));
    Dataset::new(x, DVector::from_column_slice(&REGRESSION_Y[..n])).unwrap()
}

fn first_rows(n: usize) -> Dataset {
    regression_example().select_rows(&(0..n).collect::<Vec<_>>()).unwrap()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn c1_limiting_hyperparameters() -> Outcome {
    let mut worst = 0.0f64;
    let mut exact = true;
    let mut cases = 0;
    for (n, k) in [(6, 2), (8, 2), (10, 3)] {
        let data = polynomial_rows(n, k - 1);
        let oracle = normal_equations(data.design(), data.response());
        for q in 0..=5 {
            let q = q as f64;
            let prior = limiting_nig_from_q(q, k);
            let post = posterior_update(&prior, &data).map_err(e)?;
            let alpha = (q - k as f64 - 2.0) / 2.0;
            exact &= prior.alpha == alpha && post.alpha_star == alpha + n as f64 / 2.0;
            worst = worst
                .max(rel(post.beta_star, oracle.sse / 2.0))
                .max(max_rel_matrix(&post.sigma_star, &oracle.gram_inverse));
            cases += 1;
        }
    }
    Ok((exact && worst <= 1e-12, format!("{cases} cases, α and α* exact: {exact}, max rel err β*/Σ* {worst:.1e}")))
}

fn c2_jeffreys_marginals() -> Outcome {
    let data = first_rows(6);
    let oracle = normal_equations(data.design(), data.response());
    let post = posterior_update(&limiting_nig_from_q(2.0, 2), &data).map_err(e)?;
    let ig = marginal_sigma2(&post).map_err(e)?;
    let t = marginal_theta(&post).map_err(e)?;
    let scale = &oracle.gram_inverse * (oracle.sse / 4.0);
    let err = rel(ig.beta(), oracle.sse / 2.0)
        .max((t.location() - &oracle.theta).amax() / oracle.theta.amax())
        .max(max_rel_matrix(t.scale(), &scale));
    let shapes = ig.alpha() == 2.0 && t.dof() == 4.0;
    Ok((shapes && err <= 1e-12, format!("IG shape {}, t dof {}, max rel err {err:.1e}", ig.alpha(), t.dof())))
}

fn c3_mcmc_agreement() -> Outcome {
    let data = first_rows(6);
    let (lo, hi) = default_support(&data).map_err(e)?;
    let prior = SigmaPowerPrior::new(2.0, lo, hi).map_err(e)?;
    let post = posterior_update(&limiting_nig_from_q(2.0, 2), &data).map_err(e)?;
    let chain = sample_posterior(&data, &prior, &post, 205_000, 5_000, 20240).map_err(e)?;
    let report = validate_against_analytic(&chain, &post).map_err(e)?;
    let worst_theta = report.ks_theta.iter().cloned().fold(0.0, f64::max);
    let pass = chain.len() == 200_000 && report.ks_sigma2 < 0.02 && worst_theta < 0.02;
    Ok((
        pass,
        format!(
            "{} draws, acceptance {:.3}, KS σ² {:.4}, KS θ {:?}",
            chain.len(),
            chain.acceptance_rate,
            report.ks_sigma2,
            report.ks_theta.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
        ),
    ))
}

fn c4_laplace_vs_grid() -> Outcome {
    let data = first_rows(6);
    let (lo, hi) = default_support(&data).map_err(e)?;
    let post = posterior_update(&limiting_nig_from_q(2.0, 2), &data).map_err(e)?;
    let ln_det = post.sigma_star.determinant().ln();
    let mut pass = true;
    let mut parts = Vec::new();
    for q in [0.0, 2.0, 4.0] {
        let prior = SigmaPowerPrior::new(q, lo, hi).map_err(e)?;
        let laplace = laplace_evidence(&data, &prior, None).map_err(e)?.log_evidence;
        let grid = grid_evidence(&data, &prior, None, 256).map_err(e)?;
        // untruncated closed form, printed for diagnosis only
        let a = (q + 6.0 - 2.0) / 2.0 - 1.0;
        let closed = -prior.ln_normalizer() + (2.0 - 6.0) / 2.0 * (2.0 * std::f64::consts::PI).ln()
            + 0.5 * ln_det
            + log_gamma(a).map_err(e)?
            - a * (post.sse / 2.0).ln();
        let gap = (laplace - grid.log_evidence).abs();
        pass &= gap <= 0.05 && grid.delta.abs() <= 1e-3;
        parts.push(format!(
            "q={q}: laplace {laplace:.4} grid {:.4} (ladder Δ {:.1e}) closed form {closed:.4} |gap| {gap:.3}",
            grid.log_evidence, grid.delta
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn c5_regression_ranking() -> Outcome {
    let q_list: Vec<f64> = (0..=5).map(f64::from).collect();
    let full = regression_example();
    let fit6 = compare_priors(&first_rows(6), &full.select_rows(&[6]).map_err(e)?, &q_list, None).map_err(e)?;
    let mut pass = fit6.best_fit_q == 2.0 && fit6.best_pred_q == 2.0;
    let mut pairs = 0;
    let mut off = Vec::new();
    for n in 6..=8 {
        for m in 0..=5 {
            if n + m > full.n() {
                continue;
            }
            let future = full.select_rows(&(n..n + m).collect::<Vec<_>>()).map_err(e)?;
            let c = compare_priors(&first_rows(n), &future, &q_list, None).map_err(e)?;
            for ranked in [c.ranked_fit(), c.ranked_pred()] {
                let mut top = [ranked[0], ranked[1]];
                top.sort_by(f64::total_cmp);
                if top != [1.0, 2.0] {
                    off.push(format!("(n={n},m={m}) top-2 {top:?}"));
                }
            }
            pairs += 1;
        }
    }
    pass &= off.is_empty();
    Ok((
        pass,
        format!(
            "n=6 best fit q {} best pred q {}; {pairs} feasible (n,m) pairs, top-2 mismatches: {}",
            fit6.best_fit_q,
            fit6.best_pred_q,
            if off.is_empty() { "none".to_string() } else { off.join(", ") }
        ),
    ))
}

fn c6_fatigue_ranking() -> Outcome {
    let q_list: Vec<f64> = (0..=5).map(f64::from).collect();
    let c = holdout_performance(&fatigue_tests(), &[FATIGUE_HOLDOUT], &q_list).map_err(e)?;
    Ok((
        c.best_fit_q == 2.0 && c.best_pred_q == 2.0,
        format!("best fit q {}, best joint-predictive q {}", c.best_fit_q, c.best_pred_q),
    ))
}

fn c7_fatigue_reliability() -> Outcome {
    let fit = fit_strain_life(&fatigue_tests(), 2.0, &[FATIGUE_HOLDOUT]).map_err(e)?;
    let strains: Vec<f64> = (1..=50).map(|i| 10f64.powf(-4.0 + 3.0 * i as f64 / 51.0)).collect();
    let pof = 1e-5;
    let kind = PredictiveKind::MeanResponse;
    let mut bayes = Vec::new();
    let mut ls = Vec::new();
    for &s in &strains {
        bayes.push(life_at_pof(&fit, s, pof, LifeMethod::Bayes, kind).map_err(e)?);
        ls.push(life_at_pof(&fit, s, pof, LifeMethod::LeastSquares, kind).map_err(e)?);
    }
    let chain = sample_fit_posterior(&fit, 205_000, 5_000, 7).map_err(e)?;
    let mc = lives_from_chain(&chain, &strains, pof, kind, 8).map_err(e)?;
    let analytic_order = bayes.iter().zip(&ls).all(|(b, l)| b > l);
    let mc_order = mc.iter().zip(&ls).all(|(b, l)| b > l);
    let worst = mc.iter().zip(&bayes).map(|(m, a)| (m / a - 1.0).abs()).fold(0.0, f64::max);
    // agreement at a less extreme level, for context
    let mc_01 = lives_from_chain(&chain, &strains, 0.01, kind, 8).map_err(e)?;
    let mut worst_01 = 0.0f64;
    for (s, m) in strains.iter().zip(&mc_01) {
        let a = life_at_pof(&fit, *s, 0.01, LifeMethod::Bayes, kind).map_err(e)?;
        worst_01 = worst_01.max((m / a - 1.0).abs());
    }
    let min_ratio = bayes.iter().zip(&ls).map(|(b, l)| b / l).fold(f64::INFINITY, f64::min);
    Ok((
        analytic_order && mc_order && worst <= 0.02,
        format!(
            "{} draws; Bayes > LS at all 50 strains: analytic {analytic_order}, chain {mc_order} (min ratio {min_ratio:.3}); \
             chain vs analytic max rel diff {worst:.4} at POF 1e-5 ({worst_01:.4} at POF 0.01)",
            chain.len()
        ),
    ))
}

fn c8_interval_coincidence() -> Outcome {
    let data = first_rows(6);
    let fit = ols_fit(&data).map_err(e)?;
    let post = posterior_update(&limiting_nig_from_q(2.0, 2), &data).map_err(e)?;
    let mut worst = 0.0f64;
    let mut points = 0;
    for i in 0..=40 {
        let x = DVector::from_vec(vec![1.0, -0.5 + 0.05 * i as f64]);
        let t = predictive_row(&post, &x, true).map_err(e)?;
        let b = ls_prediction_bounds(&fit, &data, &x, 0.05, false).map_err(e)?;
        worst = worst
            .max((t.quantile(0.025).map_err(e)? - b.lower).abs())
            .max((t.quantile(0.975).map_err(e)? - b.upper).abs());
        points += 1;
    }
    Ok((worst <= 1e-10, format!("{points} points, max endpoint diff {worst:.1e}")))
}

fn c9_information_geometry() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mv = gaussian_mean_variance();
    let info = fisher_info_numeric(&mv, &[0.0, 1.0]).map_err(e)?;
    let off = info.matrix[(0, 1)].abs().max(info.matrix[(1, 0)].abs());
    pass &= off <= 1e-6;
    notes.push(format!("off-diagonal {off:.1e}"));

    let mut form = 0.0f64;
    let mut kl = 0.0f64;
    for (f, p) in [
        (gaussian_mean_variance(), vec![0.0, 1.0]),
        (gaussian_mean_variance(), vec![0.5, 2.5]),
        (gaussian_mean_sd(), vec![0.0, 1.0]),
        (gaussian_variance(0.0), vec![3.0]),
        (gaussian_sd(0.0), vec![0.7]),
    ] {
        form = form.max(fisher_info_numeric(&f, &p).map_err(e)?.max_rel_diff);
        kl = kl.max(kl_hessian_check(&f, &p).map_err(e)?.max_abs_diff);
    }
    pass &= form <= 1e-4 && kl <= 1e-4;
    notes.push(format!("score vs Hessian {form:.1e}, KL Hessian vs Fisher {kl:.1e}"));

    let cases: [(&str, f64, Result<f64, String>); 6] = [
        ("Jeffreys (μ,σ²)", 3.0, jeffreys_exponent(&mv, &["mu", "sigma2"]).map(|f| f.exponent).map_err(e)),
        ("Jeffreys σ²", 2.0, jeffreys_exponent(&mv, &["sigma2"]).map(|f| f.exponent).map_err(e)),
        ("Jeffreys (μ,σ)", 2.0, jeffreys_exponent(&gaussian_mean_sd(), &["mu", "sigma"]).map(|f| f.exponent).map_err(e)),
        ("ALI σ", 3.0, ali_exponent(&gaussian_sd(0.0), &["sigma"]).map(|f| f.exponent).map_err(e)),
        ("ALI σ²", 4.0, ali_exponent(&gaussian_variance(0.0), &["sigma2"]).map(|f| f.exponent).map_err(e)),
        ("ALI (μ,σ)", 5.0, ali_exponent(&gaussian_mean_sd(), &["mu", "sigma"]).map(|f| f.exponent).map_err(e)),
    ];
    for (name, want, got) in cases {
        let got = got?;
        pass &= (got - want).abs() <= 1e-6;
        notes.push(format!("{name} {got:.9}"));
    }

    let draws = gaussian_draws(0.0, 1.0, 1_000_000, 2024).map_err(e)?;
    let mc = fisher_monte_carlo(&mv, &[0.0, 1.0], &draws).map_err(e)?;
    let se = (2.5f64 / 1e6).sqrt();
    pass &= (mc[(1, 1)] - info.matrix[(1, 1)]).abs() <= 5.0 * se;
    notes.push(format!(
        "(σ²,σ²) entry at σ=1: quadrature {:.6}, Monte Carlo {:.4} ± {se:.4}, 2/σ⁴ form gives 2",
        info.matrix[(1, 1)],
        mc[(1, 1)]
    ));
    Ok((pass, notes.join("; ")))
}

fn property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
    failures: &mut Vec<String>,
) {
    let mut runner = TestRunner::new(Config { cases: 64, ..Config::default() });
    if let Err(err) = runner.run(&strategy, test) {
        failures.push(format!("{name}: {err}"));
    }
}

fn random_dataset() -> impl Strategy<Value = Dataset> {
    (4usize..12, prop::collection::vec(-2.0f64..2.0, 24), prop::collection::vec(-1.0f64..1.0, 12)).prop_map(
        |(n, xs, noise)| {
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] + 0.3 * i as f64 });
            let y = DVector::from_fn(n, |i, _| 0.5 - 1.2 * x[(i, 1)] + noise[i]);
            Dataset::new(x, y).unwrap()
        },
    )
}

fn c10_property_suites() -> Outcome {
    let mut failures = Vec::new();

    property(
        "conjugacy closure",
        (random_dataset(), 0.0f64..6.0),
        |(data, q)| {
            let prior = limiting_nig_from_q(q, 2);
            let Ok(post) = posterior_update(&prior, &data) else { return Ok(()) };
            let again = posterior_update(&post.as_prior().unwrap(), &Dataset::empty(2)).unwrap();
            prop_assert!(again.alpha_star == post.alpha_star && (again.beta_star - post.beta_star).abs() <= 1e-12 * post.beta_star);
            prop_assert!(post.alpha_star > 0.0 && post.beta_star > 0.0);
            Ok(())
        },
        &mut failures,
    );

    property(
        "sequential = batch",
        (random_dataset(), random_dataset(), 2.0f64..6.0),
        |(a, b, q)| {
            let prior = limiting_nig_from_q(q, 2);
            let Ok(first) = posterior_update(&prior, &a) else { return Ok(()) };
            let seq = posterior_update(&first.as_prior().unwrap(), &b).unwrap();
            let batch = posterior_update(&prior, &a.concat(&b).unwrap()).unwrap();
            prop_assert!((seq.alpha_star - batch.alpha_star).abs() <= 1e-12 * batch.alpha_star.abs().max(1.0));
            prop_assert!((seq.beta_star - batch.beta_star).abs() <= 1e-9 * batch.beta_star);
            prop_assert!((&seq.mu_star - &batch.mu_star).amax() <= 1e-9 * (1.0 + batch.mu_star.amax()));
            Ok(())
        },
        &mut failures,
    );

    property(
        "limiting consistency",
        (random_dataset(), 4.5f64..8.0),
        |(data, q)| {
            let limit = posterior_update(&limiting_nig_from_q(q, 2), &data).unwrap();
            let eps = 1e-10;
            let alpha = (q - 4.0) / 2.0;
            let proper = NigParams::proper(DVector::zeros(2), DMatrix::identity(2, 2) / eps, alpha, eps).unwrap();
            let p = posterior_update(&proper, &data).unwrap();
            prop_assert!((p.beta_star - limit.beta_star).abs() <= 1e-6 * (1.0 + limit.beta_star));
            prop_assert!((&p.mu_star - &limit.mu_star).amax() <= 1e-6 * (1.0 + limit.mu_star.amax()));
            Ok(())
        },
        &mut failures,
    );

    property(
        "quantile round trips",
        (0.5f64..30.0, 0.1f64..10.0, 1e-6f64..(1.0 - 1e-6)),
        |(a, b, p)| {
            let ig = InverseGamma::new(a, b).unwrap();
            let t = StudentT::new(a, b, b).unwrap();
            let f = FDist::new(a, b + 1.0).unwrap();
            for cdf in [ig.cdf(ig.quantile(p).unwrap()).unwrap(), t.cdf(t.quantile(p).unwrap()), f.cdf(f.quantile(p).unwrap()).unwrap()] {
                prop_assert!((cdf - p).abs() <= 1e-9 * p.min(1.0 - p).max(1e-3), "{cdf} vs {p}");
            }
            Ok(())
        },
        &mut failures,
    );

    property(
        "determinism by seed",
        any::<u64>(),
        |seed| {
            let opts = MetropolisOptions { draws: 300, burn_in: 50, seed, space: SampleSpace::LogVariance };
            let target = |v: &DVector<f64>| -0.5 * v[0] * v[0] - v[1].ln() - 1.0 / v[1];
            let init = DVector::from_vec(vec![0.0, 1.0]);
            let scales = DVector::from_vec(vec![1.0, 0.5]);
            let a = metropolis(target, &init, &scales, opts).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let b = metropolis(target, &init, &scales, opts).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(a.samples == b.samples && a.acceptance_rate == b.acceptance_rate);
            Ok(())
        },
        &mut failures,
    );

    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "closure, sequential=batch, limiting consistency, quantile round trips, seed determinism: 64 cases each".into()
        } else {
            failures.join("; ")
        },
    ))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: "C1", name: "limiting NIG hyperparameters", budget: Duration::from_secs(1), run: c1_limiting_hyperparameters },
        Criterion { id: "C2", name: "q=2 marginals on six rows", budget: Duration::from_secs(1), run: c2_jeffreys_marginals },
        Criterion { id: "C3", name: "Metropolis vs closed-form marginals", budget: Duration::from_secs(60), run: c3_mcmc_agreement },
        Criterion { id: "C4", name: "Laplace vs grid evidence", budget: Duration::from_secs(120), run: c4_laplace_vs_grid },
        Criterion { id: "C5", name: "prior ranking, regression example", budget: Duration::from_secs(600), run: c5_regression_ranking },
        Criterion { id: "C6", name: "prior ranking, fatigue data", budget: Duration::from_secs(120), run: c6_fatigue_ranking },
        Criterion { id: "C7", name: "fatigue reliability ordering", budget: Duration::from_secs(300), run: c7_fatigue_reliability },
        Criterion { id: "C8", name: "LS and Bayesian interval coincidence", budget: Duration::from_secs(60), run: c8_interval_coincidence },
        Criterion { id: "C9", name: "information geometry", budget: Duration::from_secs(60), run: c9_information_geometry },
        Criterion { id: "C10", name: "property suites", budget: Duration::from_secs(300), run: c10_property_suites },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_budget, detail),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {} {}: {} ({:.2} s, budget {} s{})",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            if in_budget { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
