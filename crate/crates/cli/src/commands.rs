//! Command dispatch and report assembly.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use nibr_core::conjugate::{marginal_sigma2, marginal_theta, predictive_row};
use nibr_core::evidence::{compare_priors_with, default_support, grid_evidence, laplace_evidence};
use nibr_core::fatigue::{
    fit_strain_life, life_at_pof, lives_from_chain, sample_fit_posterior, strain_life_dataset, LifeMethod,
    PredictiveKind,
};
use nibr_core::infogeom::{
    ali_exponent, fisher_info_numeric, fisher_monte_carlo, gaussian_draws, gaussian_mean_sd, gaussian_mean_variance,
    gaussian_sd, gaussian_variance, jeffreys_exponent, kl_hessian_check, ParamFamily, FORM_AGREEMENT, POWER_LAW_TOL,
};
use nibr_core::linmodel::{ls_prediction_bounds, ols_fit};
use nibr_core::mcmc::{effective_sample_size, sample_posterior, validate_against_analytic, RNG_NAME};
use nibr_core::{
    limiting_nig_from_q, posterior_update, DMatrix, DVector, Dataset, PriorNormalization, SigmaPowerPrior,
};

use crate::args::{Cli, Command, Format, Normalization, Predictive};
use crate::error::{CliError, CliResult, ErrorObject};
use crate::input::{fatigue_records, parse_index_list, parse_points, read_table_path, regression_dataset};
use crate::json;
use crate::report::{cell, CsvTable, Report, Status, TOOL};

/// Environment variable naming the directory for relative output paths.
pub const OUTPUT_DIR_ENV: &str = "NIBR_OUTPUT_DIR";

const DEFAULT_MCMC_DRAWS: usize = 205_000;
const DEFAULT_INFO_DRAWS: usize = 1_000_000;
const DEFAULT_FATIGUE_HOLDOUT: &str = "6";

/// Report plus the text to write for it.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub text: String,
    pub exit_code: i32,
}

struct CommandOutput {
    result: Value,
    table: CsvTable,
    plot: Option<String>,
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Map<String, Value>,
}

impl Ctx<'_> {
    fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.config.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn values(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn one_based(idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|i| i + 1).collect()
}

fn normalization(n: Normalization) -> PriorNormalization {
    match n {
        Normalization::Variance => PriorNormalization::Variance,
        Normalization::Scale => PriorNormalization::Scale,
    }
}

fn gamma(ctx: &mut Ctx) -> CliResult<f64> {
    let level = ctx.cli.opts.level;
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("--level must lie in (0, 1), got {level}")));
    }
    ctx.set("level", level);
    Ok(1.0 - level)
}

fn exponent(ctx: &mut Ctx) -> CliResult<f64> {
    let q = ctx.cli.opts.q;
    if !q.is_finite() {
        return Err(CliError::Config(format!("--q must be finite, got {q}")));
    }
    ctx.set("q", q);
    Ok(q)
}

fn data_path(ctx: &mut Ctx) -> CliResult<PathBuf> {
    let path = ctx.cli.opts.data.clone().ok_or_else(|| CliError::Config("--data is required".into()))?;
    ctx.set("data", path.display().to_string());
    Ok(path)
}

/// Whole dataset and the selected 0-based rows.
fn load_regression(ctx: &mut Ctx) -> CliResult<(Dataset, Vec<usize>)> {
    let path = data_path(ctx)?;
    let table = read_table_path(&path)?;
    let intercept = ctx.cli.opts.intercept;
    let data = regression_dataset(&table, intercept)?;
    let rows = match &ctx.cli.opts.rows {
        Some(text) => parse_index_list(text, data.n())?,
        None => (0..data.n()).collect(),
    };
    if rows.is_empty() {
        return Err(CliError::Config("row selection is empty".into()));
    }
    ctx.set("intercept", intercept);
    ctx.set("rows", one_based(&rows));
    Ok((data, rows))
}

fn selected(ctx: &mut Ctx) -> CliResult<Dataset> {
    let (full, rows) = load_regression(ctx)?;
    let data = full.select_rows(&rows)?;
    ctx.set("n", data.n());
    ctx.set("k", data.k());
    Ok(data)
}

fn support(ctx: &mut Ctx, data: &Dataset) -> CliResult<(f64, f64)> {
    let (lo, hi, source) = match (ctx.cli.opts.sigma_min, ctx.cli.opts.sigma_max) {
        (Some(lo), Some(hi)) => {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(CliError::Config(format!("need 0 < --sigma-min < --sigma-max < inf, got ({lo}, {hi})")));
            }
            (lo, hi, "flags")
        }
        _ => {
            let (lo, hi) = default_support(data)?;
            (lo, hi, "default")
        }
    };
    ctx.set("sigma_support", [lo, hi]);
    ctx.set("sigma_support_source", source);
    ctx.set("normalization", ctx.cli.opts.normalization);
    Ok((lo, hi))
}

fn prior(ctx: &Ctx, q: f64, (lo, hi): (f64, f64)) -> CliResult<SigmaPowerPrior> {
    Ok(SigmaPowerPrior::with_normalization(q, lo, hi, normalization(ctx.cli.opts.normalization))?)
}

fn predictive_kind(ctx: &mut Ctx, default: Predictive) -> Predictive {
    let kind = ctx.cli.opts.predictive.unwrap_or(default);
    ctx.set("predictive", kind);
    kind
}

/// Regressor values and design rows of the prediction points.
fn prediction_points(ctx: &mut Ctx, data: &Dataset) -> CliResult<Vec<(Vec<f64>, DVector<f64>)>> {
    let offset = usize::from(ctx.cli.opts.intercept);
    let p = data.k() - offset;
    let raw = match &ctx.cli.opts.at {
        Some(text) => parse_points(text)?,
        None if p == 1 => {
            let xs = data.design().column(offset);
            let (lo, hi) = (xs.min(), xs.max());
            let m = ctx.cli.opts.points;
            if m < 2 || !(hi > lo) {
                return Err(CliError::Config("default prediction grid needs --points >= 2 and a nonconstant regressor".into()));
            }
            (0..m).map(|i| vec![lo + (hi - lo) * i as f64 / (m - 1) as f64]).collect()
        }
        None => return Err(CliError::Config("--at is required with more than one regressor".into())),
    };
    if raw.is_empty() {
        return Err(CliError::Config("no prediction points".into()));
    }
    if let Some(bad) = raw.iter().find(|r| r.len() != p) {
        return Err(CliError::Config(format!("prediction point {bad:?} needs {p} regressor value(s)")));
    }
    ctx.set("at", &raw);
    Ok(raw
        .into_iter()
        .map(|r| {
            let mut row = vec![1.0; offset];
            row.extend(&r);
            (r, DVector::from_vec(row))
        })
        .collect())
}

fn check_draws(ctx: &mut Ctx, default: usize) -> CliResult<(usize, usize)> {
    let draws = ctx.cli.opts.draws.unwrap_or(default);
    let burn_in = ctx.cli.opts.burn_in;
    if draws <= burn_in {
        return Err(CliError::Config(format!("--draws ({draws}) must exceed --burn-in ({burn_in})")));
    }
    ctx.set("draws", draws);
    ctx.set("burn_in", burn_in);
    ctx.set("seed", ctx.cli.opts.seed);
    ctx.set("rng", RNG_NAME);
    Ok((draws, burn_in))
}

fn fit(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let g = gamma(ctx)?;
    let data = selected(ctx)?;
    let q = exponent(ctx)?;
    let nig = limiting_nig_from_q(q, data.k());
    let post = posterior_update(&nig, &data)?;
    let ig = marginal_sigma2(&post)?;
    let t = marginal_theta(&post)?;
    let ols = ols_fit(&data)?;
    let mut table = CsvTable::new(&["parameter", "estimate", "lower", "upper"]);
    let mut intervals = Vec::new();
    for j in 0..data.k() {
        let m = t.marginal(j)?;
        let (lo, hi) = (m.quantile(g / 2.0)?, m.quantile(1.0 - g / 2.0)?);
        intervals.push([lo, hi]);
        table.push(vec![format!("theta_{}", j + 1), cell(post.mu_star[j]), cell(lo), cell(hi)]);
    }
    let s2 = [ig.quantile(g / 2.0)?, ig.quantile(1.0 - g / 2.0)?];
    table.push(vec!["sigma2".into(), cell(ig.mode()), cell(s2[0]), cell(s2[1])]);
    let result = json!({
        "prior": { "q": q, "alpha": nig.alpha, "beta": nig.beta, "limiting": true },
        "posterior": {
            "mu_star": values(&post.mu_star),
            "sigma_star": rows_of(&post.sigma_star),
            "alpha_star": post.alpha_star,
            "beta_star": post.beta_star,
            "sse": post.sse,
        },
        "marginal_sigma2": {
            "distribution": "inverse_gamma",
            "shape": ig.alpha(),
            "scale": ig.beta(),
            "mode": ig.mode(),
            "mean": ig.mean(),
            "interval": s2,
        },
        "marginal_theta": {
            "distribution": "multivariate_t",
            "dof": t.dof(),
            "location": values(t.location()),
            "scale": rows_of(t.scale()),
            "intervals": intervals,
        },
        "least_squares": {
            "theta_hat": values(&ols.theta_hat),
            "residual_variance": ols.residual_variance()?,
            "residual_dof": ols.residual_dof()?,
        },
    });
    Ok(CommandOutput { result, table, plot: None })
}

fn predict(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let g = gamma(ctx)?;
    let data = selected(ctx)?;
    let q = exponent(ctx)?;
    let kind = predictive_kind(ctx, Predictive::Observation);
    let post = posterior_update(&limiting_nig_from_q(q, data.k()), &data)?;
    let points = prediction_points(ctx, &data)?;
    let mut out = Vec::new();
    let mut table = CsvTable::new(&["grid_x", "center", "lower", "upper"]);
    for (raw, x) in &points {
        let t = predictive_row(&post, x, kind == Predictive::Observation)?;
        let (lo, hi) = (t.quantile(g / 2.0)?, t.quantile(1.0 - g / 2.0)?);
        table.push(vec![cell(raw[0]), cell(t.location()), cell(lo), cell(hi)]);
        out.push(json!({ "x": raw, "center": t.location(), "lower": lo, "upper": hi, "scale": t.scale(), "dof": t.dof() }));
    }
    let plot = Some(table.render());
    Ok(CommandOutput { result: json!({ "points": out }), table, plot })
}

fn ls_compare(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let g = gamma(ctx)?;
    let data = selected(ctx)?;
    let q = exponent(ctx)?;
    let post = posterior_update(&limiting_nig_from_q(q, data.k()), &data)?;
    let ols = ols_fit(&data)?;
    let points = prediction_points(ctx, &data)?;
    let mut table = CsvTable::new(&["band", "grid_x", "center", "lower", "upper"]);
    let mut out = Vec::new();
    let mut gap = 0.0f64;
    for (raw, x) in &points {
        let pointwise = ls_prediction_bounds(&ols, &data, x, g, false)?;
        let simultaneous = ls_prediction_bounds(&ols, &data, x, g, true)?;
        let obs = predictive_row(&post, x, true)?;
        let mean = predictive_row(&post, x, false)?;
        let obs_b = [obs.quantile(g / 2.0)?, obs.quantile(1.0 - g / 2.0)?];
        let mean_b = [mean.quantile(g / 2.0)?, mean.quantile(1.0 - g / 2.0)?];
        gap = gap.max((obs_b[0] - pointwise.lower).abs()).max((obs_b[1] - pointwise.upper).abs());
        for (band, c, lo, hi) in [
            ("ls_pointwise", pointwise.center, pointwise.lower, pointwise.upper),
            ("ls_simultaneous", simultaneous.center, simultaneous.lower, simultaneous.upper),
            ("bayes_observation", obs.location(), obs_b[0], obs_b[1]),
            ("bayes_mean_response", mean.location(), mean_b[0], mean_b[1]),
        ] {
            table.push(vec![band.into(), cell(raw[0]), cell(c), cell(lo), cell(hi)]);
        }
        out.push(json!({
            "x": raw,
            "ls_pointwise": pointwise,
            "ls_simultaneous": simultaneous,
            "bayes_observation": { "center": obs.location(), "lower": obs_b[0], "upper": obs_b[1] },
            "bayes_mean_response": { "center": mean.location(), "lower": mean_b[0], "upper": mean_b[1] },
        }));
    }
    let plot = Some(table.render());
    let result = json!({ "points": out, "max_endpoint_gap_bayes_observation_vs_ls_pointwise": gap });
    Ok(CommandOutput { result, table, plot })
}

fn evidence(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let data = selected(ctx)?;
    let q = exponent(ctx)?;
    let s = support(ctx, &data)?;
    let p = prior(ctx, q, s)?;
    let resolution = ctx.cli.opts.grid_resolution;
    ctx.set("grid_resolution", resolution);
    let laplace = laplace_evidence(&data, &p, None)?;
    let grid = grid_evidence(&data, &p, None, resolution)?;
    let mut table = CsvTable::new(&["method", "log_evidence"]);
    table.push(vec!["laplace".into(), cell(laplace.log_evidence)]);
    table.push(vec!["grid".into(), cell(grid.log_evidence)]);
    let result = json!({
        "laplace": {
            "log_evidence": laplace.log_evidence,
            "log_joint_at_mode": laplace.log_joint_at_mode,
            "mode": values(&laplace.mode),
            "covariance": rows_of(&laplace.covariance),
        },
        "grid": grid,
        "laplace_minus_grid": laplace.log_evidence - grid.log_evidence,
    });
    Ok(CommandOutput { result, table, plot: None })
}

fn q_list(ctx: &mut Ctx) -> CliResult<Vec<f64>> {
    let list = ctx.cli.opts.q_list.clone();
    if list.is_empty() || list.iter().any(|q| !q.is_finite()) {
        return Err(CliError::Config("--q-list needs finite exponents".into()));
    }
    ctx.set("q_list", &list);
    Ok(list)
}

fn comparison_output(c: &nibr_core::PriorComparison) -> (Value, CsvTable) {
    let mut table = CsvTable::new(&["q", "log_evidence", "log_joint_predictive", "log_conditional_predictive"]);
    for i in 0..c.q_values.len() {
        table.push(vec![cell(c.q_values[i]), cell(c.log_fit[i]), cell(c.log_joint_pred[i]), cell(c.log_cond_pred[i])]);
    }
    let result = json!({
        "q_values": c.q_values,
        "log_fit": c.log_fit,
        "log_joint_pred": c.log_joint_pred,
        "log_cond_pred": c.log_cond_pred,
        "best_fit_q": c.best_fit_q,
        "best_pred_q": c.best_pred_q,
        "ranked_fit": c.ranked_fit(),
        "ranked_pred": c.ranked_pred(),
        "sigma_support": c.sigma_support,
        "normalization": c.normalization,
    });
    (result, table)
}

fn compare(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let (full, rows) = load_regression(ctx)?;
    let holdout = match &ctx.cli.opts.holdout {
        Some(text) => parse_index_list(text, full.n())?,
        None => Vec::new(),
    };
    ctx.set("holdout", one_based(&holdout));
    let fit_rows: Vec<usize> = rows.into_iter().filter(|r| !holdout.contains(r)).collect();
    let data = full.select_rows(&fit_rows)?;
    let future = full.select_rows(&holdout)?;
    ctx.set("fit_rows", one_based(&fit_rows));
    ctx.set("n", data.n());
    ctx.set("m", future.n());
    ctx.set("k", data.k());
    let qs = q_list(ctx)?;
    let s = support(ctx, &data)?;
    let c = compare_priors_with(&data, &future, &qs, Some(s), normalization(ctx.cli.opts.normalization))?;
    let (result, table) = comparison_output(&c);
    let plot = Some(table.render());
    Ok(CommandOutput { result, table, plot })
}

fn mcmc_check(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let data = selected(ctx)?;
    let q = exponent(ctx)?;
    let (draws, burn_in) = check_draws(ctx, DEFAULT_MCMC_DRAWS)?;
    let s = support(ctx, &data)?;
    let p = prior(ctx, q, s)?;
    let post = posterior_update(&limiting_nig_from_q(q, data.k()), &data)?;
    let chain = sample_posterior(&data, &p, &post, draws, burn_in, ctx.cli.opts.seed)?;
    let ks = validate_against_analytic(&chain, &post)?;
    let k = data.k();
    let mut table = CsvTable::new(&["coordinate", "ks", "ess", "sample_mean", "analytic_mean"]);
    let ig = marginal_sigma2(&post)?;
    let mut ess = Vec::new();
    let mut means = Vec::new();
    for j in 0..=k {
        let c = chain.component(j);
        let e = effective_sample_size(&c);
        let m = c.iter().sum::<f64>() / c.len() as f64;
        let (name, d, analytic) = if j < k {
            (format!("theta_{}", j + 1), ks.ks_theta[j], Some(post.mu_star[j]))
        } else {
            ("sigma2".to_string(), ks.ks_sigma2, ig.mean())
        };
        table.push(vec![name, cell(d), cell(e), cell(m), analytic.map_or(String::new(), cell)]);
        ess.push(e);
        means.push(m);
    }
    let within = ks.ks_sigma2 < ks.critical_95 && ks.ks_theta.iter().all(|d| *d < ks.critical_95);
    let mut buf = Vec::new();
    chain.write_csv(&mut buf).map_err(|e| CliError::Input(e.to_string()))?;
    let result = json!({
        "retained": chain.len(),
        "acceptance_rate": chain.acceptance_rate,
        "warnings": chain.warnings,
        "ks": ks,
        "ess": ess,
        "sample_mean": means,
        "analytic_mean_theta": values(&post.mu_star),
        "analytic_mean_sigma2": ig.mean(),
        "within_ks_critical_95": within,
    });
    Ok(CommandOutput { result, table, plot: Some(String::from_utf8(buf).expect("ASCII CSV")) })
}

fn fatigue(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let path = data_path(ctx)?;
    let records = fatigue_records(&read_table_path(&path)?)?;
    let holdout = parse_index_list(ctx.cli.opts.holdout.as_deref().unwrap_or(DEFAULT_FATIGUE_HOLDOUT), records.len())?;
    ctx.set("holdout", one_based(&holdout));
    let q = exponent(ctx)?;
    let pof = ctx.cli.opts.pof;
    if !(pof > 0.0 && pof < 1.0) {
        return Err(CliError::Config(format!("--pof must lie in (0, 1), got {pof}")));
    }
    ctx.set("pof", pof);
    let kind = match predictive_kind(ctx, Predictive::MeanResponse) {
        Predictive::Observation => PredictiveKind::Observation,
        Predictive::MeanResponse => PredictiveKind::MeanResponse,
    };
    let (lo, hi, m) = (ctx.cli.opts.strain_min, ctx.cli.opts.strain_max, ctx.cli.opts.points);
    if !(lo > 0.0 && lo < hi && m >= 1) {
        return Err(CliError::Config(format!("strain sweep needs 0 < --strain-min < --strain-max and --points >= 1, got ({lo}, {hi}, {m})")));
    }
    ctx.set("strain_range", [lo, hi]);
    ctx.set("points", m);
    // log-spaced, strictly inside the range
    let strains: Vec<f64> = (1..=m).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (m + 1) as f64).exp()).collect();

    let mut fit = fit_strain_life(&records, q, &holdout)?;
    let s = support(ctx, &fit.data)?;
    fit.prior = prior(ctx, q, s)?;
    let held: Vec<_> = holdout.iter().map(|&h| records[h]).collect();
    let future = if held.is_empty() { Dataset::empty(2) } else { strain_life_dataset(&held)? };
    let qs = q_list(ctx)?;
    let c = compare_priors_with(&fit.data, &future, &qs, Some(s), normalization(ctx.cli.opts.normalization))?;

    let chain = match ctx.cli.opts.draws {
        Some(_) => {
            let (draws, burn_in) = check_draws(ctx, 0)?;
            Some(sample_fit_posterior(&fit, draws, burn_in, ctx.cli.opts.seed)?)
        }
        None => None,
    };
    let chain_lives = match &chain {
        Some(ch) => Some(lives_from_chain(ch, &strains, pof, kind, ctx.cli.opts.seed.wrapping_add(1))?),
        None => None,
    };

    let mut header = vec!["strain_amplitude", "bayes", "least_squares"];
    if chain_lives.is_some() {
        header.push("bayes_chain");
    }
    let mut table = CsvTable::new(&header);
    let mut lives = Vec::new();
    let mut exceeds = true;
    for (i, &strain) in strains.iter().enumerate() {
        let b = life_at_pof(&fit, strain, pof, LifeMethod::Bayes, kind)?;
        let l = life_at_pof(&fit, strain, pof, LifeMethod::LeastSquares, kind)?;
        exceeds &= b > l;
        let mut row = vec![cell(strain), cell(b), cell(l)];
        let mut entry = json!({ "strain_amplitude": strain, "bayes": b, "least_squares": l });
        if let Some(cl) = &chain_lives {
            row.push(cell(cl[i]));
            entry["bayes_chain"] = json!(cl[i]);
        }
        table.push(row);
        lives.push(entry);
    }
    let (comparison, _) = comparison_output(&c);
    let result = json!({
        "fit": {
            "n": fit.data.n(),
            "coefficients": values(&fit.posterior.mu_star),
            "alpha_star": fit.posterior.alpha_star,
            "beta_star": fit.posterior.beta_star,
            "sigma_star": rows_of(&fit.posterior.sigma_star),
            "sse": fit.posterior.sse,
        },
        "comparison": comparison,
        "lives": lives,
        "bayes_exceeds_least_squares": exceeds,
        "chain": chain.as_ref().map(|ch| json!({
            "retained": ch.len(),
            "acceptance_rate": ch.acceptance_rate,
            "warnings": ch.warnings,
        })),
    });
    let plot = Some(table.render());
    Ok(CommandOutput { result, table, plot })
}

fn verify_info(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let draws = ctx.cli.opts.draws.unwrap_or(DEFAULT_INFO_DRAWS);
    if draws == 0 {
        return Err(CliError::Config("--draws must be positive".into()));
    }
    ctx.set("draws", draws);
    ctx.set("seed", ctx.cli.opts.seed);
    ctx.set("rng", RNG_NAME);
    let mut table = CsvTable::new(&["check", "value", "expected", "pass"]);
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, expected: f64, pass: bool| {
        table.push(vec![name.into(), cell(value), cell(expected), pass.to_string()]);
        checks.push(json!({ "check": name, "value": value, "expected": expected, "pass": pass }));
    };

    let mv = gaussian_mean_variance();
    let info = fisher_info_numeric(&mv, &[0.0, 1.0])?;
    let off = info.matrix[(0, 1)].abs().max(info.matrix[(1, 0)].abs());
    push("fisher_off_diagonal_mean_variance", off, 0.0, off <= 1e-6);
    let families: [(ParamFamily, Vec<f64>); 4] = [
        (gaussian_mean_variance(), vec![0.0, 1.0]),
        (gaussian_mean_sd(), vec![0.0, 1.0]),
        (gaussian_variance(0.0), vec![1.0]),
        (gaussian_sd(0.0), vec![1.0]),
    ];
    let mut fisher = Vec::new();
    for (f, p) in &families {
        let i = fisher_info_numeric(f, p)?;
        let kl = kl_hessian_check(f, p)?;
        push(&format!("score_vs_hessian_{}", f.name), i.max_rel_diff, 0.0, i.max_rel_diff <= FORM_AGREEMENT);
        push(&format!("kl_hessian_vs_fisher_{}", f.name), kl.max_abs_diff, 0.0, kl.max_abs_diff <= 1e-4);
        fisher.push(json!({
            "family": f.name,
            "params": p,
            "matrix": rows_of(&i.matrix),
            "score_form": rows_of(&i.score_form),
            "kl_hessian": rows_of(&kl.hessian),
        }));
    }
    let exponents = [
        ("jeffreys_mean_variance", 3.0, jeffreys_exponent(&mv, &["mu", "sigma2"])?),
        ("jeffreys_variance", 2.0, jeffreys_exponent(&mv, &["sigma2"])?),
        ("jeffreys_mean_sd", 2.0, jeffreys_exponent(&gaussian_mean_sd(), &["mu", "sigma"])?),
        ("ali_sd", 3.0, ali_exponent(&gaussian_sd(0.0), &["sigma"])?),
        ("ali_variance", 4.0, ali_exponent(&gaussian_variance(0.0), &["sigma2"])?),
        ("ali_mean_sd", 5.0, ali_exponent(&gaussian_mean_sd(), &["mu", "sigma"])?),
    ];
    for (name, want, fit) in &exponents {
        push(name, fit.exponent, *want, (fit.exponent - want).abs() <= POWER_LAW_TOL);
    }
    let sample = gaussian_draws(0.0, 1.0, draws, ctx.cli.opts.seed)?;
    let mc = fisher_monte_carlo(&mv, &[0.0, 1.0], &sample)?;
    // Var[(x² − 1)²/4] = 2.5 for standard normal x
    let se = (2.5 / draws as f64).sqrt();
    let numeric = info.matrix[(1, 1)];
    push("variance_entry_monte_carlo", mc[(1, 1)], numeric, (mc[(1, 1)] - numeric).abs() <= 5.0 * se);
    let all_pass = checks.iter().all(|c| c["pass"] == json!(true));
    let result = json!({
        "checks": checks,
        "all_pass": all_pass,
        "fisher": fisher,
        "variance_entry": {
            "quadrature": numeric,
            "monte_carlo": mc[(1, 1)],
            "monte_carlo_standard_error": se,
            "closed_form": 0.5,
            "two_over_sigma4": 2.0,
        },
    });
    Ok(CommandOutput { result, table, plot: None })
}

/// Resolves relative output paths against [`OUTPUT_DIR_ENV`] when it is set.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn has_plot(c: Command) -> bool {
    matches!(c, Command::Predict | Command::LsCompare | Command::ComparePriors | Command::McmcCheck | Command::Fatigue)
}

fn dispatch(ctx: &mut Ctx) -> CliResult<CommandOutput> {
    let command = ctx.cli.command;
    if ctx.cli.opts.emit_plot.is_some() && !has_plot(command) {
        return Err(CliError::Config(format!("{} has no plot data to emit", command.name())));
    }
    let out = match command {
        Command::Fit => fit(ctx),
        Command::Predict => predict(ctx),
        Command::Evidence => evidence(ctx),
        Command::ComparePriors => compare(ctx),
        Command::McmcCheck => mcmc_check(ctx),
        Command::LsCompare => ls_compare(ctx),
        Command::Fatigue => fatigue(ctx),
        Command::VerifyInfo => verify_info(ctx),
    }?;
    if let (Some(path), Some(plot)) = (&ctx.cli.opts.emit_plot, &out.plot) {
        let path = resolve_output_path(path);
        std::fs::write(&path, plot).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(out)
}

/// Runs one command and renders its report. Plot data is written as a side
/// effect; the report text is returned for the caller to place.
pub fn run(cli: &Cli) -> Outcome {
    let mut ctx = Ctx { cli, config: Map::new() };
    ctx.set("format", cli.opts.format);
    let outcome = dispatch(&mut ctx);
    let (result, error, table) = match outcome {
        Ok(out) => (Some(out.result), None, Some(out.table)),
        Err(e) => (None, Some(ErrorObject::from(&e)), None),
    };
    let failed = error.is_some();
    let report = Report {
        tool: TOOL,
        command: cli.command,
        status: if failed { Status::Error } else { Status::Ok },
        config: ctx.config,
        result,
        error,
    };
    let text = match (&table, cli.opts.format) {
        (Some(t), Format::Csv) => t.render(),
        _ => json::to_string(&report).expect("report values serialize"),
    };
    Outcome { report, text, exit_code: i32::from(failed) }
}

/// Runs a command and writes its report to `--output` or stdout. Returns the
/// process exit status.
pub fn execute(cli: &Cli) -> i32 {
    let out = run(cli);
    if let Some(e) = &out.report.error {
        eprintln!("nibr {}: {}", cli.command.name(), e.message);
    }
    let written = match &cli.opts.output {
        Some(p) => {
            let path = resolve_output_path(p);
            std::fs::write(&path, &out.text).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(out.text.as_bytes()).map_err(|e| e.to_string())
        }
    };
    match written {
        Ok(()) => out.exit_code,
        Err(msg) => {
            eprintln!("nibr: cannot write report: {msg}");
            1
        }
    }
}
