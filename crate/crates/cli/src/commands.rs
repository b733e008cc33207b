use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use calc_core::density::PosteriorModel;
use calc_core::elicitation::{elicit as run_elicitation, CoefficientRole, ElicitationResult};
use calc_core::model::{posterior_predictive_draw, CovariateMatrix, Model, SubjectSeries, Variant};
use calc_core::pipeline::{self, CovariateTable};
use calc_core::sampler::rng::purpose_rng;
use calc_core::sampler::{run_chains, PosteriorDraws};
use calc_core::simulation::{generate_cohort, CovariateScheme, GroundTruth};
use calc_core::summaries::{
    self, confusion_metrics, coverage, equal_tailed_interval, group_difference, pairwise_correlations, rmse_rmae,
    ConfusionCounts, Grouping, SelectionReport, SelectionRule,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::tables::{self, csv_writer, opt, write_json};
use crate::InputError;

const SERIES_FILE: &str = "series.csv";
const COVARIATES_FILE: &str = "covariates.csv";
const DRAWS_FILE: &str = "draws.csv";
const FIT_CONFIG: &str = "fit.toml";

/// Maps errors raised while loading user-supplied files to invalid input.
fn input<T>(r: calc_core::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| match e {
        calc_core::Error::Io(io) => InputError(io.to_string()).into(),
        other => other.into(),
    })
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| InputError(format!("missing input: {what}")).into())
}

/// Creates the output directory and records the resolved configuration as `<command>.toml`.
fn prepare_out<'a>(cfg: &'a RunConfig, command: &str) -> anyhow::Result<&'a Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    cfg.write(&cfg.out.join(format!("{command}.toml")))?;
    Ok(&cfg.out)
}

fn covariates_for_model(table: &CovariateTable, series: &[SubjectSeries], standardize: bool) -> anyhow::Result<CovariateMatrix> {
    let x = input(table.aligned_to(series))?;
    if standardize {
        input(pipeline::standardize_covariates(&x))
    } else {
        Ok(x)
    }
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<()> {
    let supplied = match (&cfg.inputs.covariates, cfg.scenario.covariate_scheme) {
        (Some(p), _) => Some(input(pipeline::read_covariates_csv(p))?.matrix),
        (None, CovariateScheme::Supplied) => {
            bail!(InputError("the supplied covariate scheme needs inputs.covariates".into()))
        }
        (None, _) => None,
    };
    let cohort = input(generate_cohort(&cfg.scenario, supplied.as_ref()))?;
    let out = prepare_out(cfg, "simulate")?;
    pipeline::write_series_csv(tables::create(&out.join(SERIES_FILE))?, &cohort.series, None)?;
    pipeline::write_covariates_csv(tables::create(&out.join(COVARIATES_FILE))?, &cohort.truth.subject_ids, &cohort.x_raw)?;
    write_json(&out.join("truth.json"), &cohort.truth)?;
    Ok(())
}

pub fn preprocess(cfg: &RunConfig) -> anyhow::Result<()> {
    let raw = input(pipeline::read_raw_csv(required(&cfg.inputs.raw, "raw counts (--raw)")?))?;
    let pre = input(pipeline::preprocess(&raw, &cfg.preprocess))?;
    for id in &pre.excluded {
        eprintln!("excluded {id}: fewer than {} minutes", pipeline::MIN_RAW_MINUTES);
    }
    let out = prepare_out(cfg, "preprocess")?;
    pipeline::write_series_csv(tables::create(&out.join(SERIES_FILE))?, &pre.series, Some(10))?;
    #[derive(Serialize)]
    struct Report<'a> {
        scaling: Option<pipeline::PooledScaling>,
        excluded: &'a [String],
        epochs_per_hour: u32,
    }
    write_json(
        &out.join("preprocess.json"),
        &Report {
            scaling: pre.scaling,
            excluded: &pre.excluded,
            epochs_per_hour: cfg.preprocess.epochs_per_hour(),
        },
    )
}

pub fn elicit(cfg: &RunConfig) -> anyhow::Result<()> {
    let table = input(pipeline::read_covariates_csv(required(&cfg.inputs.covariates, "covariates (--covariates)")?))?;
    let x = if cfg.standardize_covariates {
        input(pipeline::standardize_covariates(&table.matrix))?
    } else {
        table.matrix
    };
    let run = |role: CoefficientRole, label: &str| -> anyhow::Result<ElicitationResult> {
        let targets = cfg.elicit.targets(role);
        input(targets.validate())?;
        let mut rng = purpose_rng(cfg.seed, label);
        input(run_elicitation(&targets, &x, &cfg.elicit.search, &mut rng))
    };
    #[derive(Serialize)]
    struct Report {
        amplitude: ElicitationResult,
        phase: ElicitationResult,
    }
    let report = Report {
        amplitude: run(CoefficientRole::Amplitude, "elicit/amplitude")?,
        phase: run(CoefficientRole::Phase, "elicit/phase")?,
    };
    let out = prepare_out(cfg, "elicit")?;
    write_json(&out.join("elicitation.json"), &report)
}

/// A fit directory loaded back into memory.
struct LoadedFit {
    dir: PathBuf,
    config: RunConfig,
    model: Model,
    draws: PosteriorDraws,
    /// Covariates as supplied, before standardization.
    covariates: Option<CovariateMatrix>,
}

fn build_model(cfg: &RunConfig, series: Vec<SubjectSeries>, table: Option<&CovariateTable>) -> anyhow::Result<(Model, Option<CovariateMatrix>)> {
    let raw = table.map(|t| input(t.aligned_to(&series))).transpose()?;
    let x = match table {
        Some(t) => Some(covariates_for_model(t, &series, cfg.standardize_covariates)?),
        None => None,
    };
    let model = input(Model::build(series, x, cfg.model))?;
    Ok((model, raw))
}

fn load_fit(dir: &Path) -> anyhow::Result<LoadedFit> {
    let config = RunConfig::load(&dir.join(FIT_CONFIG))?;
    let series = input(pipeline::read_series_csv(&dir.join(SERIES_FILE)))?;
    let cov_path = dir.join(COVARIATES_FILE);
    let table = if cov_path.exists() {
        Some(input(pipeline::read_covariates_csv(&cov_path))?)
    } else {
        None
    };
    let (model, covariates) = build_model(&config, series, table.as_ref())?;
    let draws = tables::read_draws(&dir.join(DRAWS_FILE))?;
    if draws.names != model.constrained_names() {
        bail!(InputError(format!("{}: draws do not match the fitted model", dir.display())));
    }
    Ok(LoadedFit {
        dir: dir.to_path_buf(),
        config,
        model,
        draws,
        covariates,
    })
}

fn single_fit(cfg: &RunConfig) -> anyhow::Result<&Path> {
    match cfg.inputs.fits.as_slice() {
        [one] => Ok(one),
        [] => Err(InputError("missing input: fit directory (--fit)".into()).into()),
        _ => Err(InputError("expected exactly one fit directory".into()).into()),
    }
}

#[derive(Serialize)]
struct FitReport {
    status: &'static str,
    variant: &'static str,
    error: Option<String>,
    chains: usize,
    warmup_iters: usize,
    sampling_iters: usize,
    max_rhat: Option<f64>,
    divergences: usize,
    warmup_divergences: usize,
    rejections: usize,
    step_size: Vec<f64>,
    mean_tree_depth: Vec<f64>,
    diagnostics: Option<calc_core::sampler::Diagnostics>,
}

pub fn fit(cfg: &RunConfig) -> anyhow::Result<()> {
    let series_path = required(&cfg.inputs.series, "series (--series)")?;
    let series = input(pipeline::read_series_csv(series_path))?;
    let table = match &cfg.inputs.covariates {
        Some(p) => Some(input(pipeline::read_covariates_csv(p))?),
        None if cfg.model.variant.is_calc() => bail!(InputError("missing input: covariates (--covariates)".into())),
        None => None,
    };
    let (model, raw_x) = build_model(cfg, series, table.as_ref())?;
    let out = prepare_out(cfg, "fit")?;
    // The fit directory carries its own inputs so later commands need only the directory.
    pipeline::write_series_csv(tables::create(&out.join(SERIES_FILE))?, model.subjects(), None)?;
    if let Some(x) = &raw_x {
        let ids: Vec<String> = model.subjects().iter().map(|s| s.subject_id.clone()).collect();
        pipeline::write_covariates_csv(tables::create(&out.join(COVARIATES_FILE))?, &ids, x)?;
    }
    let mut report = FitReport {
        status: "ok",
        variant: cfg.model.variant.label(),
        error: None,
        chains: cfg.sampler.chains,
        warmup_iters: cfg.sampler.warmup_iters,
        sampling_iters: cfg.sampler.sampling_iters,
        max_rhat: None,
        divergences: 0,
        warmup_divergences: 0,
        rejections: 0,
        step_size: Vec::new(),
        mean_tree_depth: Vec::new(),
        diagnostics: None,
    };
    let draws = match run_chains(&model, &cfg.sampler) {
        Ok(d) => d,
        Err(e) => {
            report.status = "failed";
            report.error = Some(e.to_string());
            write_json(&out.join("diagnostics.json"), &report)?;
            return Err(e.into());
        }
    };
    tables::write_draws(&out.join(DRAWS_FILE), &draws)?;

    let diag = draws.diagnostics()?;
    report.max_rhat = Some(diag.max_rhat());
    report.divergences = diag.divergence_count;
    report.warmup_divergences = diag.warmup_divergence_count;
    report.rejections = diag.rejection_count;
    report.step_size = draws.chains.iter().map(|c| c.step_size).collect();
    report.mean_tree_depth = draws
        .chains
        .iter()
        .map(|c| c.stats.iter().map(|s| s.tree_depth as f64).sum::<f64>() / c.stats.len().max(1) as f64)
        .collect();
    report.diagnostics = Some(diag);
    write_json(&out.join("diagnostics.json"), &report)?;

    let rows = summaries::summarize_parameters(&draws)?;
    let ppi = draws
        .names
        .iter()
        .enumerate()
        .map(|(j, n)| {
            if n.starts_with("eta_a[") || n.starts_with("eta_phi[") {
                summaries::ppi(&draws.pooled(j)).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<calc_core::Result<Vec<_>>>()?;
    tables::write_summary(&out.join("summary.csv"), &rows, &ppi)?;
    if report.max_rhat.is_some_and(|r| r > 1.01) {
        eprintln!("warning: max R-hat {:.4} exceeds 1.01", report.max_rhat.unwrap_or(f64::NAN));
    }
    Ok(())
}

fn selection_rule(v: Variant) -> SelectionRule {
    match v {
        Variant::CalcBlasso => SelectionRule::Interval,
        _ => SelectionRule::Ppi,
    }
}

/// Subject-level quantity names present in a fit, in the order of `SubjectParams`.
const SUBJECT_BLOCKS: [&str; 8] = ["m", "M", "A", "a", "alpha", "beta", "phi", "sigma"];

fn truth_value(truth: &GroundTruth, block: &str, i: usize) -> Option<f64> {
    let s = truth.subjects.get(i)?;
    match block {
        "m" => Some(s.m),
        "a" => Some(s.amplitude),
        "alpha" => Some(s.alpha),
        "beta" => Some(s.beta),
        "phi" => Some(s.phase),
        "sigma" => Some(s.sigma),
        _ => None,
    }
}

/// Draws of `block[1..=n]`, one vector per subject; `None` if the fit lacks the block.
fn subject_draws(draws: &PosteriorDraws, block: &str, n: usize) -> Option<Vec<Vec<f64>>> {
    (1..=n)
        .map(|i| draws.index_of(&format!("{block}[{i}]")).map(|j| draws.pooled(j)))
        .collect()
}

pub fn summarize(cfg: &RunConfig) -> anyhow::Result<()> {
    let fit = load_fit(single_fit(cfg)?)?;
    let truth: Option<GroundTruth> = match &cfg.inputs.truth {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| InputError(format!("cannot read {}: {e}", p.display())))?;
            Some(serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let n = fit.model.subjects().len();
    if let Some(t) = &truth {
        if t.subjects.len() != n {
            bail!(InputError(format!("truth has {} subjects, the fit has {n}", t.subjects.len())));
        }
    }
    let variant = fit.config.model.variant;
    let rule = selection_rule(variant);
    let threshold = cfg.summarize.threshold;
    let out = prepare_out(cfg, "summarize")?;

    // selection.csv
    let report = SelectionReport::from_draws(&fit.draws, &["eta_a", "eta_phi"], rule, threshold)?;
    let mut w = csv_writer(&out.join("selection.csv"))?;
    w.write_record(["param", "ppi", "median", "q2.5", "q97.5", "selected"])?;
    for k in 0..report.names.len() {
        w.write_record([
            report.names[k].clone(),
            report.ppi[k].to_string(),
            report.median[k].to_string(),
            report.lower[k].to_string(),
            report.upper[k].to_string(),
            report.selected[k].to_string(),
        ])?;
    }
    w.flush()?;

    // metrics.csv
    let mut header = vec!["scope", "n", "n_selected"];
    if truth.is_some() {
        header.extend(["acc", "prec", "mcc", "f1", "rmse", "rmae", "coverage"]);
    }
    let mut w = csv_writer(&out.join("metrics.csv"))?;
    w.write_record(&header)?;
    let coef_scopes: [(&str, &[&str]); 3] = [("eta_a", &["eta_a"]), ("eta_phi", &["eta_phi"]), ("eta", &["eta_a", "eta_phi"])];
    if variant.is_calc() {
        for (scope, prefixes) in coef_scopes {
            let idx: Vec<usize> = (0..report.names.len())
                .filter(|&k| prefixes.iter().any(|p| report.names[k].starts_with(&format!("{p}["))))
                .collect();
            let mut row = vec![scope.to_string(), idx.len().to_string(), idx.iter().filter(|&&k| report.selected[k]).count().to_string()];
            if let Some(t) = &truth {
                let mut eta_true = Vec::new();
                for p in prefixes {
                    eta_true.extend(if *p == "eta_a" { &t.eta_a } else { &t.eta_phi });
                }
                if eta_true.len() != idx.len() {
                    bail!(InputError(format!("truth has {} {scope} coefficients, the fit has {}", eta_true.len(), idx.len())));
                }
                let nonzero: Vec<bool> = eta_true.iter().map(|v| *v != 0.0).collect();
                let selected: Vec<bool> = idx.iter().map(|&k| report.selected[k]).collect();
                let m = confusion_metrics(&ConfusionCounts::from_selection(&nonzero, &selected)?);
                let medians: Vec<f64> = idx.iter().map(|&k| report.median[k]).collect();
                let (rmse, rmae) = rmse_rmae(&eta_true, &medians)?;
                let intervals: Vec<(f64, f64)> = idx.iter().map(|&k| (report.lower[k], report.upper[k])).collect();
                row.extend([
                    opt(m.acc),
                    opt(m.prec),
                    if m.mcc_defined { m.mcc.to_string() } else { String::new() },
                    opt(m.f1),
                    rmse.to_string(),
                    rmae.to_string(),
                    coverage(&intervals, &eta_true)?.to_string(),
                ]);
            }
            w.write_record(&row)?;
        }
    }
    let mut subject_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for block in SUBJECT_BLOCKS {
        let Some(per_subject) = subject_draws(&fit.draws, block, n) else { continue };
        let means: Vec<f64> = per_subject.iter().map(|d| d.iter().sum::<f64>() / d.len() as f64).collect();
        let mut row = vec![block.to_string(), n.to_string(), String::new()];
        if let Some(t) = &truth {
            let truths: Option<Vec<f64>> = (0..n).map(|i| truth_value(t, block, i)).collect();
            match truths {
                Some(truths) => {
                    let intervals = per_subject
                        .iter()
                        .map(|d| equal_tailed_interval(d, 0.95))
                        .collect::<calc_core::Result<Vec<_>>>()?;
                    let (rmse, rmae) = rmse_rmae(&truths, &means)?;
                    row.extend([String::new(), String::new(), String::new(), String::new()]);
                    row.extend([rmse.to_string(), rmae.to_string(), coverage(&intervals, &truths)?.to_string()]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
        }
        w.write_record(&row)?;
        subject_cols.push((format!("{block}_mean"), means));
    }
    w.flush()?;

    // groupdiff.csv
    let mut w = csv_writer(&out.join("groupdiff.csv"))?;
    w.write_record(["covariate", "quantity", "grouping", "n_first", "n_second", "mean", "q2.5", "q97.5", "significant"])?;
    if let Some(x) = &fit.covariates {
        for block in ["a", "A", "phi"] {
            let Some(per_subject) = subject_draws(&fit.draws, block, n) else { continue };
            for j in 0..x.cols() {
                let col = x.column(j);
                let (grouping, kind) = if x.is_binary(j) {
                    // The larger of the two values forms the first group.
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (Grouping::Labels(col.iter().map(|v| *v == hi).collect()), "binary")
                } else {
                    (Grouping::Continuous(col), "median_split")
                };
                // Columns that cannot form two groups of two are skipped.
                let Ok(g) = group_difference(&per_subject, &grouping) else { continue };
                w.write_record([
                    x.column_names[j].clone(),
                    block.to_string(),
                    kind.to_string(),
                    g.n_first.to_string(),
                    g.n_second.to_string(),
                    g.mean.to_string(),
                    g.lower.to_string(),
                    g.upper.to_string(),
                    g.significant.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    // correlations.csv
    let mut columns = subject_cols;
    if let Some(x) = &fit.covariates {
        for j in 0..x.cols() {
            columns.push((x.column_names[j].clone(), x.column(j)));
        }
    }
    let mut w = csv_writer(&out.join("correlations.csv"))?;
    w.write_record(["var1", "var2", "r"])?;
    if n >= 3 && !columns.is_empty() {
        let table = pairwise_correlations(&columns)?;
        for (a, row) in table.names.iter().zip(&table.values) {
            for (b, v) in table.names.iter().zip(row) {
                w.write_record([a.as_str(), b.as_str(), &opt(*v)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn ppcheck(cfg: &RunConfig) -> anyhow::Result<()> {
    let fit = load_fit(single_fit(cfg)?)?;
    let series = match &cfg.inputs.series {
        Some(p) => input(pipeline::read_series_csv(p))?,
        None => fit.model.subjects().to_vec(),
    };
    let fitted_ids: Vec<&str> = fit.model.subjects().iter().map(|s| s.subject_id.as_str()).collect();
    let k = cfg.ppcheck.draws;
    let positions: Vec<Vec<f64>> = input(fit.draws.positions(&fit.model))?.into_iter().flatten().collect();
    if k == 0 || k > positions.len() {
        bail!(InputError(format!("--draws must lie in 1..={}", positions.len())));
    }
    // Evenly spaced over the pooled draws.
    let picks: Vec<usize> = (0..k).map(|d| d * positions.len() / k).collect();
    let spec = &fit.config.model;
    let mut rng = purpose_rng(cfg.seed, "ppcheck");
    let out = prepare_out(cfg, "ppcheck")?;
    let mut w = tables::create(&out.join("ppdraws.csv"))?;
    use std::io::Write;
    writeln!(w, "subject_id,draw,t_index,value")?;
    for s in &series {
        let i = fitted_ids
            .iter()
            .position(|id| *id == s.subject_id)
            .ok_or_else(|| InputError(format!("subject {} was not part of fit {}", s.subject_id, fit.dir.display())))?;
        for (d, &p) in picks.iter().enumerate() {
            let sp = fit.model.subject_params(&positions[p], i);
            let y = posterior_predictive_draw(&sp, &s.t_index, spec, cfg.ppcheck.truncate_at_zero, &mut rng);
            for (t, v) in s.t_index.iter().zip(y) {
                writeln!(w, "{},{},{},{}", s.subject_id, d + 1, t, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.inputs.fits.is_empty() {
        bail!(InputError("missing input: at least one --fit directory".into()));
    }
    let out = prepare_out(cfg, "compare")?;
    let mut w = csv_writer(&out.join("logml.csv"))?;
    w.write_record(["fit", "variant", "log_ml", "mc_error", "iterations", "converged", "unreliable"])?;
    for (k, dir) in cfg.inputs.fits.iter().enumerate() {
        let fit = load_fit(dir)?;
        let mut rng = purpose_rng(cfg.seed, &format!("compare/{k}"));
        let est = summaries::model_logml(&fit.model, &fit.draws, &cfg.bridge, &mut rng)?;
        if est.unreliable {
            eprintln!("warning: bridge estimate for {} is unreliable", dir.display());
        }
        w.write_record([
            dir.display().to_string(),
            fit.config.model.variant.label().to_string(),
            est.log_ml.to_string(),
            est.mc_error.to_string(),
            est.iterations.to_string(),
            est.converged.to_string(),
            est.unreliable.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
