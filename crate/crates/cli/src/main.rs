mod commands;
mod config;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;

/// Errors caused by bad input; they map to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser, Debug)]
#[command(name = "calc", version, about = "Covariate-dependent circadian rhythm models for actigraphy cohorts")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Shared {
    /// TOML file mirroring the run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort: series.csv, covariates.csv, truth.json.
    Simulate {
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        n_subjects: Option<usize>,
        #[arg(long)]
        t_len: Option<usize>,
        /// Start from the small ten-subject scenario.
        #[arg(long)]
        desk_scale: bool,
    },
    /// Turn minute-level counts into a standardized epoch series.
    Preprocess {
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Keep subjects with fewer than six days of minutes.
        #[arg(long)]
        allow_short: bool,
    },
    /// Choose l1-ball prior hyperparameters from sparsity and magnitude targets.
    Elicit {
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Sample the posterior of one model variant.
    Fit {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// calc_l1ball, calc_blasso, cosinor or rar.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Selection, group differences, correlations and (with truth) recovery metrics.
    Summarize {
        /// Directory written by `fit`.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Posterior predictive trajectories per subject.
    Ppcheck {
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Series to predict at (default: the one used by the fit).
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Bridge-sampling log marginal likelihoods of one or more fits.
    Compare {
        #[arg(long = "fit", required = false)]
        fits: Vec<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.shared.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.shared.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.shared.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.shared.out {
        cfg.out = o.clone();
    }
    match &cli.command {
        Command::Simulate {
            sigma,
            n_subjects,
            t_len,
            desk_scale,
        } => {
            if *desk_scale {
                cfg.scenario = calc_core::simulation::ScenarioSpec::desk_scale();
            }
            if let Some(s) = sigma {
                cfg.scenario.sigma = *s;
            }
            if let Some(n) = n_subjects {
                cfg.scenario.n_subjects = *n;
            }
            if let Some(t) = t_len {
                cfg.scenario.t_len = *t;
            }
        }
        Command::Preprocess { raw, allow_short } => {
            set(&mut cfg.inputs.raw, raw);
            cfg.preprocess.allow_short |= allow_short;
        }
        Command::Elicit { covariates } => set(&mut cfg.inputs.covariates, covariates),
        Command::Fit {
            series,
            covariates,
            variant,
            chains,
            warmup,
            iters,
        } => {
            set(&mut cfg.inputs.series, series);
            set(&mut cfg.inputs.covariates, covariates);
            if let Some(v) = variant {
                cfg.model.variant = v.parse().map_err(|e: calc_core::Error| InputError(e.to_string()))?;
            }
            if let Some(c) = chains {
                cfg.sampler.chains = *c;
            }
            if let Some(w) = warmup {
                cfg.sampler.warmup_iters = *w;
            }
            if let Some(i) = iters {
                cfg.sampler.sampling_iters = *i;
            }
        }
        Command::Summarize { fit, truth, threshold } => {
            if let Some(f) = fit {
                cfg.inputs.fits = vec![f.clone()];
            }
            set(&mut cfg.inputs.truth, truth);
            if let Some(t) = threshold {
                cfg.summarize.threshold = *t;
            }
        }
        Command::Ppcheck { fit, series, draws } => {
            if let Some(f) = fit {
                cfg.inputs.fits = vec![f.clone()];
            }
            set(&mut cfg.inputs.series, series);
            if let Some(d) = draws {
                cfg.ppcheck.draws = *d;
            }
        }
        Command::Compare { fits } => {
            if !fits.is_empty() {
                cfg.inputs.fits = fits.clone();
            }
        }
    }
    Ok(cfg.resolve())
}

fn set(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag.clone();
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(InputError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Preprocess { .. } => commands::preprocess(&cfg),
        Command::Elicit { .. } => commands::elicit(&cfg),
        Command::Fit { .. } => commands::fit(&cfg),
        Command::Summarize { .. } => commands::summarize(&cfg),
        Command::Ppcheck { .. } => commands::ppcheck(&cfg),
        Command::Compare { .. } => commands::compare(&cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<calc_core::Error>() {
            return if e.is_invalid_input() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
