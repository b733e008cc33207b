use rand::Rng;
use rayon::prelude::*;

use super::adapt::{find_reasonable_step_size, DualAveraging, WindowedMetric};
use super::leapfrog::PhasePoint;
use super::metric::Metric;
use super::nuts::nuts_transition;
use super::rng::stream_rng;
use super::{ChainDraws, PosteriorDraws, SampleStats, SamplerConfig};
use crate::density::PosteriorModel;
use crate::error::{Error, Result};

const INIT_ATTEMPTS: usize = 100;

/// Runs `config.chains` independent chains from the model's initial point.
pub fn run_chains<M: PosteriorModel + ?Sized>(model: &M, config: &SamplerConfig) -> Result<PosteriorDraws> {
    run_chains_from(model, config, None)
}

/// Like [`run_chains`], with optional per-chain starting points in the
/// unconstrained space (jitter is still applied).
pub fn run_chains_from<M: PosteriorModel + ?Sized>(
    model: &M,
    config: &SamplerConfig,
    inits: Option<&[Vec<f64>]>,
) -> Result<PosteriorDraws> {
    config.validate()?;
    if let Some(inits) = inits {
        if inits.len() != config.chains || inits.iter().any(|z| z.len() != model.dim()) {
            return Err(Error::DimensionMismatch("initial points do not match chains and model dimension".into()));
        }
    }
    let base = model.initial_point();
    let chains: Vec<Result<ChainDraws>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let start = inits.map_or(base.as_slice(), |v| v[c].as_slice());
            run_chain(model, config, c, start)
        })
        .collect();
    Ok(PosteriorDraws {
        names: model.constrained_names(),
        chains: chains.into_iter().collect::<Result<_>>()?,
    })
}

fn initial_phase_point<M: PosteriorModel + ?Sized>(
    model: &M,
    config: &SamplerConfig,
    chain: usize,
    start: &[f64],
) -> Result<PhasePoint> {
    let mut rng = stream_rng(config.seed, chain as u64, 0);
    let dim = model.dim();
    for _ in 0..INIT_ATTEMPTS {
        let z: Vec<f64> = start
            .iter()
            .map(|s| {
                if config.init_jitter > 0.0 {
                    s + rng.random_range(-config.init_jitter..=config.init_jitter)
                } else {
                    *s
                }
            })
            .collect();
        let pt = PhasePoint::new(model, z, vec![0.0; dim]);
        if pt.is_valid() && pt.grad.iter().all(|g| g.is_finite()) {
            return Ok(pt);
        }
    }
    Err(Error::FitFailure(format!(
        "chain {}: no finite log density after {INIT_ATTEMPTS} jittered initializations",
        chain + 1
    )))
}

fn run_chain<M: PosteriorModel + ?Sized>(
    model: &M,
    config: &SamplerConfig,
    chain: usize,
    start: &[f64],
) -> Result<ChainDraws> {
    let dim = model.dim();
    let mut point = initial_phase_point(model, config, chain, start)?;
    let mut metric = Metric::unit(config.metric, dim);
    let mut step = config.initial_step_size;
    let iter_rng = |k: usize| stream_rng(config.seed, chain as u64, k as u64 + 1);

    let mut warmup_divergences = 0;
    if config.warmup_iters > 0 {
        let mut dual = None;
        let mut windows = None;
        if config.adapt {
            step = find_reasonable_step_size(model, &point, step, &metric, &mut iter_rng(config.warmup_iters + config.sampling_iters))?;
            dual = Some(DualAveraging::new(config.target_accept, step));
            windows = Some(WindowedMetric::new(config.metric, dim, config.warmup_iters)?);
        }
        for k in 0..config.warmup_iters {
            let mut rng = iter_rng(k);
            let (next, stats) = nuts_transition(model, &point, step, &metric, config.max_treedepth, &mut rng);
            point = next;
            warmup_divergences += stats.divergent as usize;
            if let (Some(dual), Some(windows)) = (dual.as_mut(), windows.as_mut()) {
                step = dual.update(stats.accept_prob);
                if let Some(adapted) = windows.observe(&point.position)? {
                    metric = adapted;
                    step = find_reasonable_step_size(model, &point, step, &metric, &mut rng)?;
                    dual.restart(step);
                }
            }
        }
        if warmup_divergences == config.warmup_iters {
            return Err(Error::FitFailure(format!(
                "chain {}: every warmup iteration diverged (final step size {step:.3e})",
                chain + 1
            )));
        }
        if let Some(dual) = dual {
            step = dual.final_step();
        }
    }

    let mut out = ChainDraws {
        values: Vec::with_capacity(config.sampling_iters),
        positions: Vec::with_capacity(config.sampling_iters),
        stats: Vec::with_capacity(config.sampling_iters),
        step_size: step,
        inv_mass: metric.diagonal(),
        warmup_divergences,
    };
    for k in 0..config.sampling_iters {
        let mut rng = iter_rng(config.warmup_iters + k);
        let (next, stats) = nuts_transition(model, &point, step, &metric, config.max_treedepth, &mut rng);
        point = next;
        out.values.push(model.constrain(&point.position));
        out.positions.push(point.position.clone());
        out.stats.push(SampleStats::from(stats));
    }
    Ok(out)
}
