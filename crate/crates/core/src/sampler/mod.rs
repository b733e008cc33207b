//! Gradient-based MCMC: NUTS transitions, warmup adaptation, multi-chain runs
//! and convergence diagnostics.

pub mod adapt;
mod chains;
pub mod diagnostics;
pub mod leapfrog;
pub mod metric;
pub mod nuts;
pub mod rng;

use serde::{Deserialize, Serialize};

pub use chains::{run_chains, run_chains_from};
pub use diagnostics::{ess_bulk, ess_mean, mcse_mean, rhat, Diagnostics, Rhat};
pub use metric::{Metric, MetricKind};
pub use nuts::{nuts_transition, TransitionStats};

use crate::density::{LogDensity, PosteriorModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub target_accept: f64,
    pub max_treedepth: usize,
    pub seed: u64,
    /// Half-width of the uniform perturbation applied to initial points.
    pub init_jitter: f64,
    pub adapt: bool,
    pub initial_step_size: f64,
    pub metric: MetricKind,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup_iters: 1000,
            sampling_iters: 2000,
            target_accept: 0.8,
            max_treedepth: 10,
            seed: 1,
            init_jitter: 0.1,
            adapt: true,
            initial_step_size: 1.0,
            metric: MetricKind::Diag,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidArgument("chains must be at least 1".into()));
        }
        if self.adapt && self.warmup_iters < adapt::MIN_ADAPT_WARMUP {
            return Err(Error::InvalidArgument(format!(
                "warmup_iters must be at least {} when adaptation is enabled (got {})",
                adapt::MIN_ADAPT_WARMUP,
                self.warmup_iters
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(Error::InvalidArgument("init_jitter must be finite and non-negative".into()));
        }
        if !(self.initial_step_size > 0.0 && self.initial_step_size.is_finite()) {
            return Err(Error::InvalidArgument("initial_step_size must be positive".into()));
        }
        if self.sampling_iters == 0 {
            return Err(Error::InvalidArgument("sampling_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Statistics of one stored iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleStats {
    pub divergent: bool,
    pub rejected: bool,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub accept_prob: f64,
    pub step_size: f64,
    pub energy: f64,
}

impl From<TransitionStats> for SampleStats {
    fn from(s: TransitionStats) -> Self {
        Self {
            divergent: s.divergent,
            rejected: s.rejected,
            tree_depth: s.tree_depth,
            n_leapfrog: s.n_leapfrog,
            accept_prob: s.accept_prob,
            step_size: s.step_size,
            energy: s.energy,
        }
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainDraws {
    /// iterations x constrained dimension
    pub values: Vec<Vec<f64>>,
    /// iterations x unconstrained dimension; empty when loaded from files
    pub positions: Vec<Vec<f64>>,
    pub stats: Vec<SampleStats>,
    pub step_size: f64,
    /// Diagonal of the adapted inverse metric.
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Draws of all chains in the constrained view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    /// Draws without sampler state, e.g. read back from disk.
    pub fn from_values(names: Vec<String>, chains: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n_iter = chains.first().map_or(0, |c| c.len());
        for c in &chains {
            if c.len() != n_iter {
                return Err(Error::DimensionMismatch("chains have different numbers of draws".into()));
            }
            if c.iter().any(|row| row.len() != names.len()) {
                return Err(Error::DimensionMismatch("draw width differs from the number of names".into()));
            }
        }
        Ok(Self {
            names,
            chains: chains
                .into_iter()
                .map(|values| ChainDraws {
                    stats: vec![SampleStats::default(); values.len()],
                    values,
                    ..ChainDraws::default()
                })
                .collect(),
        })
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_iters(&self) -> usize {
        self.chains.first().map_or(0, |c| c.values.len())
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain series of parameter `j`.
    pub fn param_chains(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.values.iter().map(|row| row[j]).collect()).collect()
    }

    /// All draws of parameter `j`, chain after chain.
    pub fn pooled(&self, j: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.values.iter().map(move |row| row[j])).collect()
    }

    /// Pooled draws of a named parameter.
    pub fn pooled_by_name(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named {name}")))?;
        Ok(self.pooled(j))
    }

    /// Unconstrained positions of every draw in chain order, taken from the
    /// stored sampler state or rebuilt through the model.
    pub fn positions<M: PosteriorModel + ?Sized>(&self, model: &M) -> Result<Vec<Vec<Vec<f64>>>> {
        self.chains
            .iter()
            .map(|c| {
                if c.positions.len() == c.values.len() {
                    Ok(c.positions.clone())
                } else {
                    c.values.iter().map(|v| model.unconstrain(v)).collect()
                }
            })
            .collect()
    }

    pub fn divergence_count(&self) -> usize {
        self.chains.iter().flat_map(|c| &c.stats).filter(|s| s.divergent).count()
    }

    pub fn rejection_count(&self) -> usize {
        self.chains.iter().flat_map(|c| &c.stats).filter(|s| s.rejected).count()
    }

    pub fn diagnostics(&self) -> Result<Diagnostics> {
        let mut rhats = Vec::with_capacity(self.dim());
        let mut degenerate = Vec::with_capacity(self.dim());
        let mut ess = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let series = self.param_chains(j);
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            let r = rhat(&refs)?;
            rhats.push(r.value);
            degenerate.push(r.degenerate);
            ess.push(ess_bulk(&refs)?);
        }
        Ok(Diagnostics {
            names: self.names.clone(),
            rhat: rhats,
            rhat_degenerate: degenerate,
            ess_bulk: ess,
            divergence_count: self.divergence_count(),
            rejection_count: self.rejection_count(),
            warmup_divergence_count: self.chains.iter().map(|c| c.warmup_divergences).sum(),
            total_iterations: self.n_chains() * self.n_iters(),
        })
    }
}

/// Exposes a plain log density as a posterior whose constrained view is the
/// identity, with coordinates named `x[1]`, `x[2]`, ...
pub struct IdentityModel<D> {
    pub density: D,
    pub initial: Vec<f64>,
}

impl<D: LogDensity> IdentityModel<D> {
    pub fn new(density: D) -> Self {
        let initial = vec![0.0; density.dim()];
        Self { density, initial }
    }

    pub fn with_initial(density: D, initial: Vec<f64>) -> Self {
        Self { density, initial }
    }
}

impl<D: LogDensity> LogDensity for IdentityModel<D> {
    fn dim(&self) -> usize {
        self.density.dim()
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        self.density.log_density_grad(position, grad)
    }
}

impl<D: LogDensity> PosteriorModel for IdentityModel<D> {
    fn constrained_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x[{i}]")).collect()
    }

    fn constrain(&self, position: &[f64]) -> Vec<f64> {
        position.to_vec()
    }

    fn unconstrain(&self, constrained: &[f64]) -> Result<Vec<f64>> {
        Ok(constrained.to_vec())
    }

    fn initial_point(&self) -> Vec<f64> {
        self.initial.clone()
    }
}
