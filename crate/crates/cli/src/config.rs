//! Run configuration: defaults, overlaid by an optional TOML file, overlaid by
//! command-line flags. The resolved value is written next to the outputs.

use std::path::{Path, PathBuf};

use anyhow::Context;
use calc_core::elicitation::{CoefficientRole, ElicitationConfig, ElicitationTargets};
use calc_core::model::ModelSpec;
use calc_core::pipeline::PreprocessConfig;
use calc_core::sampler::SamplerConfig;
use calc_core::simulation::ScenarioSpec;
use calc_core::summaries::BridgeConfig;
use serde::{Deserialize, Serialize};

use crate::InputError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    pub raw: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Output directories of earlier `fit` runs.
    pub fits: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub xi: f64,
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElicitSettings {
    pub amplitude: Targets,
    pub phase: Targets,
    pub search: ElicitationConfig,
}

impl Default for ElicitSettings {
    fn default() -> Self {
        Self {
            amplitude: Targets { xi: 0.75, q: 8.0, p: 0.95 },
            phase: Targets { xi: 0.75, q: 20.0, p: 0.95 },
            search: ElicitationConfig::default(),
        }
    }
}

impl ElicitSettings {
    pub fn targets(&self, role: CoefficientRole) -> ElicitationTargets {
        let t = match role {
            CoefficientRole::Amplitude => self.amplitude,
            CoefficientRole::Phase => self.phase,
        };
        ElicitationTargets { xi: t.xi, q: t.q, p: t.p, role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummarizeSettings {
    /// Inclusion-probability threshold for selection.
    pub threshold: f64,
}

impl Default for SummarizeSettings {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpcheckSettings {
    /// Predictive trajectories per subject.
    pub draws: usize,
    pub truncate_at_zero: bool,
}

impl Default for PpcheckSettings {
    fn default() -> Self {
        Self {
            draws: 100,
            truncate_at_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// Standardize non-binary covariates before modeling.
    pub standardize_covariates: bool,
    pub inputs: Inputs,
    pub model: ModelSpec,
    pub sampler: SamplerConfig,
    pub scenario: ScenarioSpec,
    pub preprocess: PreprocessConfig,
    pub elicit: ElicitSettings,
    pub summarize: SummarizeSettings,
    pub bridge: BridgeConfig,
    pub ppcheck: PpcheckSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: None,
            out: PathBuf::from("out"),
            standardize_covariates: true,
            inputs: Inputs::default(),
            model: ModelSpec::default(),
            sampler: SamplerConfig::default(),
            scenario: ScenarioSpec::default(),
            preprocess: PreprocessConfig::default(),
            elicit: ElicitSettings::default(),
            summarize: SummarizeSettings::default(),
            bridge: BridgeConfig::default(),
            ppcheck: PpcheckSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Propagates the top-level seed to every component.
    pub fn resolve(mut self) -> Self {
        self.sampler.seed = self.seed;
        self.scenario.seed = self.seed;
        self
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = toml::to_string(self).context("serializing the run configuration")?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.inputs.fits = vec!["a".into(), "b".into()];
        cfg.threads = Some(2);
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 9\n[model]\nvariant = \"cosinor\"\n[sampler]\nchains = 2\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.model.variant, calc_core::model::Variant::Cosinor);
        assert_eq!(cfg.model.epochs_per_hour, 12);
        assert_eq!(cfg.sampler.chains, 2);
        assert_eq!(cfg.sampler.warmup_iters, 1000);
        let r = cfg.resolve();
        assert_eq!(r.sampler.seed, 9);
    }

    #[test]
    fn readme_example_parses() {
        let readme = include_str!("../../../README.md");
        let start = readme.find("```toml\n").expect("toml block") + 8;
        let len = readme[start..].find("```").unwrap();
        let cfg: RunConfig = toml::from_str(&readme[start..start + len]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sampler.metric, calc_core::sampler::MetricKind::Diag);
        assert_eq!(cfg.elicit.amplitude.q, 8.0);
    }
}
