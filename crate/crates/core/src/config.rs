//! The single JSON configuration file: generation, predictor, analysis and
//! reward blocks, each optional until a command needs it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bias::CandidateSet;
use crate::curve::BootstrapConfig;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, NoiseSpec};
use crate::predictor::PredictorConfig;
use crate::reward::RewardConfig;
use crate::tasks::GenConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<PredictorConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardConfig>,
}

fn default_n_bootstrap() -> usize {
    1000
}
fn default_ci_level() -> f64 {
    0.95
}
fn default_candidate_noise() -> NoiseSpec {
    NoiseSpec::new(0.001).expect("valid default")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_n_bootstrap")]
    pub n_bootstrap: usize,
    #[serde(default = "default_ci_level")]
    pub ci_level: f64,
    #[serde(default)]
    pub bootstrap_seed: u64,
    /// Defaults to [`CandidateSet::standard`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<KernelSpec>>,
    #[serde(default = "default_candidate_noise")]
    pub candidate_noise_variance: NoiseSpec,
    #[serde(default)]
    pub adjust: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            n_bootstrap: default_n_bootstrap(),
            ci_level: default_ci_level(),
            bootstrap_seed: 0,
            candidates: None,
            candidate_noise_variance: default_candidate_noise(),
            adjust: false,
        }
    }
}

impl AnalysisConfig {
    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_bootstrap: self.n_bootstrap,
            ci_level: self.ci_level,
            seed: self.bootstrap_seed,
        }
    }

    pub fn candidate_set(&self) -> Result<CandidateSet> {
        match &self.candidates {
            None => Ok(CandidateSet::standard()),
            Some(ks) => CandidateSet::new(ks.clone(), self.candidate_noise_variance),
        }
    }
}

impl HarnessConfig {
    /// Parses and validates; errors name the offending field path.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Usage(format!("{source}: at `{path}`: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |e: Error| match e {
            Error::InputDomain(m) => Error::Usage(m),
            other => other,
        };
        if let Some(g) = &self.generation {
            g.validate().map_err(usage)?;
        }
        if let Some(p) = &self.predictor {
            if let crate::predictor::PredictorKind::Endpoint(e) = &p.kind {
                e.validate()?;
            }
        }
        if let Some(r) = &self.reward {
            r.validate().map_err(usage)?;
        }
        self.analysis.bootstrap().validate().map_err(usage)?;
        self.analysis.candidate_set().map_err(usage)?;
        Ok(())
    }

    pub fn require_generation(&self) -> Result<&GenConfig> {
        self.generation
            .as_ref()
            .ok_or_else(|| Error::Usage("config has no `generation` block".into()))
    }

    pub fn require_predictor(&self) -> Result<&PredictorConfig> {
        self.predictor
            .as_ref()
            .ok_or_else(|| Error::Usage("config has no `predictor` block".into()))
    }

    pub fn require_reward(&self) -> Result<&RewardConfig> {
        self.reward
            .as_ref()
            .ok_or_else(|| Error::Usage("config has no `reward` block".into()))
    }
}
