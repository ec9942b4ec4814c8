use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentorConfig, Method};
use crate::bench::{ProbeSpec, SynthesisSpec};
use crate::error::{Error, Result};
use crate::nn::{EncoderSpec, FrameNet, TemporalNetSpec};
use crate::train::OptimConfig;
use crate::world::WorldSpec;

/// How the reference network behind the StillMix bank is trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub encoder: EncoderSpec,
    pub optim: OptimConfig,
    pub seed: u64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            encoder: FrameNet::default_encoder(),
            optim: OptimConfig {
                epochs: 15,
                ..OptimConfig::default()
            },
            seed: 0,
        }
    }
}

/// Everything one experiment needs. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub synthesis: SynthesisSpec,
    pub model: TemporalNetSpec,
    /// One row of the report per entry.
    pub methods: Vec<AugmentorConfig>,
    pub optim: OptimConfig,
    pub reference: ReferenceConfig,
    /// `None` skips the domain-gap measurement.
    pub probe: Option<ProbeSpec>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldSpec::default(),
            synthesis: SynthesisSpec::default(),
            model: TemporalNetSpec::default(),
            methods: vec![
                AugmentorConfig::with_method(Method::None),
                AugmentorConfig::with_method(Method::Stillmix),
            ],
            optim: OptimConfig::default(),
            reference: ReferenceConfig::default(),
            probe: Some(ProbeSpec::default()),
            seeds: (0..5).collect(),
            out: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every part, including that pools resolve.
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        let [_, _, h, w] = self.world.dims();
        self.synthesis.resolve(h, w)?;
        self.optim.validate()?;
        self.reference.optim.validate()?;
        if let Some(probe) = &self.probe {
            probe.optim.validate()?;
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            m.validate()?;
            if self.methods[..i].iter().any(|o| o.method == m.method) {
                return Err(Error::config(format!("method `{}` is listed twice", m.method.name())));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("seeds must be distinct"));
        }
        Ok(())
    }

    pub fn needs_bank(&self) -> bool {
        self.methods.iter().any(|m| m.method == Method::Stillmix)
    }
}
