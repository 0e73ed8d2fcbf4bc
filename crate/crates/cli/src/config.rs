use std::path::Path;

use anyhow::{bail, Context};
use cmbp::model::presets::Preset;
use cmbp::model::{Model, ModelSpec, DEFAULT_BAND};
use cmbp::verify::SuiteConfig;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// A config file that could not be read as JSON of the expected shape.
#[derive(Debug)]
pub struct ParseError(pub String);

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Preset(Preset),
    Spec(ModelSpec),
}

/// Everything a subcommand may read. Fields a command does not use are
/// accepted and ignored, unknown fields are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub master_seed: Option<u64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub trajectories: Option<u64>,
    #[serde(default)]
    pub naive_summation: bool,
    pub n: Option<u64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<u64>,
    pub theta: Option<f64>,
    pub tolerance_band: Option<f64>,
    pub k_max: Option<usize>,
    pub growth_trajectories: Option<u64>,
    pub level: Option<f64>,
    pub delta: Option<f64>,
    pub share_fraction: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ParseError(format!("config parse error: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ParseError(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ))
            .into());
        }
        cfg.check_positive()?;
        Ok(cfg)
    }

    fn check_positive(&self) -> anyhow::Result<()> {
        let counts = [
            ("K", self.k.map(|x| x as u64)),
            ("trajectories", self.trajectories),
            ("n", self.n),
            ("paths", self.paths),
            ("k_max", self.k_max.map(|x| x as u64)),
            ("growth_trajectories", self.growth_trajectories),
        ];
        for (name, v) in counts {
            if v == Some(0) {
                return Err(ParseError(format!("{name} must be positive")).into());
            }
        }
        let reals = [("T", self.t_end), ("t", self.t), ("dt", self.dt), ("theta", self.theta)];
        for (name, v) in reals {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(ParseError(format!("{name} must be positive and finite")).into());
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> anyhow::Result<Model> {
        let spec = match &self.model {
            ModelConfig::Preset(p) => p.build()?,
            ModelConfig::Spec(s) => s.clone(),
        };
        Ok(Model::new(spec)?)
    }

    pub fn band(&self) -> f64 {
        self.tolerance_band.unwrap_or(DEFAULT_BAND)
    }

    /// The seed from the command line wins over the config file. There is no
    /// fallback: stochastic commands need one of the two.
    pub fn seed(&self, flag: Option<u64>) -> anyhow::Result<u64> {
        match flag.or(self.master_seed) {
            Some(s) => Ok(s),
            None => bail!("a master seed is required: set master_seed in the config or pass --seed"),
        }
    }

    pub fn suite(&self, seed: u64, threads: Option<usize>) -> SuiteConfig {
        let d = SuiteConfig::default();
        SuiteConfig {
            n: self.n.unwrap_or(d.n),
            t: self.t.unwrap_or(d.t),
            trajectories: self.trajectories.unwrap_or(d.trajectories),
            k_max: self.k_max.unwrap_or(d.k_max),
            growth_trajectories: self.growth_trajectories.unwrap_or(d.growth_trajectories),
            theta: self.theta.unwrap_or(d.theta),
            level: self.level.unwrap_or(d.level),
            delta: self.delta.unwrap_or(d.delta),
            share_fraction: self.share_fraction.unwrap_or(d.share_fraction),
            master_seed: seed,
            tolerance_band: self.band(),
            threads,
        }
    }
}
