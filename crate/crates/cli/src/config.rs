//! Channel configuration files and presets.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use twoway_core::channel::{ChannelParams, YieldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Fiber parameters of the GYS experiment.
    Gys,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YieldForm {
    #[default]
    Approximate,
    Exact,
}

/// On-disk channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub alpha_db_per_km: f64,
    pub eta_bob: f64,
    pub e_d: f64,
    pub y0: f64,
    #[serde(default = "half")]
    pub e0: f64,
    #[serde(default)]
    pub yield_model: YieldForm,
}

fn half() -> f64 {
    0.5
}

impl ChannelConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Gys => {
                let g = ChannelParams::gys();
                Self {
                    alpha_db_per_km: g.alpha_db_per_km,
                    eta_bob: g.eta_bob,
                    e_d: g.e_d,
                    y0: g.y0,
                    e0: g.e0,
                    yield_model: YieldForm::Approximate,
                }
            }
        }
    }

    pub fn params(&self) -> Result<ChannelParams> {
        let p = ChannelParams::new(self.alpha_db_per_km, self.eta_bob, self.e_d, self.y0)?
            .with_e0(self.e0)?
            .with_yield_model(match self.yield_model {
                YieldForm::Approximate => YieldModel::Approximate,
                YieldForm::Exact => YieldModel::Exact,
            });
        Ok(p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).context("parsing channel configuration")?;
        c.params()?;
        Ok(c)
    }
}

/// Resolve `--config` / `--preset`. With neither, the GYS preset is used.
pub fn load_channel(config: Option<&Path>, preset: Option<Preset>) -> Result<ChannelConfig> {
    match (config, preset) {
        (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
        (Some(path), None) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ChannelConfig::from_json(&text).with_context(|| format!("in {}", path.display()))
        }
        (None, p) => Ok(ChannelConfig::preset(p.unwrap_or(Preset::Gys))),
    }
}
