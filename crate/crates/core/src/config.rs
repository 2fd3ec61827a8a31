//! Run configuration: TOML schema, named presets and `key=value` overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pseudospec::GridSpec;
use crate::train::{AdamHyper, OptimizerConfig, SgdmHyper, TrainConfig, WarmStart};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown preset `{0}` (known: sgdm-paper, sgdm-beta095, adam-paper, seeds-paper)")]
    UnknownPreset(String),
    #[error("malformed override `{0}`: expected key=value")]
    Override(String),
    #[error("override `{key}` does not address a config field")]
    OverridePath { key: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Toy,
    Pseudo,
    Train,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub curvature: f64,
    pub eta: f64,
    pub beta: f64,
    /// Last power in the reported `‖J^t‖₂` series.
    pub t_max: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            curvature: 5.0,
            eta: 0.18,
            beta: 0.9,
            t_max: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Scalar momentum toy; fields default to the `[toy]` section.
    Toy {
        curvature: Option<f64>,
        eta: Option<f64>,
        beta: Option<f64>,
    },
    /// `n×n` Jordan block with eigenvalue `lambda`.
    Jordan { lambda: f64, n: usize },
    /// Real matrix, one row per line, entries separated by commas or whitespace.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudoConfig {
    pub operator: OperatorSpec,
    /// Defaults to a square around the spectrum.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_true")]
    pub kreiss: bool,
    #[serde(default)]
    pub ep_probe: bool,
    /// `[re, im]`; defaults to the eigenvalue of largest modulus.
    #[serde(default)]
    pub ep_center: Option<[f64; 2]>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_true() -> bool {
    true
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-4, 1e-5, 1e-6, 1e-7, 1e-8]
}

impl Default for PseudoConfig {
    fn default() -> Self {
        Self {
            operator: OperatorSpec::Toy {
                curvature: None,
                eta: None,
                beta: None,
            },
            grid: None,
            kreiss: true,
            ep_probe: false,
            ep_center: None,
            epsilons: default_epsilons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub toy: ToyConfig,
    #[serde(default)]
    pub pseudo: PseudoConfig,
    #[serde(default = "sgdm_paper_train")]
    pub train: TrainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn sgdm_paper_train() -> TrainConfig {
    TrainConfig::new(OptimizerConfig::Sgdm(SgdmHyper { eta: 0.18, beta: 0.9 }), 600, 0)
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            out_dir: None,
            toy: ToyConfig::default(),
            pseudo: PseudoConfig::default(),
            train: sgdm_paper_train(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Applies `a.b.c=value` overrides. Values are read as TOML literals and
    /// fall back to plain strings; the result must still match the schema.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| ConfigError::Override(raw.to_string()))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Override(raw.to_string()));
            }
            let parsed = parse_literal(value);
            let mut slot = &mut root;
            let parts: Vec<&str> = key.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = slot.as_table_mut().ok_or_else(|| ConfigError::OverridePath {
                    key: key.to_string(),
                })?;
                if i + 1 == parts.len() {
                    table.insert(part.to_string(), parsed.clone());
                    break;
                }
                slot = table
                    .entry(part.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
        }
        root.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.sweep.seeds.is_empty() {
            return Err(ConfigError::Invalid("sweep.seeds is empty".into()));
        }
        if self.toy.t_max == 0 {
            return Err(ConfigError::Invalid("toy.t_max must be positive".into()));
        }
        Ok(())
    }
}

fn parse_literal(value: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    toml::from_str::<Wrap>(&format!("v = {value}"))
        .map(|w| w.v)
        .unwrap_or_else(|_| toml::Value::String(value.to_string()))
}

pub const PRESETS: [&str; 4] = ["sgdm-paper", "sgdm-beta095", "adam-paper", "seeds-paper"];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::new(Experiment::Train);
    match name {
        "sgdm-paper" => {}
        "sgdm-beta095" => {
            cfg.train.optimizer = OptimizerConfig::Sgdm(SgdmHyper { eta: 0.18, beta: 0.95 });
        }
        "adam-paper" => {
            cfg.train.optimizer = OptimizerConfig::Adam(AdamHyper {
                eta: 0.1,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            });
        }
        "seeds-paper" => {
            cfg.experiment = Experiment::Sweep;
            cfg.train.steps = 300;
            cfg.train.warm_start = Some(WarmStart {
                steps: 100,
                eta: 0.01,
            });
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
            back.validate().unwrap();
        }
        assert!(matches!(preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("experiment = \"toy\"\ncolour = 3\n").is_err());
        assert!(RunConfig::from_toml("experiment = \"toy\"\n[toy]\ncurvature = 1.0\neta = 0.1\nbeta = 0.5\nt_max = 5\nlr = 1\n").is_err());
        let cfg = RunConfig::new(Experiment::Train);
        assert!(cfg.with_overrides(&["train.learning_rate=0.1"]).is_err());
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let cfg = RunConfig::from_toml("experiment = \"toy\"\n").unwrap();
        assert_eq!(cfg.toy, ToyConfig::default());
        assert_eq!(cfg.train.steps, 600);
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = preset("sgdm-paper").unwrap();
        let out = cfg
            .with_overrides(&[
                "train.optimizer.beta=0.95",
                "train.seed=7",
                "toy.curvature=2",
                "train.init=uniform",
                "out_dir=runs/x",
            ])
            .unwrap();
        assert_eq!(out.train.optimizer, OptimizerConfig::Sgdm(SgdmHyper { eta: 0.18, beta: 0.95 }));
        assert_eq!(out.train.seed, 7);
        assert_eq!(out.toy.curvature, 2.0);
        assert_eq!(out.out_dir, Some(PathBuf::from("runs/x")));
        assert!(cfg.with_overrides(&["train.seed"]).is_err());
        assert!(cfg.with_overrides(&["toy.curvature=abc"]).is_err());
    }
}
