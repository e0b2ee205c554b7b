use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Architecture, LifConfig};
use crate::error::{Error, Result};
use crate::spiketrain::DatasetSpec;
use crate::training::{SurrogateConfig, SurrogateKind, TrainConfig};

/// Schema version accepted by [`ExperimentConfig::from_json`].
pub const CONFIG_VERSION: u32 = 1;

/// Everything a run depends on. Serialized field order is fixed, so the
/// hash of the re-serialized config identifies a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// `dataset.seed` is replaced by the run seed for every seeded run.
    pub dataset: DatasetSpec,
    pub split: SplitSizes,
    pub architecture: Architecture,
    pub lif: LifConfig<f64>,
    pub surrogates: StageSurrogates,
    pub train: TrainConfig,
    /// Penalty multipliers visited by `sweep`.
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Policies evaluated by `compare`.
    pub policies: Vec<PolicySpec>,
    pub output_dir: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSurrogates {
    /// All spiking units in stage 1.
    pub stage1: SurrogateConfig,
    /// Network units in stage 2.
    pub stage2_main: SurrogateConfig,
    /// The controller in stage 2.
    pub stage2_controller: SurrogateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            dataset: DatasetSpec::default(),
            split: SplitSizes {
                train: 2000,
                validation: 500,
                test: 500,
            },
            architecture: Architecture::default(),
            lif: LifConfig::default(),
            surrogates: StageSurrogates {
                stage1: SurrogateConfig::rectangular(4.0),
                stage2_main: SurrogateConfig::rectangular(4.0),
                stage2_controller: SurrogateConfig::sigmoid(5.0, 0.5, 10),
            },
            train: TrainConfig::default(),
            lambdas: vec![1e-3, 1e-2, 1e-1],
            seeds: vec![0, 1, 2, 3, 4],
            policies: vec![
                PolicySpec::Snn,
                PolicySpec::SkipSnn,
                PolicySpec::FixedSkip(None),
                PolicySpec::RandomSkip(None),
            ],
            output_dir: "runs".into(),
        }
    }
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates; unknown keys and type errors are reported with
    /// the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(".", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact re-serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(
                "version",
                format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        self.dataset
            .validate()
            .map_err(|e| config_err("dataset", e.to_string()))?;
        if self.split.train == 0 {
            return Err(config_err("split.train", "need at least one training sample"));
        }
        if self.split.test == 0 {
            return Err(config_err("split.test", "need at least one test sample"));
        }
        self.architecture
            .validate()
            .map_err(|e| config_err("architecture", e.to_string()))?;
        self.lif.validate().map_err(|e| config_err("lif", e.to_string()))?;
        for (name, s) in [
            ("surrogates.stage1", &self.surrogates.stage1),
            ("surrogates.stage2_main", &self.surrogates.stage2_main),
            ("surrogates.stage2_controller", &self.surrogates.stage2_controller),
        ] {
            s.validate().map_err(|e| config_err(name, e.to_string()))?;
        }
        if self.surrogates.stage1.kind != SurrogateKind::Rectangular {
            return Err(config_err("surrogates.stage1.kind", "stage 1 uses the rectangular surrogate"));
        }
        self.train.validate().map_err(|e| config_err("train", e.to_string()))?;
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(config_err(&format!("lambdas[{i}]"), format!("lambda {l} must be finite and >= 0")));
            }
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "need at least one seed"));
        }
        for (i, p) in self.policies.iter().enumerate() {
            p.validate().map_err(|e| config_err(&format!("policies[{i}]"), e.to_string()))?;
        }
        if self.output_dir.is_empty() {
            return Err(config_err("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Layer sizes `[P, hidden..., C * vote_width]` implied by the dataset.
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.architecture
            .sizes(self.dataset.num_channels, self.dataset.num_classes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A policy named in a config: `snn`, `skipsnn`, `fixed-skip`, `random-skip`,
/// the last two optionally with `:<fraction>`. Without a fraction they match
/// the learned model's awake fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    Snn,
    SkipSnn,
    FixedSkip(Option<f64>),
    RandomSkip(Option<f64>),
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::FixedSkip(Some(f)) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::InvalidArgument(format!("fixed-skip fraction {f} outside (0, 1]")))
            }
            PolicySpec::RandomSkip(Some(p)) if !(0.0..=1.0).contains(&p) => {
                Err(Error::InvalidArgument(format!("random-skip probability {p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Snn => write!(f, "snn"),
            PolicySpec::SkipSnn => write!(f, "skipsnn"),
            PolicySpec::FixedSkip(None) => write!(f, "fixed-skip"),
            PolicySpec::FixedSkip(Some(x)) => write!(f, "fixed-skip:{x}"),
            PolicySpec::RandomSkip(None) => write!(f, "random-skip"),
            PolicySpec::RandomSkip(Some(x)) => write!(f, "random-skip:{x}"),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad policy parameter `{a}` in `{s}`")))
        };
        let spec = match (name, arg) {
            ("snn", None) => PolicySpec::Snn,
            ("skipsnn", None) => PolicySpec::SkipSnn,
            ("fixed-skip", a) => PolicySpec::FixedSkip(a.map(num).transpose()?),
            ("random-skip", a) => PolicySpec::RandomSkip(a.map(num).transpose()?),
            _ => return Err(Error::InvalidArgument(format!("unknown policy `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for PolicySpec {
    fn serialize<Se: serde::Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["train"]["momentum"] = 0.9.into();
        match ExperimentConfig::from_json(&v.to_string()) {
            Err(Error::Config { path, msg }) => {
                assert_eq!(path, "train.momentum");
                assert!(msg.contains("momentum"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_reports_nested_path() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::default().to_json()).unwrap();
        v["dataset"]["horizon"] = "long".into();
        match ExperimentConfig::from_json(&v.to_string()) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "dataset.horizon"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let mut cfg = ExperimentConfig::default();
        cfg.train.batch_size = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "train"));
        let mut cfg = ExperimentConfig::default();
        cfg.lambdas = vec![0.1, -1.0];
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "lambdas[1]"));
        let mut cfg = ExperimentConfig::default();
        cfg.version = 2;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "version"));
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.signal_len = 400;
        assert!(matches!(cfg.validate(), Err(Error::Config { path, .. }) if path == "dataset"));
    }

    #[test]
    fn policy_strings() {
        for s in ["snn", "skipsnn", "fixed-skip", "fixed-skip:0.25", "random-skip", "random-skip:0.1"] {
            assert_eq!(s.parse::<PolicySpec>().unwrap().to_string(), s);
        }
        assert!("fixed-skip:0".parse::<PolicySpec>().is_err());
        assert!("random-skip:1.5".parse::<PolicySpec>().is_err());
        assert!("always".parse::<PolicySpec>().is_err());
    }
}
