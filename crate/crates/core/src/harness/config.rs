use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clocksync::ClockConfig;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::mcast::McastConfig;
use crate::simcore::{FailureSpec, Nanos};
use crate::topo::{build_fat_tree, build_jellyfish, load_edge_list, Topology};

/// Version of the CSV layouts written by the harness.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "FRANCIS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TopologySpec {
    FatTree { k: usize },
    Jellyfish { n: usize, r: usize },
    File { path: PathBuf },
}

impl TopologySpec {
    /// Parses `fat-tree:k=8`, `jellyfish:n=200,r=8` or `file:path`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let field = |name: &str| -> Result<usize> {
            rest.split(',')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| k.trim() == name)
                .ok_or_else(|| Error::config(format!("topology '{s}' needs {name}=")))?
                .1
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("topology '{s}': {name} is not a number")))
        };
        match kind {
            "fat-tree" | "fat_tree" | "fattree" => Ok(TopologySpec::FatTree { k: field("k")? }),
            "jellyfish" => Ok(TopologySpec::Jellyfish { n: field("n")?, r: field("r")? }),
            "file" if !rest.is_empty() => Ok(TopologySpec::File { path: rest.into() }),
            _ => Err(Error::config(format!("unknown topology '{s}'"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TopologySpec::FatTree { k } => format!("fat-tree:k={k}"),
            TopologySpec::Jellyfish { n, r } => format!("jellyfish:n={n},r={r}"),
            TopologySpec::File { path } => format!("file:{}", path.display()),
        }
    }

    /// Builds the topology; relative file paths resolve against `base`.
    pub fn build(&self, seed: u64, base: Option<&Path>) -> Result<Topology> {
        match self {
            TopologySpec::FatTree { k } => build_fat_tree(*k),
            TopologySpec::Jellyfish { n, r } => build_jellyfish(*n, *r, seed),
            TopologySpec::File { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::config(format!("cannot read topology {}: {e}", full.display())))?;
                load_edge_list(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UseCase {
    Clocksync,
    Mcast,
    Algorithm { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Simulated-time limit for algorithm runs.
    #[serde(default)]
    pub horizon_ns: Option<Nanos>,
    /// Loss rate applied to every link.
    #[serde(default)]
    pub loss_rate: f64,
    pub topology: TopologySpec,
    pub use_case: UseCase,
    #[serde(default)]
    pub engine: Option<EngineConfig>,
    #[serde(default)]
    pub clock: ClockConfig,
    #[serde(default)]
    pub mcast: McastConfig,
    /// Explicit failures; when empty the use cases inject `auto_failures`
    /// worst-case failures of their own choosing.
    #[serde(default)]
    pub failures: Vec<FailureSpec>,
    #[serde(default = "one")]
    pub auto_failures: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ScenarioConfig {
    pub fn new(topology: TopologySpec, use_case: UseCase, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            horizon_ns: None,
            loss_rate: 0.0,
            topology,
            use_case,
            engine: None,
            clock: ClockConfig::default(),
            mcast: McastConfig::default(),
            failures: Vec::new(),
            auto_failures: 1,
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seed after applying the environment override.
    pub fn effective_seed(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::config(format!("{SEED_ENV}='{v}' is not a seed"))),
            Err(_) => Ok(self.seed),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let h = Sha256::digest(self.to_toml().as_bytes());
        format!("{h:x}")[..16].to_string()
    }

    /// Engine settings: the configured block, or the use case's defaults
    /// (100-byte packets at a 100 Mbps budget for the two use cases).
    pub fn engine_config(&self) -> EngineConfig {
        self.engine.unwrap_or_else(|| match self.use_case {
            UseCase::Algorithm { .. } => EngineConfig::default(),
            _ => EngineConfig { packet_floor: 100, control_budget_bps: Some(100e6), ..Default::default() },
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.loss_rate) {
            return Err(Error::config(format!("loss_rate {} outside [0, 1)", self.loss_rate)));
        }
        self.engine_config().validate()?;
        match &self.use_case {
            UseCase::Clocksync => self.clock.validate(),
            UseCase::Mcast => self.mcast.validate(),
            UseCase::Algorithm { name } if !crate::algos::ALGORITHMS.contains(&name.as_str()) => {
                Err(Error::config(format!("unknown algorithm '{name}'")))
            }
            UseCase::Algorithm { .. } => Ok(()),
        }
    }

    /// Builds the topology with the configured loss rate.
    pub fn topology(&self, seed: u64, base: Option<&Path>) -> Result<Topology> {
        let mut t = self.topology.build(seed, base)?;
        if self.loss_rate > 0.0 {
            t.set_loss_rate(self.loss_rate)?;
        }
        Ok(t)
    }
}
