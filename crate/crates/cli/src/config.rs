//! Run configuration: a TOML file whose keys mirror the command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tcic::baselines::{select_baseline, BaselineMethod, BaselineSpec};
use tcic::graph::{load_edge_list, NetGraph, NodeId, ProbMode};
use tcic::params::ModelParams;
use tcic::rdr::SamplingMode;

use crate::error::{config_error, Result};
use crate::testbed::scale_free;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSource {
    /// Edge list on disk.
    File { path: PathBuf, directed: bool },
    /// Bundled scale-free generator; `degree` edges attach per new node.
    Synthetic { nodes: usize, degree: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbChoice {
    InverseIndegree,
    Fixed,
    /// Third column of the edge list.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FakeSeeds {
    /// The `count` nodes with the largest reverse-reachable frequency.
    Top { count: usize },
    /// `count` nodes uniformly at random.
    Random { count: usize },
    List { nodes: Vec<NodeId> },
}

impl fmt::Display for FakeSeeds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FakeSeeds::Top { count } => write!(f, "top:{count}"),
            FakeSeeds::Random { count } => write!(f, "random:{count}"),
            FakeSeeds::List { nodes } => {
                let ids: Vec<String> = nodes.iter().map(|v| v.to_string()).collect();
                write!(f, "list:{}", ids.join(" "))
            }
        }
    }
}

impl std::str::FromStr for FakeSeeds {
    type Err = crate::error::CliError;

    /// `top:M`, `random:M` or `list:a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| config_error(format!("fake seeds '{s}': expected kind:value")))?;
        let count = || arg.parse::<usize>().map_err(|_| config_error(format!("bad count in '{s}'")));
        match kind {
            "top" => Ok(FakeSeeds::Top { count: count()? }),
            "random" => Ok(FakeSeeds::Random { count: count()? }),
            "list" => arg
                .split(',')
                .map(|x| x.trim().parse::<NodeId>().map_err(|_| config_error(format!("bad node id '{x}'"))))
                .collect::<Result<_>>()
                .map(|nodes| FakeSeeds::List { nodes }),
            _ => Err(config_error(format!("unknown fake seed kind '{kind}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NammLower,
    NammUpper,
    Sandwich,
    ImRr,
    Influential,
    Proximity,
    Random,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::NammLower,
        Method::NammUpper,
        Method::Sandwich,
        Method::ImRr,
        Method::Influential,
        Method::Proximity,
        Method::Random,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::NammLower => "namm-lower",
            Method::NammUpper => "namm-upper",
            Method::Sandwich => "sandwich",
            Method::ImRr => "im-rr",
            Method::Influential => "influential",
            Method::Proximity => "proximity",
            Method::Random => "random",
        }
    }

    pub fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Method::ImRr => Some(BaselineMethod::ImRr),
            Method::Influential => Some(BaselineMethod::Influential),
            Method::Proximity => Some(BaselineMethod::Proximity),
            Method::Random => Some(BaselineMethod::Random),
            _ => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| config_error(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label written to every output row.
    pub dataset: String,
    pub prob_mode: ProbChoice,
    /// Edge probability when `prob_mode = "fixed"`.
    pub fixed_prob: f64,
    pub methods: Vec<Method>,
    pub k: Vec<usize>,
    pub eps: f64,
    /// 1/n when absent.
    pub delta: Option<f64>,
    pub mode: SamplingMode,
    pub eval_sims: u64,
    pub seed: u64,
    /// RR sets drawn by the influence-ranking baseline and for top fake seeds.
    pub baseline_budget: u64,
    pub output: PathBuf,
    pub graph: GraphSource,
    pub fake_seeds: FakeSeeds,
    pub params: ModelParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: "synthetic".into(),
            prob_mode: ProbChoice::InverseIndegree,
            fixed_prob: 0.1,
            methods: vec![Method::Sandwich, Method::Random],
            k: vec![1, 5, 10, 20],
            eps: 0.1,
            delta: None,
            mode: SamplingMode::Is,
            eval_sims: 20_000,
            seed: 1,
            baseline_budget: 10_000,
            output: PathBuf::from("out"),
            graph: GraphSource::Synthetic { nodes: 1000, degree: 3, seed: 7 },
            fake_seeds: FakeSeeds::Top { count: 10 },
            params: ModelParams::default(),
        }
    }
}

/// A configuration with its graph and fake seeds materialized.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub cfg: RunConfig,
    pub graph: NetGraph,
    pub s_f: Vec<NodeId>,
    pub hash: String,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// First 16 hex digits of SHA-256 over the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(config_error("k values must be positive"));
        }
        if self.eval_sims == 0 {
            return Err(config_error("eval_sims must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_error("no methods listed"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(config_error("eps must lie in (0,1)"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(config_error("delta must lie in (0,1)"));
            }
        }
        if let GraphSource::File { path, .. } = &self.graph {
            if !path.is_file() {
                return Err(config_error(format!("graph file {} does not exist", path.display())));
            }
        }
        self.params.validate()?;
        Ok(())
    }

    fn prob_mode(&self) -> ProbMode {
        match self.prob_mode {
            ProbChoice::InverseIndegree => ProbMode::InverseIndegree,
            ProbChoice::Fixed => ProbMode::Fixed(self.fixed_prob),
            ProbChoice::Explicit => ProbMode::Explicit,
        }
    }

    pub fn load_graph(&self) -> Result<NetGraph> {
        let mut g = match &self.graph {
            GraphSource::File { path, directed } => load_edge_list(path, *directed, self.prob_mode())?,
            GraphSource::Synthetic { nodes, degree, seed } => scale_free(*nodes, *degree, *seed)?,
        };
        if matches!(self.graph, GraphSource::Synthetic { .. }) {
            if self.prob_mode == ProbChoice::Explicit {
                return Err(config_error("synthetic graphs have no explicit probabilities"));
            }
            g.assign_probabilities(self.prob_mode())?;
        }
        Ok(g)
    }

    pub fn fake_seeds_for(&self, g: &NetGraph) -> Result<Vec<NodeId>> {
        let n = g.node_count();
        let pick = |method, count: usize| -> Result<Vec<NodeId>> {
            if count == 0 || count >= n {
                return Err(config_error(format!("fake seed count {count} must lie in 1..{n}")));
            }
            let mut spec = BaselineSpec::new(method, count, tcic::world::combine(self.seed, 0x4641_4b45));
            spec.budget = self.baseline_budget;
            Ok(select_baseline(g, &self.params, &[], &spec)?)
        };
        let mut seeds = match &self.fake_seeds {
            FakeSeeds::Top { count } => pick(BaselineMethod::Influential, *count)?,
            FakeSeeds::Random { count } => pick(BaselineMethod::Random, *count)?,
            FakeSeeds::List { nodes } => {
                if let Some(v) = nodes.iter().find(|&&v| v as usize >= n) {
                    return Err(config_error(format!("fake seed {v} is not a node")));
                }
                nodes.clone()
            }
        };
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.is_empty() {
            return Err(config_error("the fake seed set is empty"));
        }
        Ok(seeds)
    }

    pub fn load(&self) -> Result<Loaded> {
        self.validate()?;
        let graph = self.load_graph()?;
        let s_f = self.fake_seeds_for(&graph)?;
        Ok(Loaded { hash: self.hash()?, cfg: self.clone(), graph, s_f })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_keeps_hash() {
        let cfg = RunConfig { delta: Some(0.01), fake_seeds: FakeSeeds::List { nodes: vec![1, 2] }, ..RunConfig::default() };
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        assert_ne!(RunConfig::default().hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = RunConfig::from_toml("k = [2]\nseed = 5\n[graph]\nkind = \"synthetic\"\nnodes = 50\ndegree = 2\nseed = 1\n").unwrap();
        assert_eq!(cfg.k, vec![2]);
        assert_eq!(cfg.eval_sims, 20_000);
        assert_eq!(cfg.graph, GraphSource::Synthetic { nodes: 50, degree: 2, seed: 1 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("kay = [2]\n").is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        assert!(RunConfig { k: vec![0], ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { eval_sims: 0, ..RunConfig::default() }.validate().is_err());
        let missing = GraphSource::File { path: "/nonexistent/graph.txt".into(), directed: true };
        assert!(RunConfig { graph: missing, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn fake_seed_specs_parse() {
        assert_eq!("top:10".parse::<FakeSeeds>().unwrap(), FakeSeeds::Top { count: 10 });
        assert_eq!("list:3,1".parse::<FakeSeeds>().unwrap(), FakeSeeds::List { nodes: vec![3, 1] });
        assert!("most:3".parse::<FakeSeeds>().is_err());
    }
}
