//! Comparison methods that ignore timing: RR-set influence maximization,
//! influence ranking, proximity to the fake seeds, and random choice.

use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand::rngs::SmallRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{NetGraph, NodeId};
use crate::params::ModelParams;
use crate::rdr::Weight;
use crate::select::{run_selection_loop, BoundParams, LoopOptions, SampleSource};
use crate::sim::check_seeds;
use crate::world::{combine, world_key, World, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    ImRr,
    Influential,
    Proximity,
    Random,
}

impl BaselineMethod {
    pub fn label(self) -> &'static str {
        match self {
            BaselineMethod::ImRr => "im-rr",
            BaselineMethod::Influential => "influential",
            BaselineMethod::Proximity => "proximity",
            BaselineMethod::Random => "random",
        }
    }

    pub fn all() -> [BaselineMethod; 4] {
        [BaselineMethod::ImRr, BaselineMethod::Influential, BaselineMethod::Proximity, BaselineMethod::Random]
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineMethod::all()
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| invalid(format!("unknown baseline '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub method: BaselineMethod,
    pub k: usize,
    /// RR sets drawn for influence ranking.
    pub budget: u64,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn new(method: BaselineMethod, k: usize, seed: u64) -> Self {
        BaselineSpec { method, k, budget: 10_000, eps: 0.1, delta: 0.01, seed }
    }
}

/// Plain reverse-reachable sets over live edges; roots uniform over V.
pub struct RrSampler<'g> {
    g: &'g NetGraph,
    model: WorldModel,
    seed: u64,
}

impl<'g> RrSampler<'g> {
    pub fn new(g: &'g NetGraph, params: &ModelParams, seed: u64) -> Result<Self> {
        Ok(RrSampler { g, model: WorldModel::new(g, params)?, seed })
    }

    pub fn sample(&self, index: u64, seen: &mut Vec<bool>) -> Vec<NodeId> {
        let key = world_key(self.seed, index);
        let world = self.model.world_from_key(key);
        let mut rng = SmallRng::seed_from_u64(combine(key, 0x5252));
        let root = rng.random_range(0..self.g.node_count()) as NodeId;
        seen.clear();
        seen.resize(self.g.node_count(), false);
        seen[root as usize] = true;
        let mut out = vec![root];
        let mut i = 0;
        while i < out.len() {
            let x = out[i];
            i += 1;
            for &e in self.g.in_edges(x) {
                let y = self.g.edge(e).source;
                if !seen[y as usize] && world.is_live(e) {
                    seen[y as usize] = true;
                    out.push(y);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

impl SampleSource for RrSampler<'_> {
    fn node_count(&self) -> usize {
        self.g.node_count()
    }

    fn generate(&self, range: Range<u64>) -> Result<Vec<Vec<(NodeId, Weight)>>> {
        Ok(range
            .into_par_iter()
            .map_init(Vec::new, |seen, i| self.sample(i, seen).into_iter().map(|u| (u, 1)).collect())
            .collect())
    }
}

fn im_rr(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], spec: &BaselineSpec) -> Result<Vec<NodeId>> {
    let n = g.node_count();
    let bounds = BoundParams::new(n, n as f64, spec.k, spec.eps, spec.delta, 0.0, spec.k as f64)?;
    let a = RrSampler::new(g, params, combine(spec.seed, 1))?;
    let b = RrSampler::new(g, params, combine(spec.seed, 2))?;
    let (seeds, ..) = run_selection_loop(&a, &b, &bounds, 1.0, s_f, LoopOptions::default())?;
    Ok(seeds)
}

fn influential(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], spec: &BaselineSpec) -> Result<Vec<NodeId>> {
    let sampler = RrSampler::new(g, params, spec.seed)?;
    let mut count = vec![0u64; g.node_count()];
    let mut seen = Vec::new();
    for i in 0..spec.budget.max(1) {
        sampler.sample(i, &mut seen).into_iter().for_each(|u| count[u as usize] += 1);
    }
    let mut nodes: Vec<NodeId> = (0..g.node_count() as NodeId).filter(|v| !s_f.contains(v)).collect();
    nodes.sort_by_key(|&v| (std::cmp::Reverse(count[v as usize]), v));
    nodes.truncate(spec.k);
    Ok(nodes)
}

/// Out-neighbours of `from` outside `excluded`, by largest incoming
/// probability from `from`, then id.
fn ranked_neighbours(g: &NetGraph, from: &[NodeId], excluded: &[bool]) -> Vec<NodeId> {
    let mut best = vec![-1.0f64; g.node_count()];
    for &s in from {
        for e in g.out_edges(s) {
            let edge = g.edge(e);
            if !excluded[edge.target as usize] {
                best[edge.target as usize] = best[edge.target as usize].max(edge.prob);
            }
        }
    }
    let mut out: Vec<NodeId> = (0..g.node_count() as NodeId).filter(|&v| best[v as usize] >= 0.0).collect();
    out.sort_by(|&a, &b| best[b as usize].total_cmp(&best[a as usize]).then(a.cmp(&b)));
    out
}

fn proximity(g: &NetGraph, s_f: &[NodeId], spec: &BaselineSpec) -> Vec<NodeId> {
    let mut excluded = vec![false; g.node_count()];
    s_f.iter().for_each(|&s| excluded[s as usize] = true);
    let hop1 = ranked_neighbours(g, s_f, &excluded);
    let mut chosen: Vec<NodeId> = hop1.iter().copied().take(spec.k).collect();
    if chosen.len() < spec.k {
        hop1.iter().for_each(|&v| excluded[v as usize] = true);
        let hop2 = ranked_neighbours(g, &hop1, &excluded);
        chosen.extend(hop2.into_iter().take(spec.k - chosen.len()));
    }
    if chosen.len() < spec.k {
        log::warn!("proximity found {} of {} nodes near the fake seeds; padding at random", chosen.len(), spec.k);
        chosen.iter().for_each(|&v| excluded[v as usize] = true);
        let rest: Vec<NodeId> = (0..g.node_count() as NodeId).filter(|&v| !excluded[v as usize]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        chosen.extend(rest.choose_multiple(&mut rng, spec.k - chosen.len()).copied());
    }
    chosen
}

fn random(g: &NetGraph, s_f: &[NodeId], spec: &BaselineSpec) -> Vec<NodeId> {
    let pool: Vec<NodeId> = (0..g.node_count() as NodeId).filter(|v| !s_f.contains(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pool.choose_multiple(&mut rng, spec.k).copied().collect()
}

/// Seed set of at most `spec.k` nodes, disjoint from `s_f`.
pub fn select_baseline(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], spec: &BaselineSpec) -> Result<Vec<NodeId>> {
    if spec.k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    check_seeds(g.node_count(), s_f, &[])?;
    match spec.method {
        BaselineMethod::ImRr => im_rr(g, params, s_f, spec),
        BaselineMethod::Influential => influential(g, params, s_f, spec),
        BaselineMethod::Proximity => Ok(proximity(g, s_f, spec)),
        BaselineMethod::Random => Ok(random(g, s_f, spec)),
    }
}
