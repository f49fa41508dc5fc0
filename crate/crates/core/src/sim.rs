//! Forward simulation of the two-campaign process, the delay-specific reward
//! and Monte-Carlo estimates of the mitigation objectives.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeId, NetGraph, NodeId};
use crate::params::ModelParams;
use crate::stats::EbStop;
use crate::world::{Campaign, ModifiedWorld, World, WorldModel};

/// Sentinel for "never happened".
pub const NEVER: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Adoption {
    None,
    F,
    M,
}

impl From<Campaign> for Adoption {
    fn from(c: Campaign) -> Self {
        match c {
            Campaign::F => Adoption::F,
            Campaign::M => Adoption::M,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CascadeTrace {
    pub adoption: Vec<Adoption>,
    /// First F (resp. M) meeting while the node was still undecided.
    pub t_f: Vec<u32>,
    pub t_m: Vec<u32>,
    pub open: Vec<u32>,
    pub close: Vec<u32>,
    pub termination: u32,
}

impl CascadeTrace {
    /// Nodes adopting `which` exactly at `step`, in id order.
    pub fn adopted_at(&self, which: Adoption, step: u32) -> Vec<NodeId> {
        (0..self.adoption.len())
            .filter(|&v| self.adoption[v] == which && self.close[v] == step)
            .map(|v| v as NodeId)
            .collect()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        let t = |x: u32| if x == NEVER { "-".to_string() } else { x.to_string() };
        for v in 0..self.adoption.len() {
            let _ = writeln!(
                out,
                "{v} {:?} open={} close={} tF={} tM={}",
                self.adoption[v],
                t(self.open[v]),
                t(self.close[v]),
                t(self.t_f[v]),
                t(self.t_m[v])
            );
        }
        let _ = writeln!(out, "terminated at {}", self.termination);
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Deliver = 0,
    Close = 1,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    step: u32,
    kind: EventKind,
    node: NodeId,
    edge: EdgeId,
    campaign: Campaign,
}

/// Reusable simulation workspace; resetting costs only the touched nodes.
pub struct Simulator {
    adoption: Vec<Adoption>,
    open: Vec<u32>,
    close: Vec<u32>,
    t_f: Vec<u32>,
    t_m: Vec<u32>,
    /// Earliest tie-break position among deliveries so far, and its campaign.
    best: Vec<(u64, EdgeId, Campaign)>,
    touched: Vec<NodeId>,
    queue: BinaryHeap<Reverse<Event>>,
    termination: u32,
}

const NO_BEST: (u64, EdgeId, Campaign) = (u64::MAX, EdgeId::MAX, Campaign::F);

pub(crate) fn check_seeds(n: usize, s_f: &[NodeId], s_m: &[NodeId]) -> Result<()> {
    let mut fake = vec![false; n];
    for &s in s_f.iter().chain(s_m) {
        if s as usize >= n {
            return Err(invalid(format!("seed {s} outside 0..{n}")));
        }
    }
    for &s in s_f {
        fake[s as usize] = true;
    }
    match s_m.iter().find(|&&s| fake[s as usize]) {
        Some(&s) => Err(Error::OverlappingSeeds(s)),
        None => Ok(()),
    }
}

impl Simulator {
    pub fn new(n: usize) -> Self {
        Simulator {
            adoption: vec![Adoption::None; n],
            open: vec![NEVER; n],
            close: vec![NEVER; n],
            t_f: vec![NEVER; n],
            t_m: vec![NEVER; n],
            best: vec![NO_BEST; n],
            touched: Vec::new(),
            queue: BinaryHeap::new(),
            termination: 0,
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            let v = v as usize;
            self.adoption[v] = Adoption::None;
            self.open[v] = NEVER;
            self.close[v] = NEVER;
            self.t_f[v] = NEVER;
            self.t_m[v] = NEVER;
            self.best[v] = NO_BEST;
        }
        self.touched.clear();
        self.queue.clear();
        self.termination = 0;
    }

    fn commit<W: World + ?Sized>(&mut self, g: &NetGraph, world: &W, v: NodeId, c: Campaign, step: u32) {
        self.adoption[v as usize] = c.into();
        self.termination = self.termination.max(step);
        for e in g.out_edges(v) {
            if !world.is_live(e) {
                continue;
            }
            let target = g.edge(e).target;
            if self.adoption[target as usize] != Adoption::None {
                continue;
            }
            let h = world.meeting(e, c);
            self.queue.push(Reverse(Event {
                step: step.saturating_add(h),
                kind: EventKind::Deliver,
                node: target,
                edge: e,
                campaign: c,
            }));
        }
    }

    /// Runs the process to quiescence. Seeds adopt at step 0.
    pub fn run<W: World + ?Sized>(&mut self, g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId]) -> Result<()> {
        check_seeds(g.node_count(), s_f, s_m)?;
        self.reset();
        for (seeds, c) in [(s_f, Campaign::F), (s_m, Campaign::M)] {
            for &s in seeds {
                let i = s as usize;
                if self.open[i] != NEVER {
                    continue;
                }
                self.touched.push(s);
                self.open[i] = 0;
                self.close[i] = 0;
                self.adoption[i] = c.into();
                match c {
                    Campaign::F => self.t_f[i] = 0,
                    Campaign::M => self.t_m[i] = 0,
                }
            }
        }
        for (seeds, c) in [(s_f, Campaign::F), (s_m, Campaign::M)] {
            for &s in seeds {
                self.commit(g, world, s, c, 0);
            }
        }
        while let Some(Reverse(ev)) = self.queue.pop() {
            let w = ev.node as usize;
            match ev.kind {
                EventKind::Deliver => {
                    if self.adoption[w] != Adoption::None {
                        continue;
                    }
                    if self.open[w] == NEVER {
                        self.touched.push(ev.node);
                        self.open[w] = ev.step;
                        let close = ev.step.saturating_add(world.window(ev.node));
                        self.close[w] = close;
                        self.queue.push(Reverse(Event {
                            step: close,
                            kind: EventKind::Close,
                            node: ev.node,
                            edge: 0,
                            campaign: Campaign::F,
                        }));
                    }
                    let slot = match ev.campaign {
                        Campaign::F => &mut self.t_f[w],
                        Campaign::M => &mut self.t_m[w],
                    };
                    *slot = (*slot).min(ev.step);
                    let key = (world.tie_key(ev.edge), ev.edge, ev.campaign);
                    if (key.0, key.1) < (self.best[w].0, self.best[w].1) {
                        self.best[w] = key;
                    }
                }
                EventKind::Close => {
                    let c = self.best[w].2;
                    self.commit(g, world, ev.node, c, ev.step);
                }
            }
        }
        Ok(())
    }

    pub fn adoption(&self, v: NodeId) -> Adoption {
        self.adoption[v as usize]
    }

    pub fn t_f(&self, v: NodeId) -> u32 {
        self.t_f[v as usize]
    }

    pub fn t_m(&self, v: NodeId) -> u32 {
        self.t_m[v as usize]
    }

    pub fn trace(&self) -> CascadeTrace {
        CascadeTrace {
            adoption: self.adoption.clone(),
            t_f: self.t_f.clone(),
            t_m: self.t_m.clone(),
            open: self.open.clone(),
            close: self.close.clone(),
            termination: self.termination,
        }
    }
}

/// Simulates both campaigns in `world` and returns the full trace.
pub fn simulate<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId]) -> Result<CascadeTrace> {
    let mut sim = Simulator::new(g.node_count());
    sim.run(g, world, s_f, s_m)?;
    Ok(sim.trace())
}

/// Delay-specific reward of a node given its first-meeting times.
pub fn reward_from_times(t_f: u32, t_m: u32, tau: u32) -> u8 {
    if t_m == NEVER {
        return 0;
    }
    if t_f == NEVER {
        return 2;
    }
    let (tf, tm, tau) = (t_f as u64, t_m as u64, tau as u64);
    if tm + tau < tf {
        2
    } else if tm <= tf + tau {
        1
    } else {
        0
    }
}

/// The lifted reward used by the upper bound: the in-window case pays 2.
pub fn lifted_reward_from_times(t_f: u32, t_m: u32, tau: u32) -> u8 {
    if t_m == NEVER {
        0
    } else if t_f == NEVER || t_m as u64 <= t_f as u64 + tau as u64 {
        2
    } else {
        0
    }
}

pub fn reward(trace: &CascadeTrace, v: NodeId, in_r_f: bool, tau_v: u32) -> u8 {
    if !in_r_f {
        return 0;
    }
    reward_from_times(trace.t_f[v as usize], trace.t_m[v as usize], tau_v)
}

/// Nodes reached by F spreading alone over live edges.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardReach {
    /// R_F: reached non-seed nodes.
    pub in_reach: Vec<bool>,
    /// R_F in increasing id order.
    pub members: Vec<NodeId>,
    /// S_F together with R_F.
    pub f_nodes: Vec<bool>,
}

impl ForwardReach {
    pub fn compute<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId]) -> Self {
        let n = g.node_count();
        let mut f_nodes = vec![false; n];
        let mut queue = VecDeque::new();
        for &s in s_f {
            if !f_nodes[s as usize] {
                f_nodes[s as usize] = true;
                queue.push_back(s);
            }
        }
        let mut in_reach = vec![false; n];
        let mut members = Vec::new();
        while let Some(u) = queue.pop_front() {
            for e in g.out_edges(u) {
                let v = g.edge(e).target;
                if !f_nodes[v as usize] && world.is_live(e) {
                    f_nodes[v as usize] = true;
                    in_reach[v as usize] = true;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        ForwardReach { in_reach, members, f_nodes }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Count of F-reached non-seed nodes in one world, without allocating masks
/// beyond the visited set.
pub fn reach_count<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], seen: &mut Vec<bool>, stack: &mut Vec<NodeId>) -> usize {
    seen.clear();
    seen.resize(g.node_count(), false);
    stack.clear();
    for &s in s_f {
        if !seen[s as usize] {
            seen[s as usize] = true;
            stack.push(s);
        }
    }
    let mut count = 0;
    while let Some(u) = stack.pop() {
        for e in g.out_edges(u) {
            let v = g.edge(e).target;
            if !seen[v as usize] && world.is_live(e) {
                seen[v as usize] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count
}

/// Non-seed nodes reachable from `s_f` in the graph itself (every edge live).
pub fn static_reach(g: &NetGraph, s_f: &[NodeId]) -> Vec<NodeId> {
    let mut seen = vec![false; g.node_count()];
    let mut stack: Vec<NodeId> = Vec::new();
    for &s in s_f {
        if !seen[s as usize] {
            seen[s as usize] = true;
            stack.push(s);
        }
    }
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        for e in g.out_edges(u) {
            let v = g.edge(e).target;
            if !seen[v as usize] {
                seen[v as usize] = true;
                out.push(v);
                stack.push(v);
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RewardTally {
    pub total: u64,
    pub twos: u64,
    pub ones: u64,
}

impl RewardTally {
    fn add(&mut self, r: u8) {
        self.total += r as u64;
        match r {
            2 => self.twos += 1,
            1 => self.ones += 1,
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Mu,
    MuLower,
    MuUpper,
}

impl Objective {
    pub fn label(self) -> &'static str {
        match self {
            Objective::Mu => "mu",
            Objective::MuLower => "mu_lower",
            Objective::MuUpper => "mu_upper",
        }
    }
}

/// Mitigation of `s_m` in one world. A mitigation seed that F would reach
/// counts as saved with reward 2.
pub fn world_mu<W: World + ?Sized>(sim: &mut Simulator, g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId], reach: &ForwardReach) -> Result<RewardTally> {
    sim.run(g, world, s_f, s_m)?;
    let mut tally = RewardTally::default();
    for &v in &reach.members {
        tally.add(reward_from_times(sim.t_f(v), sim.t_m(v), world.window(v)));
    }
    Ok(tally)
}

/// Sum over nodes of the best singleton reward from a seed other than the
/// node itself.
pub fn world_mu_lower<W: World + ?Sized>(sim: &mut Simulator, g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId], reach: &ForwardReach) -> Result<RewardTally> {
    check_seeds(g.node_count(), s_f, s_m)?;
    let mut best = vec![0u8; reach.members.len()];
    for &u in s_m {
        sim.run(g, world, s_f, &[u])?;
        for (slot, &v) in best.iter_mut().zip(&reach.members) {
            if v != u {
                *slot = (*slot).max(reward_from_times(sim.t_f(v), sim.t_m(v), world.window(v)));
            }
        }
    }
    let mut tally = RewardTally::default();
    best.into_iter().for_each(|r| tally.add(r));
    Ok(tally)
}

/// Nodes that reach `A1(v) \ {v}` along at least one live edge without
/// passing through `v`, where `A1(v)` are the F nodes reaching `v`.
pub fn overlap_set<W: World + ?Sized>(g: &NetGraph, world: &W, reach: &ForwardReach, v: NodeId) -> Vec<NodeId> {
    let n = g.node_count();
    let mut a1 = vec![false; n];
    let mut stack = vec![v];
    a1[v as usize] = true;
    while let Some(x) = stack.pop() {
        for &e in g.in_edges(x) {
            let y = g.edge(e).source;
            if reach.f_nodes[y as usize] && !a1[y as usize] && world.is_live(e) {
                a1[y as usize] = true;
                stack.push(y);
            }
        }
    }
    let mut marked = vec![false; n];
    let mut expanded = vec![false; n];
    let mut out = Vec::new();
    let mut stack: Vec<NodeId> = (0..n as NodeId).filter(|&x| x != v && a1[x as usize]).collect();
    while let Some(x) = stack.pop() {
        if expanded[x as usize] {
            continue;
        }
        expanded[x as usize] = true;
        for &e in g.in_edges(x) {
            let y = g.edge(e).source;
            if y != v && !marked[y as usize] && world.is_live(e) {
                marked[y as usize] = true;
                out.push(y);
                stack.push(y);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Candidates paid the lifted reward at `v`: the F nodes reaching `v` (other
/// than `v`) together with [`overlap_set`].
pub fn lift_set<W: World + ?Sized>(g: &NetGraph, world: &W, reach: &ForwardReach, v: NodeId) -> Vec<NodeId> {
    let mut out = overlap_set(g, world, reach, v);
    let mut stack = vec![v];
    let mut seen = vec![false; g.node_count()];
    seen[v as usize] = true;
    while let Some(x) = stack.pop() {
        for &e in g.in_edges(x) {
            let y = g.edge(e).source;
            if reach.f_nodes[y as usize] && !seen[y as usize] && world.is_live(e) {
                seen[y as usize] = true;
                out.push(y);
                stack.push(y);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Per-node rewards of single M seeds under the upper objective in one world.
/// Runs in the world with critical M delays removed and pays the lifted reward
/// to the candidates in [`lift_set`].
pub struct UpperScorer<'a, W: ?Sized> {
    g: &'a NetGraph,
    world: &'a W,
    reach: &'a ForwardReach,
    lifted_world: ModifiedWorld<'a, W>,
    overlap: HashMap<NodeId, Vec<NodeId>>,
}

impl<'a, W: World + ?Sized> UpperScorer<'a, W> {
    pub fn new(g: &'a NetGraph, world: &'a W, reach: &'a ForwardReach) -> Self {
        UpperScorer { g, world, reach, lifted_world: ModifiedWorld::new(g, world, &reach.f_nodes[..]), overlap: HashMap::new() }
    }

    /// Writes the reward of seed `u` at each member of F's reach, in member
    /// order, into `out`. The seed counts at itself.
    pub fn rewards(&mut self, sim: &mut Simulator, s_f: &[NodeId], u: NodeId, out: &mut [u8]) -> Result<()> {
        let (g, world, reach) = (self.g, self.world, self.reach);
        sim.run(g, &self.lifted_world, s_f, &[u])?;
        for (slot, &v) in out.iter_mut().zip(&reach.members) {
            let (tf, tm, tau) = (sim.t_f(v), sim.t_m(v), world.window(v));
            let plain = reward_from_times(tf, tm, tau);
            let lifted = lifted_reward_from_times(tf, tm, tau);
            *slot = if lifted > plain && self.overlap.entry(v).or_insert_with(|| lift_set(g, world, reach, v)).binary_search(&u).is_ok() {
                lifted
            } else {
                plain
            };
        }
        Ok(())
    }
}

/// Upper-bound objective in one world: the best singleton reward at each node.
pub fn world_mu_upper<W: World + ?Sized>(sim: &mut Simulator, g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId], reach: &ForwardReach) -> Result<RewardTally> {
    check_seeds(g.node_count(), s_f, s_m)?;
    let mut scorer = UpperScorer::new(g, world, reach);
    let mut best = vec![0u8; reach.members.len()];
    let mut row = vec![0u8; reach.members.len()];
    for &u in s_m {
        scorer.rewards(sim, s_f, u, &mut row)?;
        best.iter_mut().zip(&row).for_each(|(b, &r)| *b = (*b).max(r));
    }
    let mut tally = RewardTally::default();
    best.into_iter().for_each(|r| tally.add(r));
    Ok(tally)
}

pub fn world_objective<W: World + ?Sized>(objective: Objective, sim: &mut Simulator, g: &NetGraph, world: &W, s_f: &[NodeId], s_m: &[NodeId]) -> Result<RewardTally> {
    let reach = ForwardReach::compute(g, world, s_f);
    match objective {
        Objective::Mu => world_mu(sim, g, world, s_f, s_m, &reach),
        Objective::MuLower => world_mu_lower(sim, g, world, s_f, s_m, &reach),
        Objective::MuUpper => world_mu_upper(sim, g, world, s_f, s_m, &reach),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MitigationEstimate {
    pub objective: Objective,
    pub mean: f64,
    pub se: f64,
    pub sims: u64,
    /// Node-events with reward 2 and reward 1, summed over all worlds.
    pub reward2: u64,
    pub reward1: u64,
}

impl MitigationEstimate {
    pub fn reward2_frac(&self) -> f64 {
        let t = self.reward2 + self.reward1;
        if t == 0 {
            0.0
        } else {
            self.reward2 as f64 / t as f64
        }
    }

    pub fn reward1_frac(&self) -> f64 {
        let t = self.reward2 + self.reward1;
        if t == 0 {
            0.0
        } else {
            self.reward1 as f64 / t as f64
        }
    }

    pub fn csv_header() -> &'static str {
        "objective,mean,se,sims,reward2_frac,reward1_frac"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.objective.label(),
            self.mean,
            self.se,
            self.sims,
            self.reward2_frac(),
            self.reward1_frac()
        )
    }
}

/// Mean and standard error from the per-world totals. Integer accumulation
/// keeps the result independent of reduction order.
pub(crate) fn summarize(objective: Objective, tallies: &[RewardTally]) -> MitigationEstimate {
    let n = tallies.len() as u64;
    let (mut s, mut s2, mut twos, mut ones) = (0u128, 0u128, 0u64, 0u64);
    for t in tallies {
        s += t.total as u128;
        s2 += (t.total as u128) * (t.total as u128);
        twos += t.twos;
        ones += t.ones;
    }
    let nf = n as f64;
    let mean = s as f64 / nf;
    let se = if n > 1 {
        // (n*s2 - s^2) is exact in integers
        let num = (n as u128) * s2 - s * s;
        let var = num as f64 / (nf * (nf - 1.0));
        (var / nf).sqrt()
    } else {
        0.0
    };
    MitigationEstimate { objective, mean, se, sims: n, reward2: twos, reward1: ones }
}

/// Averages the chosen objective over `num_sims` independent lazy worlds.
pub fn estimate_mitigation(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], s_m: &[NodeId], objective: Objective, num_sims: u64, seed: u64) -> Result<MitigationEstimate> {
    if num_sims == 0 {
        return Err(invalid("num_sims must be at least 1"));
    }
    check_seeds(g.node_count(), s_f, s_m)?;
    let model = WorldModel::new(g, params)?;
    let tallies = (0..num_sims)
        .into_par_iter()
        .map_init(
            || Simulator::new(g.node_count()),
            |sim, i| world_objective(objective, sim, g, &model.world(seed, i), s_f, s_m),
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(objective, &tallies))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfEstimate {
    pub value: f64,
    pub samples: u64,
    /// Standard error of the plain sample mean over the samples used.
    pub se: f64,
}

/// (eps', delta') relative approximation of the expected number of non-seed
/// nodes F reaches alone, via an empirical-Bernstein stopping rule.
pub fn estimate_inf_f(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], eps_prime: f64, delta_prime: f64, seed: u64) -> Result<InfEstimate> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) || !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(invalid("eps' and delta' must lie in (0,1)"));
    }
    check_seeds(g.node_count(), s_f, &[])?;
    let range = static_reach(g, s_f).len();
    if range == 0 {
        return Ok(InfEstimate { value: 0.0, samples: 0, se: 0.0 });
    }
    let model = WorldModel::new(g, params)?;
    let mut rule = EbStop::new(eps_prime, delta_prime, range as f64);
    let mut next = 0u64;
    let mut batch = 256u64;
    let estimate = loop {
        let counts: Vec<usize> = (next..next + batch)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |(seen, stack), i| reach_count(g, &model.world(seed, i), s_f, seen, stack),
            )
            .collect();
        next += batch;
        batch = (batch * 2).min(1 << 16);
        if let Some(value) = counts.into_iter().find_map(|c| rule.push(c as f64)) {
            break value;
        }
    };
    if estimate > g.node_count() as f64 / 2.0 {
        log::warn!(
            "estimated fake influence {estimate:.1} exceeds n/2 = {}; the sample bounds assume it does not",
            g.node_count() as f64 / 2.0
        );
    }
    Ok(InfEstimate { value: estimate, samples: rule.count(), se: rule.standard_error() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{read_edge_list, ProbMode};
    use crate::world::FixedWorld;

    fn graph(text: &str, n_hint: usize) -> NetGraph {
        let g = read_edge_list(text.as_bytes(), true, ProbMode::Fixed(1.0)).unwrap();
        assert!(g.node_count() <= n_hint);
        g
    }

    #[test]
    fn reward_step_shape() {
        assert_eq!(reward_from_times(10, 3, 4), 2);
        assert_eq!(reward_from_times(10, 7, 4), 1);
        assert_eq!(reward_from_times(10, 15, 4), 0);
        assert_eq!(reward_from_times(10, 6, 4), 1);
        assert_eq!(reward_from_times(10, 14, 4), 1);
        assert_eq!(reward_from_times(NEVER, 15, 4), 2);
        assert_eq!(reward_from_times(3, NEVER, 4), 0);
        assert_eq!(lifted_reward_from_times(10, 14, 4), 2);
        assert_eq!(lifted_reward_from_times(10, 15, 4), 0);
    }

    #[test]
    fn reward_outside_reach_is_zero() {
        let g = graph("0 1\n", 2);
        let trace = simulate(&g, &FixedWorld::unit(&g), &[], &[1]).unwrap();
        assert_eq!(reward(&trace, 1, false, 0), 0);
    }

    #[test]
    fn overlapping_seeds_rejected() {
        let g = graph("0 1\n", 2);
        assert!(matches!(
            simulate(&g, &FixedWorld::unit(&g), &[0], &[0]),
            Err(Error::OverlappingSeeds(0))
        ));
    }

    #[test]
    fn single_campaign_reaches_everything_live() {
        let g = graph("0 1\n1 2\n2 3\n0 4\n", 5);
        let mut w = FixedWorld::unit(&g);
        w.live[g.find_edge(0, 4).unwrap() as usize] = false;
        let trace = simulate(&g, &w, &[0], &[]).unwrap();
        let reach = ForwardReach::compute(&g, &w, &[0]);
        assert_eq!(reach.members, vec![1, 2, 3]);
        for v in 1..4 {
            assert_eq!(trace.adoption[v], Adoption::F);
            assert_eq!(trace.close[v], v as u32);
        }
        assert_eq!(trace.adoption[4], Adoption::None);
        assert_eq!(trace.termination, 3);
    }

    #[test]
    fn window_delays_adoption() {
        let g = graph("0 1\n1 2\n", 3);
        let mut w = FixedWorld::unit(&g);
        w.tau[1] = 2;
        let trace = simulate(&g, &w, &[0], &[]).unwrap();
        assert_eq!((trace.open[1], trace.close[1]), (1, 3));
        assert_eq!(trace.t_f[2], 4);
    }

    #[test]
    fn tie_break_follows_order() {
        // 0 (F) and 1 (M) both reach 2 at step 1
        let g = graph("0 2\n1 2\n", 3);
        let mut w = FixedWorld::unit(&g);
        w.set_order(&g, 2, &[1, 0]).unwrap();
        assert_eq!(simulate(&g, &w, &[0], &[1]).unwrap().adoption[2], Adoption::M);
        w.set_order(&g, 2, &[0, 1]).unwrap();
        assert_eq!(simulate(&g, &w, &[0], &[1]).unwrap().adoption[2], Adoption::F);
    }

    #[test]
    fn late_arrival_outside_window_ignored() {
        let g = graph("0 2\n1 2\n", 3);
        let mut w = FixedWorld::unit(&g);
        w.h_m[g.find_edge(1, 2).unwrap() as usize] = 3;
        w.tau[2] = 1;
        w.set_order(&g, 2, &[1, 0]).unwrap();
        let trace = simulate(&g, &w, &[0], &[1]).unwrap();
        assert_eq!(trace.adoption[2], Adoption::F);
        assert_eq!(trace.t_m[2], NEVER);
        w.tau[2] = 2;
        let trace = simulate(&g, &w, &[0], &[1]).unwrap();
        assert_eq!(trace.adoption[2], Adoption::M);
        assert_eq!((trace.t_f[2], trace.t_m[2]), (1, 3));
    }

    #[test]
    fn overlap_set_excludes_root_paths() {
        // F: 0 -> 1 -> 3 (root); 2 -> 1 makes 2 an overlap node; 4 -> 3 is not.
        let g = graph("0 1\n1 3\n2 1\n4 3\n5 2\n", 6);
        let w = FixedWorld::unit(&g);
        let reach = ForwardReach::compute(&g, &w, &[0]);
        assert_eq!(overlap_set(&g, &w, &reach, 3), vec![0, 2, 5]);
    }

    #[test]
    fn inf_isolated_zero() {
        let g = graph("1 2\n", 3);
        let est = estimate_inf_f(&g, &ModelParams::default(), &[0], 0.1, 0.1, 1).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.samples, 0);
    }
}
