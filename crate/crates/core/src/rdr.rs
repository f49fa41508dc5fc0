//! Reverse Delayed Reward sets.
//!
//! An RDR set rooted at `v` in world `X` lists every candidate `u` together
//! with the reward `u` alone would earn at `v`. Construction works on the
//! region of nodes that reach `v` over live edges, in three phases:
//! a forward pass for F alone (reachability and F's arrival time at the root),
//! a backward delayed-distance search that settles candidates whose paths are
//! disjoint from F, and an exact two-campaign resolution for the rest.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NetGraph, NodeId};
use crate::params::ModelParams;
use crate::sim::{check_seeds, lifted_reward_from_times, reward_from_times, static_reach, Adoption, ForwardReach, NEVER};
use crate::world::{combine, tie_order, world_key, Campaign, ModifiedWorld, NodeSet, World, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Lower,
    Upper,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Lower => "lower",
            Variant::Upper => "upper",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Root drawn from the nodes F actually reaches.
    Is,
    /// Root drawn from all nodes; unreached roots give empty sets.
    Rs,
}

impl SamplingMode {
    pub fn label(self) -> &'static str {
        match self {
            SamplingMode::Is => "IS",
            SamplingMode::Rs => "RS",
        }
    }
}

pub type Weight = u8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenStats {
    /// Worlds drawn before a usable root was found (IS only; 1 otherwise).
    pub attempts: u32,
    pub region_nodes: u32,
    pub backward_nodes: u32,
    pub deferred: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RdrSet {
    /// `None` for an RS sample whose root F does not reach.
    pub root: Option<NodeId>,
    /// Sorted by node id; weights are 1 or 2.
    pub entries: Vec<(NodeId, Weight)>,
    pub mode: SamplingMode,
    pub variant: Variant,
    pub stats: GenStats,
}

impl RdrSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Covered weight: the largest weight of a member in `s`, or 0.
    pub fn coverage(&self, s: &[NodeId]) -> Weight {
        self.entries
            .iter()
            .filter(|(u, _)| s.contains(u))
            .map(|&(_, w)| w)
            .max()
            .unwrap_or(0)
    }

    /// `root|u:w,u:w`; an empty sample prints `-|`.
    pub fn dump_line(&self) -> String {
        let mut out = match self.root {
            Some(r) => format!("{r}|"),
            None => "-|".to_string(),
        };
        for (i, (u, w)) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{u}:{w}");
        }
        out
    }
}

/// Epoch-stamped membership marks; clearing is O(1).
#[derive(Clone, Debug)]
struct Marks {
    stamp: Vec<u32>,
    epoch: u32,
}

impl Marks {
    fn new(n: usize) -> Self {
        Marks { stamp: vec![0; n], epoch: 1 }
    }

    fn clear(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    /// Returns true when `v` was not marked before.
    fn insert(&mut self, v: NodeId) -> bool {
        let s = &mut self.stamp[v as usize];
        if *s == self.epoch {
            false
        } else {
            *s = self.epoch;
            true
        }
    }

    fn has(&self, v: NodeId) -> bool {
        self.stamp[v as usize] == self.epoch
    }
}

impl NodeSet for Marks {
    fn contains(&self, v: NodeId) -> bool {
        self.has(v)
    }
}

/// Epoch-stamped values with a default for unset slots.
#[derive(Clone, Debug)]
struct Slots<T: Copy> {
    val: Vec<T>,
    marks: Marks,
    default: T,
}

impl<T: Copy> Slots<T> {
    fn new(n: usize, default: T) -> Self {
        Slots { val: vec![default; n], marks: Marks::new(n), default }
    }

    fn clear(&mut self) {
        self.marks.clear();
    }

    fn get(&self, v: NodeId) -> T {
        if self.marks.has(v) {
            self.val[v as usize]
        } else {
            self.default
        }
    }

    fn set(&mut self, v: NodeId, x: T) {
        self.marks.insert(v);
        self.val[v as usize] = x;
    }
}

/// Per-thread scratch space for RDR construction.
pub struct RdrWorkspace {
    region: Marks,
    region_nodes: Vec<NodeId>,
    f_nodes: Marks,
    f_arrival: Slots<u32>,
    f_done: Marks,
    dd: Slots<u32>,
    dd_done: Marks,
    overlap: Marks,
    close: Slots<u32>,
    camp: Slots<Adoption>,
    settled: Marks,
    heap: BinaryHeap<Reverse<(u32, NodeId)>>,
    stack: Vec<NodeId>,
}

impl RdrWorkspace {
    pub fn new(n: usize) -> Self {
        RdrWorkspace {
            region: Marks::new(n),
            region_nodes: Vec::new(),
            f_nodes: Marks::new(n),
            f_arrival: Slots::new(n, NEVER),
            f_done: Marks::new(n),
            dd: Slots::new(n, NEVER),
            dd_done: Marks::new(n),
            overlap: Marks::new(n),
            close: Slots::new(n, NEVER),
            camp: Slots::new(n, Adoption::None),
            settled: Marks::new(n),
            heap: BinaryHeap::new(),
            stack: Vec::new(),
        }
    }
}

/// Marks the nodes that reach `root` over live edges. Returns whether an F
/// seed is among them.
fn mark_region<W: World + ?Sized>(g: &NetGraph, world: &W, is_seed: &[bool], root: NodeId, ws: &mut RdrWorkspace) -> bool {
    ws.region.clear();
    ws.region_nodes.clear();
    ws.stack.clear();
    ws.region.insert(root);
    ws.region_nodes.push(root);
    ws.stack.push(root);
    let mut seed_found = is_seed[root as usize];
    while let Some(x) = ws.stack.pop() {
        for &e in g.in_edges(x) {
            let y = g.edge(e).source;
            if !ws.region.has(y) && world.is_live(e) {
                ws.region.insert(y);
                ws.region_nodes.push(y);
                seed_found |= is_seed[y as usize];
                ws.stack.push(y);
            }
        }
    }
    seed_found
}

/// Phase I inside the region: F nodes (S_F and R_F) reaching the root, and
/// F's arrival time at the root when spreading alone.
fn forward_in_region<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], root: NodeId, ws: &mut RdrWorkspace) -> u32 {
    ws.f_nodes.clear();
    ws.stack.clear();
    for &s in s_f {
        if ws.region.has(s) && ws.f_nodes.insert(s) {
            ws.stack.push(s);
        }
    }
    while let Some(x) = ws.stack.pop() {
        for e in g.out_edges(x) {
            let y = g.edge(e).target;
            if ws.region.has(y) && !ws.f_nodes.has(y) && world.is_live(e) {
                ws.f_nodes.insert(y);
                ws.stack.push(y);
            }
        }
    }
    // Dijkstra on close times: seeds close at 0, others at arrival + window
    ws.f_arrival.clear();
    ws.f_done.clear();
    ws.heap.clear();
    for &s in s_f {
        if ws.f_nodes.has(s) {
            ws.f_arrival.set(s, 0);
            ws.heap.push(Reverse((0, s)));
        }
    }
    let seeds_close = |v: NodeId, s_f: &[NodeId]| s_f.contains(&v);
    while let Some(Reverse((close, x))) = ws.heap.pop() {
        if !ws.f_done.insert(x) {
            continue;
        }
        if x == root {
            break;
        }
        for e in g.out_edges(x) {
            let y = g.edge(e).target;
            if !ws.f_nodes.has(y) || ws.f_done.has(y) || !world.is_live(e) || seeds_close(y, s_f) {
                continue;
            }
            let arrival = close.saturating_add(world.meeting_f(e));
            if arrival < ws.f_arrival.get(y) {
                ws.f_arrival.set(y, arrival);
                let c = if y == root { arrival } else { arrival.saturating_add(world.window(y)) };
                ws.heap.push(Reverse((c, y)));
            }
        }
    }
    ws.f_arrival.get(root)
}

/// Phase II: delayed distances to the root and overlap indicators.
/// Returns the settled non-seed nodes in settling order.
fn backward<W: World + ?Sized>(g: &NetGraph, world: &W, is_seed: &[bool], f_nodes: &Marks, root: NodeId, ws: &mut RdrWorkspace) -> Vec<NodeId> {
    ws.dd.clear();
    ws.dd_done.clear();
    ws.heap.clear();
    for &e in g.in_edges(root) {
        let w = g.edge(e).source;
        if w == root || is_seed[w as usize] || !world.is_live(e) {
            continue;
        }
        let d = world.meeting_m(e);
        if d < ws.dd.get(w) {
            ws.dd.set(w, d);
            ws.heap.push(Reverse((d, w)));
        }
    }
    let mut order = Vec::new();
    while let Some(Reverse((d, w))) = ws.heap.pop() {
        if !ws.dd_done.insert(w) {
            continue;
        }
        order.push(w);
        let through = d.saturating_add(world.window(w));
        for &e in g.in_edges(w) {
            let x = g.edge(e).source;
            if x == root || is_seed[x as usize] || ws.dd_done.has(x) || !world.is_live(e) {
                continue;
            }
            let cand = through.saturating_add(world.meeting_m(e));
            if cand < ws.dd.get(x) {
                ws.dd.set(x, cand);
                ws.heap.push(Reverse((cand, x)));
            }
        }
    }
    // overlap: some live successor other than the root is an F node or
    // itself an overlap node (least fixpoint, grown backwards)
    ws.overlap.clear();
    ws.stack.clear();
    ws.stack.extend(ws.region_nodes.iter().copied().filter(|&x| x != root && f_nodes.has(x)));
    while let Some(x) = ws.stack.pop() {
        for &e in g.in_edges(x) {
            let y = g.edge(e).source;
            if y != root && world.is_live(e) && ws.overlap.insert(y) {
                ws.stack.push(y);
            }
        }
    }
    order
}

struct Resolution {
    t_f: u32,
    t_m: u32,
}

/// Phase III: exact two-campaign process restricted to the region, with F
/// seeds and the single mitigation seed `u`, settled in close-time order.
fn resolve<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], u: NodeId, root: NodeId, ws: &mut RdrWorkspace) -> Resolution {
    ws.close.clear();
    ws.camp.clear();
    ws.settled.clear();
    ws.heap.clear();
    let mut start: Vec<(NodeId, Adoption)> = s_f
        .iter()
        .filter(|&&s| ws.region.has(s))
        .map(|&s| (s, Adoption::F))
        .collect();
    start.push((u, Adoption::M));
    for &(s, c) in &start {
        ws.close.set(s, 0);
        ws.camp.set(s, c);
        ws.settled.insert(s);
    }
    let relax = |x: NodeId, c: Adoption, t: u32, ws: &mut RdrWorkspace| {
        let campaign = if c == Adoption::F { Campaign::F } else { Campaign::M };
        for e in g.out_edges(x) {
            let y = g.edge(e).target;
            if !ws.region.has(y) || ws.settled.has(y) || !world.is_live(e) {
                continue;
            }
            let cand = t
                .saturating_add(world.meeting(e, campaign))
                .saturating_add(world.window(y));
            if cand < ws.close.get(y) {
                ws.close.set(y, cand);
                ws.heap.push(Reverse((cand, y)));
            }
        }
    };
    for &(s, c) in &start {
        relax(s, c, 0, ws);
    }
    let mut out = Resolution { t_f: NEVER, t_m: NEVER };
    while let Some(Reverse((t, w))) = ws.heap.pop() {
        if ws.settled.has(w) || t != ws.close.get(w) {
            continue;
        }
        let mut chosen = Adoption::None;
        let (mut first_f, mut first_m) = (NEVER, NEVER);
        for e in tie_order(g, world, w) {
            let x = g.edge(e).source;
            if !ws.settled.has(x) {
                continue;
            }
            let c = ws.camp.get(x);
            let campaign = if c == Adoption::F { Campaign::F } else { Campaign::M };
            let arrival = ws.close.get(x).saturating_add(world.meeting(e, campaign));
            if arrival > t {
                continue;
            }
            if chosen == Adoption::None {
                chosen = c;
            }
            match c {
                Adoption::F => first_f = first_f.min(arrival),
                _ => first_m = first_m.min(arrival),
            }
        }
        debug_assert!(chosen != Adoption::None, "settled node without an in-window arrival");
        ws.settled.insert(w);
        ws.camp.set(w, chosen);
        if w == root {
            out = Resolution { t_f: first_f, t_m: first_m };
            break;
        }
        relax(w, chosen, t, ws);
    }
    out
}

/// Weighted entries of the RDR set rooted at `root` in `world`, assuming the
/// region has been marked. The upper variant runs in the modified world.
#[allow(clippy::too_many_arguments)]
fn entries_for_root<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], is_seed: &[bool], root: NodeId, variant: Variant, ws: &mut RdrWorkspace, stats: &mut GenStats) -> Vec<(NodeId, Weight)> {
    let d = forward_in_region(g, world, s_f, root, ws);
    debug_assert!(d != NEVER, "root outside F's reach");
    // moved out so the modified world can borrow it while `ws` is mutated
    let f_nodes = std::mem::replace(&mut ws.f_nodes, Marks::new(0));
    let entries = match variant {
        Variant::Lower => settle(g, world, s_f, is_seed, &f_nodes, root, d, variant, ws, stats),
        Variant::Upper => {
            // inside the region these are exactly S_F and R_F
            let lifted = ModifiedWorld::new(g, world, &f_nodes);
            settle(g, &lifted, s_f, is_seed, &f_nodes, root, d, variant, ws, stats)
        }
    };
    ws.f_nodes = f_nodes;
    entries
}

#[allow(clippy::too_many_arguments)]
fn settle<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], is_seed: &[bool], f_nodes: &Marks, root: NodeId, d: u32, variant: Variant, ws: &mut RdrWorkspace, stats: &mut GenStats) -> Vec<(NodeId, Weight)> {
    let tau = world.window(root);
    let order = backward(g, world, is_seed, f_nodes, root, ws);
    stats.region_nodes = ws.region_nodes.len() as u32;
    stats.backward_nodes = order.len() as u32;
    let mut entries = Vec::new();
    let mut deferred = Vec::new();
    for &w in &order {
        if ws.overlap.has(w) || f_nodes.has(w) {
            deferred.push(w);
            continue;
        }
        let dd = ws.dd.get(w) as u64;
        let (d, tau) = (d as u64, tau as u64);
        if dd + tau < d {
            entries.push((w, 2));
        } else if dd <= d + tau {
            entries.push((w, 1));
        }
    }
    stats.deferred = deferred.len() as u32;
    if variant == Variant::Upper {
        // the root as its own seed; the lower variant leaves this term out
        entries.push((root, 2));
    }
    for u in deferred {
        let lifted = ws.overlap.has(u) || f_nodes.has(u);
        let r = resolve(g, world, s_f, u, root, ws);
        let weight = match variant {
            Variant::Upper if lifted => lifted_reward_from_times(r.t_f, r.t_m, tau),
            _ => reward_from_times(r.t_f, r.t_m, tau),
        };
        if weight > 0 {
            entries.push((u, weight));
        }
    }
    entries.sort_unstable();
    entries
}

fn seed_flags(n: usize, s_f: &[NodeId]) -> Vec<bool> {
    let mut f = vec![false; n];
    s_f.iter().for_each(|&s| f[s as usize] = true);
    f
}

/// RDR entries for a fixed world and root. Empty when F does not reach `root`.
pub fn rdr_for_root<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], root: NodeId, variant: Variant) -> Vec<(NodeId, Weight)> {
    let is_seed = seed_flags(g.node_count(), s_f);
    let mut ws = RdrWorkspace::new(g.node_count());
    if is_seed[root as usize] || !mark_region(g, world, &is_seed, root, &mut ws) {
        return Vec::new();
    }
    entries_for_root(g, world, s_f, &is_seed, root, variant, &mut ws, &mut GenStats::default())
}

/// Phase I: nodes F reaches on its own.
pub fn phase1_forward<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId]) -> ForwardReach {
    ForwardReach::compute(g, world, s_f)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootedForward {
    /// F nodes (seeds included) that reach the root, excluding the root.
    pub a1: Vec<NodeId>,
    /// Hops plus intermediate windows along F's fastest path; `None` when F
    /// does not reach the root.
    pub distance: Option<u32>,
}

/// Phase I after a root is fixed: the F traversal toward `root` and its
/// delayed distance.
pub fn rooted_forward<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], root: NodeId) -> RootedForward {
    let is_seed = seed_flags(g.node_count(), s_f);
    let mut ws = RdrWorkspace::new(g.node_count());
    if is_seed[root as usize] || !mark_region(g, world, &is_seed, root, &mut ws) {
        return RootedForward { a1: Vec::new(), distance: None };
    }
    let d = forward_in_region(g, world, s_f, root, &mut ws);
    let mut a1: Vec<NodeId> = ws.region_nodes.iter().copied().filter(|&x| x != root && ws.f_nodes.has(x)).collect();
    a1.sort_unstable();
    RootedForward { a1, distance: (d != NEVER).then_some(d) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackwardNode {
    pub node: NodeId,
    pub dd: u32,
    pub overlap: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackwardPhase {
    /// Every settled non-seed node, by node id.
    pub table: Vec<BackwardNode>,
    /// Entries fixed by the delayed-distance rules.
    pub direct: Vec<(NodeId, Weight)>,
    /// Candidates whose reward needs the exact two-campaign resolution.
    pub deferred: Vec<NodeId>,
}

/// Phase II on `world` (pass the modified world for the upper variant).
pub fn phase2_backward<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], root: NodeId) -> BackwardPhase {
    let is_seed = seed_flags(g.node_count(), s_f);
    let mut ws = RdrWorkspace::new(g.node_count());
    if is_seed[root as usize] || !mark_region(g, world, &is_seed, root, &mut ws) {
        return BackwardPhase { table: Vec::new(), direct: Vec::new(), deferred: Vec::new() };
    }
    let d = forward_in_region(g, world, s_f, root, &mut ws) as u64;
    let tau = world.window(root) as u64;
    let f_nodes = std::mem::replace(&mut ws.f_nodes, Marks::new(0));
    let order = backward(g, world, &is_seed, &f_nodes, root, &mut ws);
    ws.f_nodes = f_nodes;
    let mut table: Vec<BackwardNode> = order
        .iter()
        .map(|&w| BackwardNode { node: w, dd: ws.dd.get(w), overlap: ws.overlap.has(w) })
        .collect();
    table.sort_by_key(|b| b.node);
    let mut direct = Vec::new();
    let mut deferred = Vec::new();
    for b in &table {
        if b.overlap || ws.f_nodes.has(b.node) {
            deferred.push(b.node);
        } else if (b.dd as u64) + tau < d {
            direct.push((b.node, 2));
        } else if b.dd as u64 <= d + tau {
            direct.push((b.node, 1));
        }
    }
    BackwardPhase { table, direct, deferred }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TieBreak {
    /// Campaign adopted by each settled region node, by node id.
    pub adoption: Vec<(NodeId, Adoption)>,
    pub close: Vec<(NodeId, u32)>,
    pub root_t_f: u32,
    pub root_t_m: u32,
}

/// Phase III for candidate `u`: resolves both campaigns on the nodes that
/// reach `root` and reports what every settled node adopted.
pub fn phase3_tiebreak<W: World + ?Sized>(g: &NetGraph, world: &W, s_f: &[NodeId], u: NodeId, root: NodeId) -> Result<TieBreak> {
    check_seeds(g.node_count(), s_f, &[u])?;
    let is_seed = seed_flags(g.node_count(), s_f);
    let mut ws = RdrWorkspace::new(g.node_count());
    mark_region(g, world, &is_seed, root, &mut ws);
    if !ws.region.has(u) {
        return Err(crate::error::invalid(format!("candidate {u} does not reach root {root}")));
    }
    forward_in_region(g, world, s_f, root, &mut ws);
    let r = resolve(g, world, s_f, u, root, &mut ws);
    let mut nodes: Vec<NodeId> = ws.region_nodes.iter().copied().filter(|&x| ws.settled.has(x)).collect();
    nodes.sort_unstable();
    Ok(TieBreak {
        adoption: nodes.iter().map(|&x| (x, ws.camp.get(x))).collect(),
        close: nodes.iter().map(|&x| (x, ws.close.get(x))).collect(),
        root_t_f: r.t_f,
        root_t_m: r.t_m,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootChoice {
    Root(NodeId),
    /// RS draw outside R_F.
    Empty,
    /// IS with nothing reached: draw a new world.
    Resample,
}

/// Root selection over an explicit R_F (sorted): IS is uniform over R_F, RS is
/// uniform over all `n` nodes.
pub fn choose_root<R: Rng + ?Sized>(r_f: &[NodeId], n: usize, mode: SamplingMode, rng: &mut R) -> RootChoice {
    match mode {
        SamplingMode::Is => {
            if r_f.is_empty() {
                RootChoice::Resample
            } else {
                RootChoice::Root(r_f[rng.random_range(0..r_f.len())])
            }
        }
        SamplingMode::Rs => {
            let v = rng.random_range(0..n) as NodeId;
            if r_f.binary_search(&v).is_ok() {
                RootChoice::Root(v)
            } else {
                RootChoice::Empty
            }
        }
    }
}

const ROOT_TAG: u64 = 0x52_4f_4f_54;

/// Draws RDR sets for one (graph, parameters, fake seeds) configuration.
///
/// Sample `i` is a pure function of `(seed, i)`. In IS mode the root is drawn
/// uniformly from the nodes F could reach at all and the world is redrawn
/// until F really reaches it, which gives (world, root) pairs with law
/// proportional to Pr[X] * 1[root in R_F^X].
pub struct RdrSampler<'g> {
    g: &'g NetGraph,
    model: WorldModel,
    s_f: Vec<NodeId>,
    is_seed: Vec<bool>,
    candidates: Vec<NodeId>,
    variant: Variant,
    mode: SamplingMode,
    seed: u64,
    max_attempts: u32,
}

impl<'g> RdrSampler<'g> {
    pub fn new(g: &'g NetGraph, params: &ModelParams, s_f: &[NodeId], variant: Variant, mode: SamplingMode, seed: u64) -> Result<Self> {
        check_seeds(g.node_count(), s_f, &[])?;
        if s_f.is_empty() {
            return Err(crate::error::invalid("the fake seed set is empty"));
        }
        let mut s_f = s_f.to_vec();
        s_f.sort_unstable();
        s_f.dedup();
        Ok(RdrSampler {
            g,
            model: WorldModel::new(g, params)?,
            is_seed: seed_flags(g.node_count(), &s_f),
            candidates: static_reach(g, &s_f),
            s_f,
            variant,
            mode,
            seed,
            max_attempts: 1_000_000,
        })
    }

    pub fn graph(&self) -> &NetGraph {
        self.g
    }

    pub fn seeds(&self) -> &[NodeId] {
        &self.s_f
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Nodes F could reach if every edge were live.
    pub fn static_reach(&self) -> &[NodeId] {
        &self.candidates
    }

    pub fn sample(&self, ws: &mut RdrWorkspace, index: u64) -> Result<RdrSet> {
        let g = self.g;
        let base = world_key(self.seed, index);
        let empty = |stats| RdrSet { root: None, entries: Vec::new(), mode: self.mode, variant: self.variant, stats };
        match self.mode {
            SamplingMode::Rs => {
                let world = self.model.world_from_key(base);
                let mut rng = SmallRng::seed_from_u64(combine(base, ROOT_TAG));
                let root = rng.random_range(0..g.node_count()) as NodeId;
                let stats = GenStats { attempts: 1, ..Default::default() };
                if self.is_seed[root as usize] || !mark_region(g, &world, &self.is_seed, root, ws) {
                    return Ok(empty(stats));
                }
                Ok(self.finish(&world, root, ws, stats))
            }
            SamplingMode::Is => {
                if self.candidates.is_empty() {
                    return Err(Error::NoSpread);
                }
                for attempt in 0..self.max_attempts {
                    let key = if attempt == 0 { base } else { combine(base, attempt as u64) };
                    let world = self.model.world_from_key(key);
                    let mut rng = SmallRng::seed_from_u64(combine(key, ROOT_TAG));
                    let root = self.candidates[rng.random_range(0..self.candidates.len())];
                    if mark_region(g, &world, &self.is_seed, root, ws) {
                        let stats = GenStats { attempts: attempt + 1, ..Default::default() };
                        return Ok(self.finish(&world, root, ws, stats));
                    }
                }
                Err(Error::NoSpread)
            }
        }
    }

    fn finish<W: World + ?Sized>(&self, world: &W, root: NodeId, ws: &mut RdrWorkspace, mut stats: GenStats) -> RdrSet {
        let entries = entries_for_root(self.g, world, &self.s_f, &self.is_seed, root, self.variant, ws, &mut stats);
        RdrSet { root: Some(root), entries, mode: self.mode, variant: self.variant, stats }
    }

    /// Samples `range` in parallel, returned in index order.
    pub fn generate(&self, range: Range<u64>) -> Result<Vec<RdrSet>> {
        range
            .into_par_iter()
            .map_init(|| RdrWorkspace::new(self.g.node_count()), |ws, i| self.sample(ws, i))
            .collect()
    }
}

/// One RDR set: sample `index` of stream `seed`.
pub fn build_rdr(g: &NetGraph, params: &ModelParams, s_f: &[NodeId], variant: Variant, mode: SamplingMode, seed: u64, index: u64) -> Result<RdrSet> {
    let sampler = RdrSampler::new(g, params, s_f, variant, mode, seed)?;
    sampler.sample(&mut RdrWorkspace::new(g.node_count()), index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{read_edge_list, ProbMode};
    use crate::sim::Simulator;
    use crate::world::FixedWorld;

    fn line(text: &str) -> NetGraph {
        read_edge_list(text.as_bytes(), true, ProbMode::Fixed(1.0)).unwrap()
    }

    #[test]
    fn delayed_distance_on_a_line() {
        let g = line("0 1\n1 2\n");
        let mut w = FixedWorld::unit(&g);
        w.tau[1] = 2;
        let rf = rooted_forward(&g, &w, &[0], 2);
        assert_eq!(rf.distance, Some(4));
        assert_eq!(rf.a1, vec![0, 1]);
    }

    #[test]
    fn all_blocked_reaches_nothing() {
        let g = line("0 1\n1 2\n");
        let mut w = FixedWorld::unit(&g);
        w.live = vec![false; 2];
        assert!(phase1_forward(&g, &w, &[0]).is_empty());
        assert_eq!(rooted_forward(&g, &w, &[0], 2).distance, None);
    }

    #[test]
    fn neighbour_of_root_has_meeting_distance() {
        let g = line("0 1\n2 1\n");
        let mut w = FixedWorld::unit(&g);
        w.h_m[g.find_edge(2, 1).unwrap() as usize] = 7;
        let p2 = phase2_backward(&g, &w, &[0], 1);
        assert_eq!(p2.table, vec![BackwardNode { node: 2, dd: 7, overlap: false }]);
    }

    #[test]
    fn single_disjoint_path_always_m() {
        let g = line("0 1\n2 3\n3 1\n");
        let w = FixedWorld::unit(&g);
        let tb = phase3_tiebreak(&g, &w, &[0], 2, 3).unwrap();
        assert_eq!(tb.adoption, vec![(2, Adoption::M), (3, Adoption::M)]);
    }

    #[test]
    fn instant_f_leaves_nothing() {
        let g = line("0 1\n");
        assert!(rdr_for_root(&g, &FixedWorld::unit(&g), &[0], 1, Variant::Lower).is_empty());
    }

    #[test]
    fn f_reached_candidate_can_block() {
        // u = 1 is on F's only path; as a mitigation seed it blocks F from 2
        let g = line("0 1\n1 2\n");
        let mut w = FixedWorld::unit(&g);
        w.h_m[g.find_edge(1, 2).unwrap() as usize] = 3;
        assert_eq!(rdr_for_root(&g, &w, &[0], 2, Variant::Lower), vec![(1, 2)]);
    }

    #[test]
    fn entries_match_singleton_simulation_on_merge() {
        // 3-node merge with every ordering
        let g = line("0 2\n1 2\n3 1\n0 1\n");
        for tau2 in 0..3 {
            for order in [[0, 1], [1, 0]] {
                let mut w = FixedWorld::unit(&g);
                w.tau[2] = tau2;
                w.h_m[g.find_edge(1, 2).unwrap() as usize] = 2;
                w.set_order(&g, 2, &order).unwrap();
                let got = rdr_for_root(&g, &w, &[0], 2, Variant::Lower);
                let mut sim = Simulator::new(g.node_count());
                let mut want = Vec::new();
                for u in [1, 3] {
                    sim.run(&g, &w, &[0], &[u]).unwrap();
                    let r = reward_from_times(sim.t_f(2), sim.t_m(2), tau2);
                    if r > 0 {
                        want.push((u, r));
                    }
                }
                assert_eq!(got, want, "tau={tau2} order={order:?}");
            }
        }
    }

    #[test]
    fn dump_format() {
        let set = RdrSet {
            root: Some(3),
            entries: vec![(1, 2), (4, 1)],
            mode: SamplingMode::Is,
            variant: Variant::Lower,
            stats: GenStats::default(),
        };
        assert_eq!(set.dump_line(), "3|1:2,4:1");
        assert_eq!(set.coverage(&[4]), 1);
        assert_eq!(set.coverage(&[1, 4]), 2);
        assert_eq!(set.coverage(&[0]), 0);
    }
}
