//! Exhaustive possible-world enumeration on tiny instances: exact
//! objectives, exact RDR coverage expectations and submodularity checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::graph::{EdgeId, NetGraph, NodeId};
use crate::rdr::{rdr_for_root, SamplingMode, Variant};
use crate::sim::{check_seeds, reward_from_times, world_objective, ForwardReach, Objective, Simulator, UpperScorer};
use crate::world::FixedWorld;

/// Finite distribution over small integers.
pub type Support = Vec<(u32, f64)>;

pub const WORLD_LIMIT: f64 = 1e7;

/// `Geometric(m)` on {1, 2, ...} truncated at `cap`; the tail mass sits on `cap`.
pub fn truncated_geometric(m: f64, cap: u32) -> Support {
    assert!(cap >= 1 && m > 0.0 && m <= 1.0);
    let mut out = Vec::new();
    let mut survive = 1.0;
    for j in 1..cap {
        out.push((j, survive * m));
        survive *= 1.0 - m;
    }
    out.push((cap, survive));
    out.retain(|&(_, p)| p > 0.0);
    out
}

/// A graph with finite supports for every random component of a world.
/// Edge liveness uses the graph's probabilities; meeting lengths are drawn
/// only on live edges.
#[derive(Clone, Debug)]
pub struct EnumerableInstance {
    pub graph: NetGraph,
    pub h_f: Vec<Support>,
    pub h_m: Vec<Support>,
    pub tau: Vec<Support>,
    /// Fixed tie order per node (listed in-neighbours first); `None` means
    /// every permutation of the live in-neighbours, uniformly.
    pub order: Vec<Option<Vec<NodeId>>>,
    /// Liveness fixed regardless of the edge probability.
    pub forced: Vec<Option<bool>>,
}

impl EnumerableInstance {
    /// Unit meeting lengths, zero windows, all tie orders.
    pub fn new(graph: NetGraph) -> Self {
        let (m, n) = (graph.edge_count(), graph.node_count());
        EnumerableInstance {
            h_f: vec![vec![(1, 1.0)]; m],
            h_m: vec![vec![(1, 1.0)]; m],
            tau: vec![vec![(0, 1.0)]; n],
            order: vec![None; n],
            forced: vec![None; m],
            graph,
        }
    }

    /// The single world `world`.
    pub fn from_world(graph: NetGraph, world: &FixedWorld) -> Self {
        let mut inst = EnumerableInstance::new(graph);
        for e in 0..inst.graph.edge_count() {
            inst.forced[e] = Some(world.live[e]);
            inst.h_f[e] = vec![(world.h_f[e], 1.0)];
            inst.h_m[e] = vec![(world.h_m[e], 1.0)];
        }
        for v in 0..inst.graph.node_count() {
            inst.tau[v] = vec![(world.tau[v], 1.0)];
            let mut ins: Vec<EdgeId> = inst.graph.in_edges(v as NodeId).to_vec();
            ins.sort_by_key(|&e| (world.tie[e as usize], e));
            inst.order[v] = Some(ins.iter().map(|&e| inst.graph.edge(e).source).collect());
        }
        inst
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        if self.h_f.len() != g.edge_count() || self.h_m.len() != g.edge_count() {
            return Err(invalid("meeting supports must have one entry per edge"));
        }
        if self.forced.len() != g.edge_count() {
            return Err(invalid("forced liveness must have one entry per edge"));
        }
        if self.tau.len() != g.node_count() || self.order.len() != g.node_count() {
            return Err(invalid("window supports and orders must have one entry per node"));
        }
        for s in self.h_f.iter().chain(&self.h_m).chain(&self.tau) {
            let total: f64 = s.iter().map(|x| x.1).sum();
            if s.is_empty() || (total - 1.0).abs() > 1e-12 || s.iter().any(|x| x.1 < 0.0) {
                return Err(invalid("every support must be a probability distribution"));
            }
        }
        for s in self.h_f.iter().chain(&self.h_m) {
            if s.iter().any(|x| x.0 == 0) {
                return Err(invalid("meeting lengths are at least 1"));
            }
        }
        Ok(())
    }

    fn uncertain_edges(&self) -> Vec<EdgeId> {
        (0..self.graph.edge_count() as EdgeId)
            .filter(|&e| self.forced[e as usize].is_none() && self.graph.edge(e).prob < 1.0)
            .collect()
    }

    fn liveness(&self, uncertain: &[EdgeId], mask: u64) -> (Vec<bool>, f64) {
        let mut live: Vec<bool> =
            self.graph.edges().iter().zip(&self.forced).map(|(e, f)| f.unwrap_or(e.prob >= 1.0)).collect();
        let mut prob = 1.0;
        for (i, &e) in uncertain.iter().enumerate() {
            let p = self.graph.edge(e).prob;
            if mask >> i & 1 == 1 {
                live[e as usize] = true;
                prob *= p;
            } else {
                prob *= 1.0 - p;
            }
        }
        (live, prob)
    }

    fn dims(&self, live: &[bool]) -> Vec<Dim> {
        let g = &self.graph;
        let mut dims = Vec::new();
        for (e, &is_live) in live.iter().enumerate().take(g.edge_count()) {
            if is_live {
                if self.h_f[e].len() > 1 {
                    dims.push(Dim::MeetF(e, self.h_f[e].clone()));
                }
                if self.h_m[e].len() > 1 {
                    dims.push(Dim::MeetM(e, self.h_m[e].clone()));
                }
            }
        }
        for v in 0..g.node_count() {
            if self.tau[v].len() > 1 {
                dims.push(Dim::Window(v, self.tau[v].clone()));
            }
            if self.order[v].is_none() {
                let ins: Vec<EdgeId> = g.in_edges(v as NodeId).iter().copied().filter(|&e| live[e as usize]).collect();
                if ins.len() > 1 {
                    dims.push(Dim::Order(permutations(&ins)));
                }
            }
        }
        dims
    }

    /// Exact count of worlds with positive probability.
    pub fn world_count(&self) -> Result<f64> {
        let uncertain = self.uncertain_edges();
        if uncertain.len() > 30 {
            return Err(Error::SpaceTooLarge { size: 2f64.powi(uncertain.len() as i32), limit: WORLD_LIMIT });
        }
        let mut total = 0.0;
        for mask in 0..1u64 << uncertain.len() {
            let (live, _) = self.liveness(&uncertain, mask);
            total += self.dims(&live).iter().map(|d| d.len() as f64).product::<f64>();
            if total > WORLD_LIMIT {
                break;
            }
        }
        Ok(total)
    }

    fn base_world(&self, live: Vec<bool>) -> FixedWorld {
        let g = &self.graph;
        let mut w = FixedWorld::unit(g);
        for e in 0..g.edge_count() {
            w.h_f[e] = self.h_f[e][0].0;
            w.h_m[e] = self.h_m[e][0].0;
        }
        for v in 0..g.node_count() {
            w.tau[v] = self.tau[v][0].0;
            if let Some(order) = &self.order[v] {
                w.set_order(g, v as NodeId, order).expect("validated order");
            }
        }
        w.live = live;
        w
    }

    /// Calls `visit` on every world with its probability. Worlds sharing a
    /// liveness pattern are visited in a fixed order; the per-pattern results
    /// are combined in pattern order.
    pub fn fold_worlds<T, F, G>(&self, init: G, visit: F) -> Result<Vec<T>>
    where
        T: Send,
        G: Fn() -> T + Sync,
        F: Fn(&mut T, &FixedWorld, f64) + Sync,
    {
        self.validate()?;
        let size = self.world_count()?;
        if size > WORLD_LIMIT {
            return Err(Error::SpaceTooLarge { size, limit: WORLD_LIMIT });
        }
        let uncertain = self.uncertain_edges();
        let out = (0..1u64 << uncertain.len())
            .into_par_iter()
            .map(|mask| {
                let mut acc = init();
                let (live, p_live) = self.liveness(&uncertain, mask);
                if p_live == 0.0 {
                    return acc;
                }
                let dims = self.dims(&live);
                let mut world = self.base_world(live);
                let mut idx = vec![0usize; dims.len()];
                loop {
                    let mut p = p_live;
                    for (d, &i) in dims.iter().zip(&idx) {
                        p *= d.apply(&mut world, i);
                    }
                    if p > 0.0 {
                        visit(&mut acc, &world, p);
                    }
                    // odometer
                    let mut j = 0;
                    while j < dims.len() {
                        idx[j] += 1;
                        if idx[j] < dims[j].len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == dims.len() {
                        break;
                    }
                }
                acc
            })
            .collect();
        Ok(out)
    }

    /// Total probability mass of the enumeration (1 up to rounding).
    pub fn total_probability(&self) -> Result<f64> {
        let parts = self.fold_worlds(|| 0.0f64, |acc, _, p| *acc += p)?;
        Ok(parts.into_iter().sum())
    }
}

#[derive(Clone, Debug)]
enum Dim {
    MeetF(usize, Support),
    MeetM(usize, Support),
    Window(usize, Support),
    Order(Vec<Vec<EdgeId>>),
}

impl Dim {
    fn len(&self) -> usize {
        match self {
            Dim::MeetF(_, s) | Dim::MeetM(_, s) | Dim::Window(_, s) => s.len(),
            Dim::Order(p) => p.len(),
        }
    }

    /// Writes choice `i` into `w` and returns its probability.
    fn apply(&self, w: &mut FixedWorld, i: usize) -> f64 {
        match self {
            Dim::MeetF(e, s) => {
                w.h_f[*e] = s[i].0;
                s[i].1
            }
            Dim::MeetM(e, s) => {
                w.h_m[*e] = s[i].0;
                s[i].1
            }
            Dim::Window(v, s) => {
                w.tau[*v] = s[i].0;
                s[i].1
            }
            Dim::Order(perms) => {
                for (pos, &e) in perms[i].iter().enumerate() {
                    w.tie[e as usize] = pos as u64;
                }
                1.0 / perms.len() as f64
            }
        }
    }
}

fn permutations(items: &[EdgeId]) -> Vec<Vec<EdgeId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn sum_parts(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut total = vec![0.0; len];
    for part in parts {
        total.iter_mut().zip(part).for_each(|(t, x)| *t += x);
    }
    total
}

/// Exact objective value of each seed set.
pub fn enumerate_many(inst: &EnumerableInstance, s_f: &[NodeId], objective: Objective, sets: &[Vec<NodeId>]) -> Result<Vec<f64>> {
    let n = inst.graph.node_count();
    for s in sets {
        check_seeds(n, s_f, s)?;
    }
    match objective {
        Objective::MuLower => return exact_mu_lower_sets(inst, s_f, sets),
        Objective::MuUpper => return exact_mu_upper_sets(inst, s_f, sets),
        Objective::Mu => {}
    }
    let g = &inst.graph;
    let len = sets.len();
    let parts = inst.fold_worlds(
        || (vec![0.0; len], Simulator::new(n)),
        |(acc, sim), world, p| {
            for (slot, s) in acc.iter_mut().zip(sets) {
                let tally = world_objective(objective, sim, g, world, s_f, s).expect("checked seeds");
                *slot += p * tally.total as f64;
            }
        },
    )?;
    Ok(sum_parts(parts.into_iter().map(|x| x.0).collect(), len))
}

/// Exact objective value of one seed set.
pub fn enumerate_exact(inst: &EnumerableInstance, s_f: &[NodeId], objective: Objective, s_m: &[NodeId]) -> Result<f64> {
    Ok(enumerate_many(inst, s_f, objective, &[s_m.to_vec()])?[0])
}

/// Exact lower objective of many sets from one pass: per world, the reward of
/// every singleton at every node, then a max per set.
pub fn exact_mu_lower_sets(inst: &EnumerableInstance, s_f: &[NodeId], sets: &[Vec<NodeId>]) -> Result<Vec<f64>> {
    let g = &inst.graph;
    let n = g.node_count();
    let mut singles: Vec<NodeId> = sets.iter().flatten().copied().collect();
    singles.sort_unstable();
    singles.dedup();
    let slot_of = |u: NodeId| singles.binary_search(&u).expect("member");
    let len = sets.len();
    let parts = inst.fold_worlds(
        || (vec![0.0; len], Simulator::new(n), Vec::<u8>::new()),
        |(acc, sim, table), world, p| {
            let reach = ForwardReach::compute(g, world, s_f);
            let r = reach.members.len();
            if r == 0 {
                return;
            }
            table.clear();
            table.resize(singles.len() * r, 0);
            for (i, &u) in singles.iter().enumerate() {
                sim.run(g, world, s_f, &[u]).expect("checked seeds");
                for (j, &v) in reach.members.iter().enumerate() {
                    if v != u {
                        table[i * r + j] = reward_from_times(sim.t_f(v), sim.t_m(v), world.tau[v as usize]);
                    }
                }
            }
            for (slot, s) in acc.iter_mut().zip(sets) {
                let rows: Vec<usize> = s.iter().map(|&u| slot_of(u) * r).collect();
                let total: u32 = (0..r).map(|j| rows.iter().map(|&b| table[b + j]).max().unwrap_or(0) as u32).sum();
                *slot += p * total as f64;
            }
        },
    )?;
    Ok(sum_parts(parts.into_iter().map(|x| x.0).collect(), len))
}

/// Exact upper objective of many sets from one pass, built from a per-world
/// table of singleton rewards like [`exact_mu_lower_sets`].
fn exact_mu_upper_sets(inst: &EnumerableInstance, s_f: &[NodeId], sets: &[Vec<NodeId>]) -> Result<Vec<f64>> {
    let g = &inst.graph;
    let n = g.node_count();
    let mut singles: Vec<NodeId> = sets.iter().flatten().copied().collect();
    singles.sort_unstable();
    singles.dedup();
    let slot_of = |u: NodeId| singles.binary_search(&u).expect("member");
    let len = sets.len();
    let parts = inst.fold_worlds(
        || (vec![0.0; len], Simulator::new(n), Vec::<u8>::new()),
        |(acc, sim, table), world, p| {
            let reach = ForwardReach::compute(g, world, s_f);
            let r = reach.members.len();
            if r == 0 {
                return;
            }
            table.clear();
            table.resize(singles.len() * r, 0);
            let mut scorer = UpperScorer::new(g, world, &reach);
            for (i, &u) in singles.iter().enumerate() {
                scorer.rewards(sim, s_f, u, &mut table[i * r..(i + 1) * r]).expect("checked seeds");
            }
            for (slot, s) in acc.iter_mut().zip(sets) {
                let rows: Vec<usize> = s.iter().map(|&u| slot_of(u) * r).collect();
                let total: u32 = (0..r).map(|j| rows.iter().map(|&b| table[b + j]).max().unwrap_or(0) as u32).sum();
                *slot += p * total as f64;
            }
        },
    )?;
    Ok(sum_parts(parts.into_iter().map(|x| x.0).collect(), len))
}

/// Exact expected number of non-seed nodes F reaches alone.
pub fn exact_inf_f(inst: &EnumerableInstance, s_f: &[NodeId]) -> Result<f64> {
    check_seeds(inst.graph.node_count(), s_f, &[])?;
    let g = &inst.graph;
    let parts = inst.fold_worlds(
        || 0.0f64,
        |acc, world, p| *acc += p * ForwardReach::compute(g, world, s_f).len() as f64,
    )?;
    Ok(parts.into_iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdrExpectation {
    /// Expected covered weight of one sample under the sampling mode.
    pub mean_coverage: f64,
    /// That expectation rescaled to the objective: times INF_F for IS, times n for RS.
    pub sigma: f64,
    pub inf_f: f64,
}

/// Exact expectation of the coverage of `s` by one RDR set, built for every
/// (world, root) pair.
pub fn exact_rdr_expectation(inst: &EnumerableInstance, s_f: &[NodeId], variant: Variant, mode: SamplingMode, s: &[NodeId]) -> Result<RdrExpectation> {
    Ok(exact_rdr_expectations(inst, s_f, variant, mode, &[s.to_vec()])?.remove(0))
}

/// [`exact_rdr_expectation`] for many sets from one enumeration.
pub fn exact_rdr_expectations(inst: &EnumerableInstance, s_f: &[NodeId], variant: Variant, mode: SamplingMode, sets: &[Vec<NodeId>]) -> Result<Vec<RdrExpectation>> {
    let (totals, inf_f) = rdr_totals(inst, s_f, variant, sets)?;
    Ok(normalize(&totals, inf_f, inst.graph.node_count() as f64, mode))
}

/// IS and RS expectations, in that order, from a single enumeration; the
/// modes differ only in normalization.
pub fn exact_rdr_expectations_both(inst: &EnumerableInstance, s_f: &[NodeId], variant: Variant, sets: &[Vec<NodeId>]) -> Result<[Vec<RdrExpectation>; 2]> {
    let (totals, inf_f) = rdr_totals(inst, s_f, variant, sets)?;
    let n = inst.graph.node_count() as f64;
    Ok([normalize(&totals, inf_f, n, SamplingMode::Is), normalize(&totals, inf_f, n, SamplingMode::Rs)])
}

/// Sums over worlds and reached roots of Pr[X] * coverage, plus INF_F.
fn rdr_totals(inst: &EnumerableInstance, s_f: &[NodeId], variant: Variant, sets: &[Vec<NodeId>]) -> Result<(Vec<f64>, f64)> {
    let g = &inst.graph;
    for s in sets {
        check_seeds(g.node_count(), s_f, s)?;
    }
    let len = sets.len();
    let parts = inst.fold_worlds(
        || (vec![0.0f64; len], 0.0f64),
        |(cov, inf), world, p| {
            let reach = ForwardReach::compute(g, world, s_f);
            *inf += p * reach.len() as f64;
            for &v in &reach.members {
                let entries = rdr_for_root(g, world, s_f, v, variant);
                if entries.is_empty() {
                    continue;
                }
                for (slot, s) in cov.iter_mut().zip(sets) {
                    let w = entries.iter().filter(|(u, _)| s.contains(u)).map(|&(_, w)| w).max().unwrap_or(0);
                    *slot += p * w as f64;
                }
            }
        },
    )?;
    let mut totals = vec![0.0; len];
    let mut inf_f = 0.0;
    for (c, i) in parts {
        totals.iter_mut().zip(c).for_each(|(t, x)| *t += x);
        inf_f += i;
    }
    Ok((totals, inf_f))
}

fn normalize(totals: &[f64], inf_f: f64, n: f64, mode: SamplingMode) -> Vec<RdrExpectation> {
    totals
        .iter()
        .map(|&total| match mode {
            SamplingMode::Is => {
                let mean = if inf_f > 0.0 { total / inf_f } else { 0.0 };
                RdrExpectation { mean_coverage: mean, sigma: mean * inf_f, inf_f }
            }
            SamplingMode::Rs => {
                let mean = total / n;
                RdrExpectation { mean_coverage: mean, sigma: mean * n, inf_f }
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub a: Vec<NodeId>,
    pub b: Vec<NodeId>,
    pub w: NodeId,
    /// f(A + w) - f(A)
    pub gain_a: f64,
    /// f(B + w) - f(B)
    pub gain_b: f64,
}

fn subsets_up_to(items: &[NodeId], max: usize) -> Vec<Vec<NodeId>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![(Vec::new(), 0usize)];
    for _ in 0..max {
        let mut next = Vec::new();
        for (s, start) in frontier {
            for (i, &item) in items.iter().enumerate().skip(start) {
                let mut t: Vec<NodeId> = s.clone();
                t.push(item);
                out.push(t.clone());
                next.push((t, i + 1));
            }
        }
        frontier = next;
    }
    out
}

/// Every (A ⊆ B, w ∉ B) with |B| ≤ `max_size` where the marginal gain of `w`
/// at A is below its gain at B by more than 1e-9.
pub fn check_submodularity(inst: &EnumerableInstance, s_f: &[NodeId], objective: Objective, max_size: usize) -> Result<Vec<Violation>> {
    let n = inst.graph.node_count() as NodeId;
    let candidates: Vec<NodeId> = (0..n).filter(|v| !s_f.contains(v)).collect();
    let sets = subsets_up_to(&candidates, (max_size + 1).min(candidates.len()));
    let values = enumerate_many(inst, s_f, objective, &sets)?;
    let value: std::collections::HashMap<&[NodeId], f64> = sets.iter().map(|s| s.as_slice()).zip(values).collect();
    let with = |s: &[NodeId], w: NodeId| {
        let mut t = s.to_vec();
        t.push(w);
        t.sort_unstable();
        value[t.as_slice()]
    };
    let mut out = Vec::new();
    for b in sets.iter().filter(|s| s.len() <= max_size) {
        for a in sets.iter().filter(|a| a.len() <= b.len() && a.iter().all(|x| b.contains(x))) {
            for &w in candidates.iter().filter(|w| !b.contains(w)) {
                let gain_a = with(a, w) - value[a.as_slice()];
                let gain_b = with(b, w) - value[b.as_slice()];
                if gain_a < gain_b - 1e-9 {
                    out.push(Violation { a: a.clone(), b: b.clone(), w, gain_a, gain_b });
                }
            }
        }
    }
    Ok(out)
}

/// Knobs for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct RandomInstanceSpec {
    pub nodes: usize,
    pub edges: usize,
    /// Edges whose liveness is uncertain; the rest get probability 1.
    pub uncertain_edges: usize,
    pub meeting_cap: u32,
    pub max_window: u32,
}

impl Default for RandomInstanceSpec {
    fn default() -> Self {
        RandomInstanceSpec { nodes: 6, edges: 8, uncertain_edges: 4, meeting_cap: 3, max_window: 1 }
    }
}

/// Small random instance with node 0 as the natural fake seed: node 0 has an
/// out-edge and the probabilities are dyadic rationals.
pub fn random_instance(spec: RandomInstanceSpec, seed: u64) -> Result<EnumerableInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.nodes;
    if n < 2 {
        return Err(invalid("need at least two nodes"));
    }
    let max_edges = n * (n - 1);
    let wanted = spec.edges.min(max_edges).max(1);
    let mut raw: Vec<(NodeId, NodeId, f64)> = Vec::new();
    let mut present = std::collections::HashSet::new();
    let first = rng.random_range(1..n) as NodeId;
    present.insert((0, first));
    raw.push((0, first, 1.0));
    while raw.len() < wanted {
        let u = rng.random_range(0..n) as NodeId;
        let v = rng.random_range(0..n) as NodeId;
        if u != v && present.insert((u, v)) {
            raw.push((u, v, 1.0));
        }
    }
    let probs = [0.25, 0.5, 0.75];
    let uncertain = spec.uncertain_edges.min(raw.len());
    for item in raw.iter_mut().take(uncertain) {
        item.2 = probs[rng.random_range(0..probs.len())];
    }
    let graph = NetGraph::from_edges(n, raw, true)?;
    let mut inst = EnumerableInstance::new(graph);
    let ms = [0.5, 1.0 / 3.0, 1.0];
    for e in 0..inst.graph.edge_count() {
        if spec.meeting_cap > 1 {
            inst.h_m[e] = truncated_geometric(ms[rng.random_range(0..ms.len())], spec.meeting_cap);
        }
    }
    for v in 0..n {
        if spec.max_window > 0 && rng.random_bool(0.5) {
            let top = rng.random_range(1..=spec.max_window);
            inst.tau[v] = vec![(0, 0.5), (top, 0.5)];
        }
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{read_edge_list, ProbMode};

    #[test]
    fn bound_tables_match_per_world_evaluation() {
        let spec = RandomInstanceSpec { nodes: 6, edges: 8, uncertain_edges: 3, meeting_cap: 2, max_window: 2 };
        let sets: Vec<Vec<NodeId>> = vec![vec![1], vec![2, 5], vec![1, 3, 4], vec![5]];
        for seed in 0..4 {
            let inst = random_instance(spec, seed).unwrap();
            for objective in [Objective::MuLower, Objective::MuUpper] {
                let fast = enumerate_many(&inst, &[0], objective, &sets).unwrap();
                let g = &inst.graph;
                let parts = inst
                    .fold_worlds(
                        || (vec![0.0; sets.len()], Simulator::new(6)),
                        |(acc, sim), world, p| {
                            for (slot, s) in acc.iter_mut().zip(&sets) {
                                *slot += p * world_objective(objective, sim, g, world, &[0], s).unwrap().total as f64;
                            }
                        },
                    )
                    .unwrap();
                let slow = sum_parts(parts.into_iter().map(|x| x.0).collect(), sets.len());
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "{objective:?} seed {seed}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn both_modes_match_single_mode_calls() {
        let spec = RandomInstanceSpec { nodes: 5, edges: 6, uncertain_edges: 2, meeting_cap: 2, max_window: 1 };
        let inst = random_instance(spec, 7).unwrap();
        let sets = vec![vec![1], vec![2, 3], vec![4]];
        let both = exact_rdr_expectations_both(&inst, &[0], Variant::Lower, &sets).unwrap();
        for (i, mode) in [SamplingMode::Is, SamplingMode::Rs].into_iter().enumerate() {
            assert_eq!(both[i], exact_rdr_expectations(&inst, &[0], Variant::Lower, mode, &sets).unwrap());
        }
    }

    #[test]
    fn truncated_geometric_sums_to_one() {
        for cap in 1..6 {
            let s = truncated_geometric(0.3, cap);
            assert!((s.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_node_instance() {
        let g = read_edge_list("0 1 0.5\n".as_bytes(), true, ProbMode::Explicit).unwrap();
        let inst = EnumerableInstance::new(g);
        assert_eq!(inst.world_count().unwrap(), 2.0);
        // v is saved whenever F would reach it
        assert_eq!(enumerate_exact(&inst, &[0], Objective::Mu, &[1]).unwrap(), 1.0);
        assert_eq!(enumerate_exact(&inst, &[0], Objective::MuLower, &[1]).unwrap(), 0.0);
        assert_eq!(enumerate_exact(&inst, &[0], Objective::MuUpper, &[1]).unwrap(), 1.0);
    }

    #[test]
    fn blocked_everywhere_is_zero() {
        let g = read_edge_list("0 1\n1 2\n".as_bytes(), true, ProbMode::Fixed(1.0)).unwrap();
        let mut inst = EnumerableInstance::new(g);
        inst.forced = vec![Some(false); 2];
        for obj in [Objective::Mu, Objective::MuLower, Objective::MuUpper] {
            assert_eq!(enumerate_exact(&inst, &[0], obj, &[2]).unwrap(), 0.0);
        }
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(&[1, 2, 3]).len(), 6);
    }

    #[test]
    fn random_instance_mass() {
        for seed in 0..5 {
            let inst = random_instance(RandomInstanceSpec::default(), seed).unwrap();
            assert!((inst.total_probability().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn size_guard() {
        let mut text = String::new();
        for i in 0..40 {
            text.push_str(&format!("{} {} 0.5\n", i, i + 1));
        }
        let inst = EnumerableInstance::new(read_edge_list(text.as_bytes(), true, ProbMode::Explicit).unwrap());
        assert!(matches!(enumerate_exact(&inst, &[0], Objective::Mu, &[]), Err(Error::SpaceTooLarge { .. })));
    }
}
