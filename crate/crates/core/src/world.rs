//! Possible worlds: edge liveness, meeting lengths, window lengths and
//! tie-break orders.
//!
//! Lazy worlds derive every field from a hash of (seed, index, field, entity),
//! so a field has the same value no matter when, or whether, other fields are
//! queried.

use std::fmt::Write as _;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::error::{invalid, Result};
use crate::graph::{EdgeId, NetGraph, NodeId};
use crate::params::{assign_meeting_probs, meeting_length, AwSampler, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Campaign {
    F,
    M,
}

/// Read access to one realization of the model.
pub trait World {
    fn is_live(&self, e: EdgeId) -> bool;
    fn meeting_f(&self, e: EdgeId) -> u32;
    fn meeting_m(&self, e: EdgeId) -> u32;
    fn window(&self, v: NodeId) -> u32;
    /// Position key of in-edge `e` in the tie-break order of its target;
    /// smaller keys come first. Equal keys are ordered by edge id.
    fn tie_key(&self, e: EdgeId) -> u64;

    fn meeting(&self, e: EdgeId, c: Campaign) -> u32 {
        match c {
            Campaign::F => self.meeting_f(e),
            Campaign::M => self.meeting_m(e),
        }
    }
}

impl<W: World + ?Sized> World for &W {
    fn is_live(&self, e: EdgeId) -> bool {
        (**self).is_live(e)
    }
    fn meeting_f(&self, e: EdgeId) -> u32 {
        (**self).meeting_f(e)
    }
    fn meeting_m(&self, e: EdgeId) -> u32 {
        (**self).meeting_m(e)
    }
    fn window(&self, v: NodeId) -> u32 {
        (**self).window(v)
    }
    fn tie_key(&self, e: EdgeId) -> u64 {
        (**self).tie_key(e)
    }
}

/// Tie-break order of `v`'s live in-edges.
pub fn tie_order<W: World + ?Sized>(g: &NetGraph, world: &W, v: NodeId) -> Vec<EdgeId> {
    let mut live: Vec<EdgeId> = g.in_edges(v).iter().copied().filter(|&e| world.is_live(e)).collect();
    live.sort_by_key(|&e| (world.tie_key(e), e));
    live
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes two 64-bit values into a derived stream seed.
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a.rotate_left(23) ^ mix64(b.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Key of the `index`-th world drawn from stream `seed`.
pub fn world_key(seed: u64, index: u64) -> u64 {
    combine(combine(seed, 0x5eed), index)
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Field {
    Live = 1,
    MeetF = 2,
    MeetM = 3,
    Window = 4,
    Tie = 5,
}

fn field_rng(key: u64, field: Field, entity: u32) -> SmallRng {
    SmallRng::seed_from_u64(combine(combine(key, field as u64), entity as u64))
}

/// Everything needed to sample worlds on one graph.
#[derive(Clone, Debug)]
pub struct WorldModel {
    prob: Vec<f64>,
    m_f: Vec<f64>,
    m_m: Vec<f64>,
    aw: AwSampler,
}

impl WorldModel {
    pub fn new(g: &NetGraph, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(WorldModel {
            prob: g.edges().iter().map(|e| e.prob).collect(),
            m_f: vec![params.meeting_prob_f; g.edge_count()],
            m_m: assign_meeting_probs(g, params)?,
            aw: AwSampler::new(params)?,
        })
    }

    pub fn meeting_prob_m(&self, e: EdgeId) -> f64 {
        self.m_m[e as usize]
    }

    pub fn world(&self, seed: u64, index: u64) -> LazyWorld<'_> {
        LazyWorld { model: self, key: world_key(seed, index) }
    }

    pub fn world_from_key(&self, key: u64) -> LazyWorld<'_> {
        LazyWorld { model: self, key }
    }
}

/// A world sampled on demand.
#[derive(Clone, Copy)]
pub struct LazyWorld<'a> {
    model: &'a WorldModel,
    key: u64,
}

impl LazyWorld<'_> {
    pub fn key(&self) -> u64 {
        self.key
    }
}

impl World for LazyWorld<'_> {
    fn is_live(&self, e: EdgeId) -> bool {
        let p = self.model.prob[e as usize];
        p >= 1.0 || field_rng(self.key, Field::Live, e).random::<f64>() < p
    }

    fn meeting_f(&self, e: EdgeId) -> u32 {
        meeting_length(self.model.m_f[e as usize], &mut field_rng(self.key, Field::MeetF, e))
    }

    fn meeting_m(&self, e: EdgeId) -> u32 {
        meeting_length(self.model.m_m[e as usize], &mut field_rng(self.key, Field::MeetM, e))
    }

    fn window(&self, v: NodeId) -> u32 {
        self.model.aw.sample(&mut field_rng(self.key, Field::Window, v))
    }

    fn tie_key(&self, e: EdgeId) -> u64 {
        field_rng(self.key, Field::Tie, e).random::<u64>()
    }
}

/// Samples world `index` of stream `seed`.
pub fn sample_world(g: &NetGraph, params: &ModelParams, seed: u64, index: u64) -> Result<OwnedWorld> {
    let model = WorldModel::new(g, params)?;
    Ok(OwnedWorld { key: world_key(seed, index), model })
}

/// A lazy world that owns its model, for one-off use.
#[derive(Clone, Debug)]
pub struct OwnedWorld {
    model: WorldModel,
    key: u64,
}

impl OwnedWorld {
    pub fn view(&self) -> LazyWorld<'_> {
        self.model.world_from_key(self.key)
    }
}

impl World for OwnedWorld {
    fn is_live(&self, e: EdgeId) -> bool {
        self.view().is_live(e)
    }
    fn meeting_f(&self, e: EdgeId) -> u32 {
        self.view().meeting_f(e)
    }
    fn meeting_m(&self, e: EdgeId) -> u32 {
        self.view().meeting_m(e)
    }
    fn window(&self, v: NodeId) -> u32 {
        self.view().window(v)
    }
    fn tie_key(&self, e: EdgeId) -> u64 {
        self.view().tie_key(e)
    }
}

/// Fully explicit world, for fixtures and exhaustive enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedWorld {
    pub live: Vec<bool>,
    pub h_f: Vec<u32>,
    pub h_m: Vec<u32>,
    pub tau: Vec<u32>,
    pub tie: Vec<u64>,
}

impl FixedWorld {
    /// All edges live, unit meeting lengths, zero windows, tie order by source id.
    pub fn unit(g: &NetGraph) -> Self {
        FixedWorld {
            live: vec![true; g.edge_count()],
            h_f: vec![1; g.edge_count()],
            h_m: vec![1; g.edge_count()],
            tau: vec![0; g.node_count()],
            tie: g.edges().iter().map(|e| e.source as u64).collect(),
        }
    }

    /// Materializes every field of `world`.
    pub fn capture<W: World + ?Sized>(g: &NetGraph, world: &W) -> Self {
        let m = g.edge_count() as EdgeId;
        FixedWorld {
            live: (0..m).map(|e| world.is_live(e)).collect(),
            h_f: (0..m).map(|e| world.meeting_f(e)).collect(),
            h_m: (0..m).map(|e| world.meeting_m(e)).collect(),
            tau: (0..g.node_count() as NodeId).map(|v| world.window(v)).collect(),
            tie: (0..m).map(|e| world.tie_key(e)).collect(),
        }
    }

    /// Puts the listed in-neighbours of `v` first, in the given order.
    pub fn set_order(&mut self, g: &NetGraph, v: NodeId, order: &[NodeId]) -> Result<()> {
        let base = order.len() as u64;
        for &e in g.in_edges(v) {
            let src = g.edge(e).source;
            self.tie[e as usize] = match order.iter().position(|&x| x == src) {
                Some(i) => i as u64,
                None => base + src as u64,
            };
        }
        for &x in order {
            if g.find_edge(x, v).is_none() {
                return Err(invalid(format!("order for {v} names {x}, which is not an in-neighbour")));
            }
        }
        Ok(())
    }
}

impl World for FixedWorld {
    fn is_live(&self, e: EdgeId) -> bool {
        self.live[e as usize]
    }
    fn meeting_f(&self, e: EdgeId) -> u32 {
        self.h_f[e as usize]
    }
    fn meeting_m(&self, e: EdgeId) -> u32 {
        self.h_m[e as usize]
    }
    fn window(&self, v: NodeId) -> u32 {
        self.tau[v as usize]
    }
    fn tie_key(&self, e: EdgeId) -> u64 {
        self.tie[e as usize]
    }
}

/// Membership test over node ids.
pub trait NodeSet {
    fn contains(&self, v: NodeId) -> bool;
}

impl NodeSet for [bool] {
    fn contains(&self, v: NodeId) -> bool {
        self[v as usize]
    }
}

impl NodeSet for Vec<bool> {
    fn contains(&self, v: NodeId) -> bool {
        self[v as usize]
    }
}

/// World with M's meeting delay removed on critical edges: live edges whose
/// source is an F seed or is reached by F when F spreads alone.
pub struct ModifiedWorld<'a, W: ?Sized, S: ?Sized = [bool]> {
    inner: &'a W,
    g: &'a NetGraph,
    f_nodes: &'a S,
}

impl<'a, W: World + ?Sized, S: NodeSet + ?Sized> ModifiedWorld<'a, W, S> {
    /// `f_nodes` holds S_F together with R_F of `inner`.
    pub fn new(g: &'a NetGraph, inner: &'a W, f_nodes: &'a S) -> Self {
        ModifiedWorld { inner, g, f_nodes }
    }

    pub fn is_critical(&self, e: EdgeId) -> bool {
        self.f_nodes.contains(self.g.edge(e).source) && self.inner.is_live(e)
    }

    pub fn critical_edges(&self) -> Vec<EdgeId> {
        (0..self.g.edge_count() as EdgeId).filter(|&e| self.is_critical(e)).collect()
    }
}

impl<W: World + ?Sized, S: NodeSet + ?Sized> World for ModifiedWorld<'_, W, S> {
    fn is_live(&self, e: EdgeId) -> bool {
        self.inner.is_live(e)
    }
    fn meeting_f(&self, e: EdgeId) -> u32 {
        self.inner.meeting_f(e)
    }
    fn meeting_m(&self, e: EdgeId) -> u32 {
        // dead edges never deliver, so their meeting length is irrelevant
        if self.f_nodes.contains(self.g.edge(e).source) {
            1
        } else {
            self.inner.meeting_m(e)
        }
    }
    fn window(&self, v: NodeId) -> u32 {
        self.inner.window(v)
    }
    fn tie_key(&self, e: EdgeId) -> u64 {
        self.inner.tie_key(e)
    }
}

/// Text dump of every field, for debugging small worlds.
pub fn dump_world<W: World + ?Sized>(g: &NetGraph, world: &W) -> String {
    let mut out = String::new();
    for (id, e) in g.edges().iter().enumerate() {
        let id = id as EdgeId;
        if world.is_live(id) {
            let _ = writeln!(
                out,
                "edge {} {} live hF={} hM={}",
                e.source,
                e.target,
                world.meeting_f(id),
                world.meeting_m(id)
            );
        } else {
            let _ = writeln!(out, "edge {} {} blocked", e.source, e.target);
        }
    }
    for v in 0..g.node_count() as NodeId {
        let order: Vec<String> = tie_order(g, world, v)
            .into_iter()
            .map(|e| g.edge(e).source.to_string())
            .collect();
        let _ = writeln!(out, "node {} tau={} pi=[{}]", v, world.window(v), order.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{read_edge_list, ProbMode};

    fn star_in(k: u32) -> NetGraph {
        let text: String = (1..=k).map(|i| format!("{i} 0\n")).collect();
        read_edge_list(text.as_bytes(), true, ProbMode::Fixed(0.5)).unwrap()
    }

    #[test]
    fn query_order_does_not_matter() {
        let g = star_in(4);
        let model = WorldModel::new(&g, &ModelParams::default()).unwrap();
        let a = model.world(9, 4);
        let b = model.world(9, 4);
        let live_first: Vec<bool> = (0..4).map(|e| a.is_live(e)).collect();
        let h_first: Vec<u32> = (0..4).rev().map(|e| b.meeting_m(e)).collect();
        let live_after: Vec<bool> = (0..4).map(|e| b.is_live(e)).collect();
        assert_eq!(live_first, live_after);
        let h_after: Vec<u32> = (0..4).rev().map(|e| a.meeting_m(e)).collect();
        assert_eq!(h_first, h_after);
        assert_eq!(FixedWorld::capture(&g, &a), FixedWorld::capture(&g, &b));
    }

    #[test]
    fn unit_meeting_probability() {
        let g = star_in(5);
        let p = ModelParams { meeting_prob_m: 1.0, ..Default::default() };
        let model = WorldModel::new(&g, &p).unwrap();
        for i in 0..50 {
            let w = model.world(1, i);
            assert!((0..5).all(|e| w.meeting_m(e) == 1 && w.meeting_f(e) == 1));
        }
    }

    #[test]
    fn modified_world_zeroes_critical_delay() {
        let g = read_edge_list("0 1\n1 2\n3 2\n".as_bytes(), true, ProbMode::Fixed(1.0)).unwrap();
        let mut fw = FixedWorld::unit(&g);
        fw.h_m = vec![4, 5, 6];
        let f_nodes = [true, true, false, false];
        let x = ModifiedWorld::new(&g, &fw, &f_nodes[..]);
        assert_eq!(x.meeting_m(g.find_edge(0, 1).unwrap()), 1);
        assert_eq!(x.meeting_m(g.find_edge(1, 2).unwrap()), 1);
        assert_eq!(x.meeting_m(g.find_edge(3, 2).unwrap()), 6);
        assert_eq!(x.critical_edges().len(), 2);
    }

    #[test]
    fn fixed_order() {
        let g = star_in(3);
        let mut fw = FixedWorld::unit(&g);
        fw.set_order(&g, 0, &[3, 1]).unwrap();
        let order: Vec<NodeId> = tie_order(&g, &fw, 0).iter().map(|&e| g.edge(e).source).collect();
        assert_eq!(order, vec![3, 1, 2]);
        assert!(fw.set_order(&g, 0, &[0]).is_err());
    }

    #[test]
    fn dump_mentions_every_edge() {
        let g = star_in(2);
        let text = dump_world(&g, &FixedWorld::unit(&g));
        assert_eq!(text.lines().filter(|l| l.starts_with("edge")).count(), 2);
        assert!(text.contains("node 0 tau=0 pi=[1,2]"));
    }
}
