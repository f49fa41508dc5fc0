//! Small hand-specified instances: an edge list plus a parameter table.
//!
//! Table lines (ids refer to the edge list; `#` starts a comment):
//!
//! ```text
//! seeds_f 0            fake seeds
//! seeds_m 12           mitigation seeds
//! label 0 vF           display name
//! hm 1 2 5             h^M of edge 1->2
//! hf 1 2 1             h^F of edge 1->2
//! tau 3 4              window of node 3
//! perm 4 11 10 0       tie order at node 4
//! dead 2 4             edge 2->4 blocked
//! hm_dist 1 2 1:0.5 3:0.5
//! tau_dist 3 0:0.5 2:0.5
//! ```
//!
//! The fixed world uses the first value of each distribution; the
//! enumerable instance uses the full supports.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{read_edge_list, EdgeId, NetGraph, NodeId, ProbMode};
use crate::oracle::{EnumerableInstance, Support};
use crate::world::FixedWorld;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub graph: NetGraph,
    pub world: FixedWorld,
    pub seeds_f: Vec<NodeId>,
    pub seeds_m: Vec<NodeId>,
    pub labels: HashMap<NodeId, String>,
    pub instance: EnumerableInstance,
}

const BUILTIN: &[(&str, &str, &str)] = &[
    ("diamond", include_str!("../fixtures/diamond.edges"), include_str!("../fixtures/diamond.table")),
    ("timeline", include_str!("../fixtures/timeline.edges"), include_str!("../fixtures/timeline.table")),
    ("phases", include_str!("../fixtures/phases.edges"), include_str!("../fixtures/phases.table")),
];

impl Fixture {
    /// Names of the fixtures compiled into the crate.
    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|b| b.0).collect()
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, edges, table) = BUILTIN
            .iter()
            .find(|b| b.0 == name)
            .ok_or_else(|| crate::error::invalid(format!("no fixture named '{name}'")))?;
        Fixture::parse(edges, table)
    }

    /// Loads `<dir>/<name>.edges` and `<dir>/<name>.table`.
    pub fn load(dir: &Path, name: &str) -> Result<Self> {
        let edges = std::fs::read_to_string(dir.join(format!("{name}.edges")))?;
        let table = std::fs::read_to_string(dir.join(format!("{name}.table")))?;
        Fixture::parse(&edges, &table)
    }

    pub fn parse(edges: &str, table: &str) -> Result<Self> {
        let graph = read_edge_list(edges.as_bytes(), true, ProbMode::Explicit)?;
        let mut world = FixedWorld::unit(&graph);
        let mut inst = EnumerableInstance::new(graph.clone());
        let mut fx = Fixture {
            world: FixedWorld::unit(&graph),
            seeds_f: Vec::new(),
            seeds_m: Vec::new(),
            labels: HashMap::new(),
            instance: EnumerableInstance::new(graph.clone()),
            graph,
        };
        let mut orders: Vec<(NodeId, Vec<NodeId>)> = Vec::new();
        for (idx, raw) in table.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line, msg };
            let mut tok = body.split_whitespace();
            let key = tok.next().unwrap_or_default();
            let rest: Vec<&str> = tok.collect();
            let node = |s: &str| -> Result<NodeId> {
                let v: NodeId = s.parse().map_err(|_| err(format!("bad node id {s:?}")))?;
                if v as usize >= fx.graph.node_count() {
                    return Err(err(format!("node {v} not in the edge list")));
                }
                Ok(v)
            };
            let value = |s: &str| -> Result<u32> { s.parse().map_err(|_| err(format!("bad value {s:?}"))) };
            let edge = |u: &str, v: &str| -> Result<EdgeId> {
                let (u, v) = (node(u)?, node(v)?);
                fx.graph.find_edge(u, v).ok_or_else(|| err(format!("no edge {u}->{v}")))
            };
            let dist = |items: &[&str]| -> Result<Support> {
                items
                    .iter()
                    .map(|it| {
                        let (x, p) = it.split_once(':').ok_or_else(|| err(format!("expected value:prob, got {it:?}")))?;
                        Ok((value(x)?, p.parse::<f64>().map_err(|_| err(format!("bad probability {p:?}")))?))
                    })
                    .collect()
            };
            let arity = |n: usize| -> Result<()> {
                if rest.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("'{key}' takes {n} fields")))
                }
            };
            match key {
                "seeds_f" => fx.seeds_f = rest.iter().map(|s| node(s)).collect::<Result<_>>()?,
                "seeds_m" => fx.seeds_m = rest.iter().map(|s| node(s)).collect::<Result<_>>()?,
                "label" => {
                    arity(2)?;
                    fx.labels.insert(node(rest[0])?, rest[1].to_string());
                }
                "hm" | "hf" => {
                    arity(3)?;
                    let e = edge(rest[0], rest[1])? as usize;
                    let x = value(rest[2])?;
                    if key == "hm" {
                        world.h_m[e] = x;
                        inst.h_m[e] = vec![(x, 1.0)];
                    } else {
                        world.h_f[e] = x;
                        inst.h_f[e] = vec![(x, 1.0)];
                    }
                }
                "tau" => {
                    arity(2)?;
                    let v = node(rest[0])? as usize;
                    world.tau[v] = value(rest[1])?;
                    inst.tau[v] = vec![(world.tau[v], 1.0)];
                }
                "perm" => {
                    let v = node(rest.first().ok_or_else(|| err("perm needs a node".into()))?)?;
                    orders.push((v, rest[1..].iter().map(|s| node(s)).collect::<Result<_>>()?));
                }
                "dead" => {
                    arity(2)?;
                    let e = edge(rest[0], rest[1])? as usize;
                    world.live[e] = false;
                    inst.forced[e] = Some(false);
                }
                "hm_dist" => {
                    let e = edge(rest.first().copied().unwrap_or(""), rest.get(1).copied().unwrap_or(""))? as usize;
                    inst.h_m[e] = dist(&rest[2..])?;
                    world.h_m[e] = inst.h_m[e][0].0;
                }
                "tau_dist" => {
                    let v = node(rest.first().copied().unwrap_or(""))? as usize;
                    inst.tau[v] = dist(&rest[1..])?;
                    world.tau[v] = inst.tau[v][0].0;
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        for (v, order) in &orders {
            world.set_order(&fx.graph, *v, order)?;
        }
        // fixed tie orders everywhere, matching the world
        for v in 0..fx.graph.node_count() {
            let mut ins: Vec<EdgeId> = fx.graph.in_edges(v as NodeId).to_vec();
            ins.sort_by_key(|&e| (world.tie[e as usize], e));
            inst.order[v] = Some(ins.iter().map(|&e| fx.graph.edge(e).source).collect());
        }
        for e in 0..fx.graph.edge_count() {
            if inst.forced[e].is_none() && fx.graph.edge(e as EdgeId).prob >= 1.0 {
                inst.forced[e] = Some(true);
            }
        }
        inst.validate()?;
        fx.world = world;
        fx.instance = inst;
        Ok(fx)
    }

    /// Node id with the given display name.
    pub fn node(&self, label: &str) -> NodeId {
        *self
            .labels
            .iter()
            .find(|(_, l)| l.as_str() == label)
            .unwrap_or_else(|| panic!("fixture has no node labelled {label}"))
            .0
    }

    pub fn label(&self, v: NodeId) -> String {
        self.labels.get(&v).cloned().unwrap_or_else(|| v.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for name in Fixture::builtin_names() {
            let fx = Fixture::builtin(name).unwrap();
            assert!(!fx.seeds_f.is_empty(), "{name}");
        }
    }

    #[test]
    fn table_errors_carry_lines() {
        let err = Fixture::parse("0 1 1\n", "seeds_f 0\nhm 1 0 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn distributions_feed_the_instance() {
        let fx = Fixture::parse("0 1 0.5\n", "seeds_f 0\nhm_dist 0 1 1:0.5 2:0.5\n").unwrap();
        assert_eq!(fx.world.h_m[0], 1);
        assert_eq!(fx.instance.world_count().unwrap(), 3.0);
    }
}
