//! Directed weighted social graph with CSR adjacency in both directions.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type NodeId = u32;
pub type EdgeId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub source: NodeId,
    pub target: NodeId,
    pub prob: f64,
}

/// How edge propagation probabilities are assigned at load time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "p")]
pub enum ProbMode {
    /// Third column of the edge list.
    Explicit,
    /// p(u,v) = 1 / indeg(v), computed after undirected expansion.
    InverseIndegree,
    Fixed(f64),
}

/// Immutable graph. Edge ids index `edges`, which is sorted by (source, target),
/// so the out-edges of `u` are a contiguous id range.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGraph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    in_start: Vec<usize>,
    in_edges: Vec<EdgeId>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub avg_degree: f64,
    pub directed: bool,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes={} edges={} avg_degree={:.2} type={}",
            self.nodes,
            self.edges,
            self.avg_degree,
            if self.directed { "dir" } else { "undir" }
        )
    }
}

impl NetGraph {
    /// Builds a graph from raw `(source, target, prob)` triples.
    ///
    /// Undirected input is expanded into antiparallel pairs first. Self-loops
    /// are dropped and parallel duplicates merged keeping the larger
    /// probability, both with a warning.
    pub fn from_edges(n: usize, raw: Vec<(NodeId, NodeId, f64)>, directed: bool) -> Result<Self> {
        let mut list = Vec::with_capacity(if directed { raw.len() } else { 2 * raw.len() });
        let mut loops = 0usize;
        for (u, v, p) in raw {
            if u as usize >= n || v as usize >= n {
                return Err(invalid(format!("edge ({u},{v}) references a node outside 0..{n}")));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("edge ({u},{v}) has probability {p} outside (0,1]")));
            }
            if u == v {
                loops += 1;
                continue;
            }
            list.push(Edge { source: u, target: v, prob: p });
            if !directed {
                list.push(Edge { source: v, target: u, prob: p });
            }
        }
        if loops > 0 {
            log::warn!("dropped {loops} self-loop(s)");
        }
        list.sort_by_key(|a| (a.source, a.target));
        let before = list.len();
        list.dedup_by(|later, kept| {
            if later.source == kept.source && later.target == kept.target {
                kept.prob = kept.prob.max(later.prob);
                true
            } else {
                false
            }
        });
        let merged = before - list.len();
        if merged > 0 {
            // undirected inputs listing both directions are not worth a warning
            if directed {
                log::warn!("merged {merged} duplicate edge(s), keeping the max probability");
            } else {
                log::debug!("merged {merged} duplicate arc(s) after undirected expansion");
            }
        }
        Ok(Self::from_sorted(n, list, directed))
    }

    fn from_sorted(n: usize, edges: Vec<Edge>, directed: bool) -> Self {
        let mut out_start = vec![0usize; n + 1];
        let mut in_start = vec![0usize; n + 1];
        for e in &edges {
            out_start[e.source as usize + 1] += 1;
            in_start[e.target as usize + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
            in_start[i + 1] += in_start[i];
        }
        let mut fill = in_start.clone();
        let mut in_edges = vec![0 as EdgeId; edges.len()];
        // edges are sorted by source, so each in-list ends up sorted by source too
        for (id, e) in edges.iter().enumerate() {
            let slot = &mut fill[e.target as usize];
            in_edges[*slot] = id as EdgeId;
            *slot += 1;
        }
        NetGraph { n, directed, edges, out_start, in_start, in_edges }
    }

    /// Reassigns every probability according to `mode`. `Explicit` is a no-op.
    pub fn assign_probabilities(&mut self, mode: ProbMode) -> Result<()> {
        match mode {
            ProbMode::Explicit => {}
            ProbMode::Fixed(p) => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(invalid(format!("fixed probability {p} outside (0,1]")));
                }
                self.edges.iter_mut().for_each(|e| e.prob = p);
            }
            ProbMode::InverseIndegree => {
                for v in 0..self.n {
                    let ids = &self.in_edges[self.in_start[v]..self.in_start[v + 1]];
                    let p = 1.0 / ids.len() as f64;
                    for &id in ids {
                        self.edges[id as usize].prob = p;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn out_edges(&self, u: NodeId) -> Range<EdgeId> {
        let u = u as usize;
        self.out_start[u] as EdgeId..self.out_start[u + 1] as EdgeId
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        let v = v as usize;
        &self.in_edges[self.in_start[v]..self.in_start[v + 1]]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_start[u as usize + 1] - self.out_start[u as usize]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_start[v as usize + 1] - self.in_start[v as usize]
    }

    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let range = self.out_edges(u);
        let slice = &self.edges[range.start as usize..range.end as usize];
        slice
            .binary_search_by(|e| e.target.cmp(&v))
            .ok()
            .map(|i| range.start + i as EdgeId)
    }

    pub fn stats(&self) -> GraphStats {
        let edges = if self.directed { self.edges.len() } else { self.edges.len() / 2 };
        GraphStats {
            nodes: self.n,
            edges,
            avg_degree: if self.n == 0 { 0.0 } else { edges as f64 / self.n as f64 },
            directed: self.directed,
        }
    }

    /// Writes every stored arc as `u v p`; reading it back as a directed
    /// explicit-probability list reproduces the graph.
    pub fn save_edge_list(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for e in &self.edges {
            writeln!(w, "{} {} {}", e.source, e.target, e.prob)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct RawLine {
    source: u64,
    target: u64,
    prob: Option<f64>,
}

fn parse_lines<R: BufRead>(reader: R, mode: ProbMode) -> Result<Vec<RawLine>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with('%') {
            continue;
        }
        let mut fields = body.split_whitespace();
        let mut id = |name: &str| -> Result<u64> {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("missing {name} id"),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad {name} id {tok:?}"),
            })
        };
        let source = id("source")?;
        let target = id("target")?;
        let prob = match fields.next() {
            Some(tok) => Some(tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad probability {tok:?}"),
            })?),
            None => None,
        };
        if let Some(extra) = fields.next() {
            return Err(Error::Parse { line: lineno, msg: format!("unexpected field {extra:?}") });
        }
        if mode == ProbMode::Explicit {
            match prob {
                None => {
                    return Err(invalid(format!(
                        "line {lineno}: explicit probability mode needs a third column"
                    )))
                }
                Some(p) if !(p > 0.0 && p <= 1.0) => {
                    return Err(invalid(format!("line {lineno}: probability {p} outside (0,1]")))
                }
                _ => {}
            }
        }
        out.push(RawLine { source, target, prob });
    }
    Ok(out)
}

fn build(n: usize, lines: Vec<(NodeId, NodeId, Option<f64>)>, directed: bool, mode: ProbMode) -> Result<NetGraph> {
    let raw = lines.into_iter().map(|(u, v, p)| (u, v, p.unwrap_or(1.0))).collect();
    let raw: Vec<_> = match mode {
        ProbMode::Explicit => raw,
        _ => raw.into_iter().map(|(u, v, _)| (u, v, 1.0)).collect(),
    };
    let mut g = NetGraph::from_edges(n, raw, directed)?;
    g.assign_probabilities(mode)?;
    Ok(g)
}

/// Parses an edge list whose ids are already dense; `n = max id + 1`.
pub fn read_edge_list<R: BufRead>(reader: R, directed: bool, mode: ProbMode) -> Result<NetGraph> {
    let lines = parse_lines(reader, mode)?;
    let mut n = 0usize;
    let mut converted = Vec::with_capacity(lines.len());
    for l in lines {
        let max = l.source.max(l.target);
        if max >= NodeId::MAX as u64 {
            return Err(invalid(format!("node id {max} too large; use the remapping loader")));
        }
        n = n.max(max as usize + 1);
        converted.push((l.source as NodeId, l.target as NodeId, l.prob));
    }
    build(n, converted, directed, mode)
}

pub fn load_edge_list(path: &Path, directed: bool, mode: ProbMode) -> Result<NetGraph> {
    read_edge_list(BufReader::new(File::open(path)?), directed, mode)
}

/// Dense-id mapping for inputs with sparse external ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdMap {
    external: Vec<u64>,
}

impl IdMap {
    pub fn external(&self, v: NodeId) -> u64 {
        self.external[v as usize]
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn internal_of(&self) -> HashMap<u64, NodeId> {
        self.external.iter().enumerate().map(|(i, &x)| (x, i as NodeId)).collect()
    }

    /// Sidecar format: one `external_id internal_id` pair per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (i, x) in self.external.iter().enumerate() {
            writeln!(w, "{x} {i}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut pairs = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            let (Some(a), Some(b)) = (it.next(), it.next()) else {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::Parse { line: idx + 1, msg: "expected two ids".into() });
            };
            let parse = |t: &str| {
                t.parse::<u64>()
                    .map_err(|_| Error::Parse { line: idx + 1, msg: format!("bad id {t:?}") })
            };
            pairs.push((parse(a)?, parse(b)? as usize));
        }
        let mut external = vec![u64::MAX; pairs.len()];
        for (x, i) in pairs {
            if i >= external.len() || external[i] != u64::MAX {
                return Err(invalid(format!("id map has a bad or repeated internal id {i}")));
            }
            external[i] = x;
        }
        Ok(IdMap { external })
    }
}

/// Loads an edge list with arbitrary (sparse) non-negative ids, assigning
/// dense ids in order of first appearance.
pub fn load_edge_list_remapped(path: &Path, directed: bool, mode: ProbMode) -> Result<(NetGraph, IdMap)> {
    let lines = parse_lines(BufReader::new(File::open(path)?), mode)?;
    let mut map: HashMap<u64, NodeId> = HashMap::new();
    let mut ids = IdMap::default();
    let mut intern = |x: u64| {
        *map.entry(x).or_insert_with(|| {
            ids.external.push(x);
            (ids.external.len() - 1) as NodeId
        })
    };
    let converted: Vec<_> = lines
        .into_iter()
        .map(|l| (intern(l.source), intern(l.target), l.prob))
        .collect();
    let g = build(ids.len(), converted, directed, mode)?;
    Ok((g, ids))
}
