//! Bundled scale-free test graphs (preferential attachment). These are
//! synthetic stand-ins, not reproductions of any real network.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tcic::graph::{NetGraph, NodeId};

use crate::error::{config_error, Result};

/// Undirected preferential-attachment graph: a clique on `degree + 1` nodes,
/// then each new node links to `degree` distinct existing nodes chosen with
/// probability proportional to their degree. Edge probabilities are 1 until
/// reassigned.
pub fn scale_free(nodes: usize, degree: usize, seed: u64) -> Result<NetGraph> {
    if degree == 0 || nodes <= degree + 1 {
        return Err(config_error(format!("scale-free graph needs nodes > degree + 1 (got {nodes}, {degree})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
    // every edge endpoint once, so a uniform pick is degree-proportional
    let mut ends: Vec<NodeId> = Vec::new();
    let core = degree + 1;
    for u in 0..core as NodeId {
        for v in u + 1..core as NodeId {
            edges.push((u, v, 1.0));
            ends.extend([u, v]);
        }
    }
    let mut picked: Vec<NodeId> = Vec::with_capacity(degree);
    for v in core as NodeId..nodes as NodeId {
        picked.clear();
        while picked.len() < degree {
            let u = ends[rng.random_range(0..ends.len())];
            if !picked.contains(&u) {
                picked.push(u);
            }
        }
        for &u in &picked {
            edges.push((u, v, 1.0));
            ends.extend([u, v]);
        }
    }
    Ok(NetGraph::from_edges(nodes, edges, false)?)
}
