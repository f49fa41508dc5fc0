//! Self-checks against the exact oracle: built-in fixtures and reward
//! equivalence on random enumerable instances.

use tcic::fixture::Fixture;
use tcic::graph::NodeId;
use tcic::oracle::{check_submodularity, enumerate_exact, enumerate_many, exact_rdr_expectations_both, random_instance, RandomInstanceSpec};
use tcic::rdr::{rdr_for_root, Variant};
use tcic::sim::Objective;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn diamond() -> Result<Vec<Check>> {
    let fx = Fixture::builtin("diamond")?;
    let (v4, v5) = (fx.node("v4"), fx.node("v5"));
    let mut got = Vec::new();
    for s in [vec![], vec![v5], vec![v4], vec![v4, v5]] {
        got.push(enumerate_exact(&fx.instance, &fx.seeds_f, Objective::Mu, &s)?);
    }
    let violations = check_submodularity(&fx.instance, &fx.seeds_f, Objective::Mu, 1)?;
    Ok(vec![
        check("diamond mitigation values", got == [0.0, 2.0, 2.0, 6.0], format!("{got:?}")),
        check("diamond submodularity violation", !violations.is_empty(), format!("{} violations", violations.len())),
    ])
}

fn timeline() -> Result<Check> {
    let fx = Fixture::builtin("timeline")?;
    let got = rdr_for_root(&fx.graph, &fx.world, &fx.seeds_f, fx.node("v3"), Variant::Lower);
    let mut want = vec![(fx.node("v10"), 1), (fx.node("v14"), 1), (fx.node("v2"), 1)];
    want.sort_unstable();
    let shown: Vec<String> = got.iter().map(|&(u, w)| format!("{}:{w}", fx.label(u))).collect();
    Ok(check("timeline RDR set at v3", got == want, shown.join(",")))
}

/// Largest gap between RDR expectations and exact objectives across random
/// instances, every seed set of size at most 2, both variants and modes.
fn equivalence(instances: u64, seed: u64) -> Result<Check> {
    let spec = RandomInstanceSpec { nodes: 6, edges: 8, uncertain_edges: 3, meeting_cap: 2, max_window: 2 };
    let mut worst = 0.0f64;
    for i in 0..instances {
        let inst = random_instance(spec, seed.wrapping_add(i))?;
        let n = inst.graph.node_count() as NodeId;
        let mut sets = Vec::new();
        for a in 1..n {
            sets.push(vec![a]);
            for b in a + 1..n {
                sets.push(vec![a, b]);
            }
        }
        for (variant, objective) in [(Variant::Lower, Objective::MuLower), (Variant::Upper, Objective::MuUpper)] {
            let exact = enumerate_many(&inst, &[0], objective, &sets)?;
            for rdr in exact_rdr_expectations_both(&inst, &[0], variant, &sets)? {
                for (e, r) in exact.iter().zip(&rdr) {
                    worst = worst.max((e - r.sigma).abs());
                }
            }
        }
    }
    Ok(check("reward equivalence", worst <= 1e-9, format!("{instances} instances, max gap {worst:.2e}")))
}

pub fn run_checks(instances: u64, seed: u64) -> Result<Vec<Check>> {
    let mut out = diamond()?;
    out.push(timeline()?);
    out.push(equivalence(instances, seed)?);
    Ok(out)
}
