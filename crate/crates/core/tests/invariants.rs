//! Structural and statistical properties of the model, the samplers and the
//! selection routines.

use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::SeedableRng;

use tcic::baselines::{select_baseline, BaselineMethod, BaselineSpec, RrSampler};
use tcic::graph::{read_edge_list, NetGraph, NodeId, ProbMode};
use tcic::oracle::{check_submodularity, enumerate_many, random_instance, RandomInstanceSpec};
use tcic::params::{assign_meeting_probs, sample_meeting_length, AwMode, MeetingMode, ModelParams};
use tcic::rdr::{phase2_backward, phase3_tiebreak, rdr_for_root, RdrSampler, RdrWorkspace, SamplingMode, Variant};
use tcic::select::{compute_n_max, greedy_weighted_cover, sigma_lower, sigma_upper, Collection, SampleSource};
use tcic::sim::{reward_from_times, simulate, static_reach, ForwardReach, Objective};
use tcic::world::{sample_world, tie_order, FixedWorld, World, WorldModel};

fn graph_from(n: usize, raw: &[(u8, u8, u8)]) -> NetGraph {
    let edges = raw
        .iter()
        .map(|&(u, v, p)| ((u as usize % n) as NodeId, (v as usize % n) as NodeId, [0.3, 0.6, 1.0][p as usize % 3]))
        .collect();
    NetGraph::from_edges(n, edges, true).unwrap()
}

fn temporal_params() -> ModelParams {
    ModelParams { meeting_prob_m: 0.5, aw_mode: AwMode::Uniform, aw_uniform_max: 2, ..ModelParams::default() }
}

fn world_for(g: &NetGraph, seed: u64) -> FixedWorld {
    let w = sample_world(g, &temporal_params(), seed, 0).unwrap();
    FixedWorld::capture(g, &w)
}

fn arb_graph() -> impl Strategy<Value = NetGraph> {
    (3usize..8).prop_flat_map(|n| prop::collection::vec((0u8..8, 0u8..8, 0u8..3), 1..14).prop_map(move |e| graph_from(n, &e)))
}

fn arb_collection() -> impl Strategy<Value = (usize, Vec<Vec<(NodeId, u8)>>)> {
    (3usize..8).prop_flat_map(|n| {
        let set = prop::collection::btree_map(0..n as NodeId, 1u8..3, 0..n).prop_map(|m| m.into_iter().collect::<Vec<_>>());
        (Just(n), prop::collection::vec(set, 1..30))
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n as NodeId).filter(|&v| mask >> v & 1 == 1).collect());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_lists_agree(g in arb_graph()) {
        let mut seen = vec![0u32; g.edge_count()];
        for u in 0..g.node_count() as NodeId {
            for e in g.out_edges(u) {
                prop_assert_eq!(g.edge(e).source, u);
                seen[e as usize] += 1;
            }
            for &e in g.in_edges(u) {
                prop_assert_eq!(g.edge(e).target, u);
                seen[e as usize] += 10;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 11));
        prop_assert!(g.edges().iter().all(|e| e.prob > 0.0 && e.prob <= 1.0));
    }

    #[test]
    fn inverse_indegree_sums_to_one(mut g in arb_graph()) {
        g.assign_probabilities(ProbMode::InverseIndegree).unwrap();
        for v in 0..g.node_count() as NodeId {
            if g.in_degree(v) > 0 {
                let sum: f64 = g.in_edges(v).iter().map(|&e| g.edge(e).prob).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ego_centric_depends_on_out_degree_only(g in arb_graph(), c in 0.5f64..4.0) {
        let params = ModelParams { meeting_mode: MeetingMode::EgoCentric, ego_c: c, ..ModelParams::default() };
        let m = assign_meeting_probs(&g, &params).unwrap();
        for u in 0..g.node_count() as NodeId {
            let vals: Vec<f64> = g.out_edges(u).map(|e| m[e as usize]).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] == w[1]));
        }
        for e in g.edges() {
            for f in g.edges() {
                let (du, dv) = (g.out_degree(e.source), g.out_degree(f.source));
                let (me, mf) = (m[g.find_edge(e.source, e.target).unwrap() as usize], m[g.find_edge(f.source, f.target).unwrap() as usize]);
                if du < dv {
                    prop_assert!(me > mf);
                }
            }
        }
    }

    #[test]
    fn world_replay_is_bit_identical(g in arb_graph(), seed in any::<u64>(), index in 0u64..100) {
        let params = temporal_params();
        let a = FixedWorld::capture(&g, &sample_world(&g, &params, seed, index).unwrap());
        let model = WorldModel::new(&g, &params).unwrap();
        let lazy = model.world(seed, index);
        // read the fields in reverse order
        for v in (0..g.node_count() as NodeId).rev() {
            prop_assert_eq!(lazy.window(v), a.tau[v as usize]);
        }
        for e in (0..g.edge_count() as u32).rev() {
            prop_assert_eq!(lazy.tie_key(e), a.tie[e as usize]);
            prop_assert_eq!(lazy.meeting_m(e), a.h_m[e as usize]);
            prop_assert_eq!(lazy.is_live(e), a.live[e as usize]);
            prop_assert_eq!(lazy.meeting_f(e), 1);
        }
    }

    #[test]
    fn adding_mitigation_seeds_never_delays_m(g in arb_graph(), seed in any::<u64>(), pick in prop::collection::vec(1u32..8, 1..4)) {
        let world = world_for(&g, seed);
        let n = g.node_count() as NodeId;
        let mut s_m: Vec<NodeId> = Vec::new();
        let mut prev = simulate(&g, &world, &[0], &s_m).unwrap();
        for p in pick {
            let u = p % n;
            if u == 0 || s_m.contains(&u) {
                continue;
            }
            s_m.push(u);
            let next = simulate(&g, &world, &[0], &s_m).unwrap();
            for v in 0..n as usize {
                prop_assert!(next.t_m[v] <= prev.t_m[v], "node {}: {} -> {}", v, prev.t_m[v], next.t_m[v]);
            }
            prev = next;
        }
    }

    #[test]
    fn trace_shape(g in arb_graph(), seed in any::<u64>(), m in 1u32..8) {
        let world = world_for(&g, seed);
        let m = m % g.node_count() as NodeId;
        let s_m: Vec<NodeId> = if m == 0 { vec![] } else { vec![m] };
        let t = simulate(&g, &world, &[0], &s_m).unwrap();
        for v in 0..g.node_count() {
            let seed_node = v == 0 || s_m.contains(&(v as NodeId));
            if t.adoption[v] != tcic::sim::Adoption::None {
                if seed_node {
                    prop_assert_eq!(t.close[v], 0);
                } else {
                    prop_assert!(t.close[v] >= 1);
                    prop_assert_eq!(t.close[v], t.open[v] + world.window(v as NodeId));
                }
            }
        }
    }

    /// Singleton RDR entries are exactly the per-candidate rewards at the root,
    /// with unique nodes and weights in {1, 2}.
    #[test]
    fn rdr_entries_are_singleton_rewards(g in arb_graph(), seed in any::<u64>(), root in 1u32..8) {
        let world = world_for(&g, seed);
        let root = root % g.node_count() as NodeId;
        prop_assume!(root != 0);
        let reach = ForwardReach::compute(&g, &world, &[0]);
        let entries = rdr_for_root(&g, &world, &[0], root, Variant::Lower);
        if !reach.in_reach[root as usize] {
            prop_assert!(entries.is_empty());
            return Ok(());
        }
        let mut nodes: Vec<NodeId> = entries.iter().map(|e| e.0).collect();
        nodes.sort_unstable();
        nodes.dedup();
        prop_assert_eq!(nodes.len(), entries.len());
        for u in 1..g.node_count() as NodeId {
            if u == root {
                continue;
            }
            let t = simulate(&g, &world, &[0], &[u]).unwrap();
            let r = reward_from_times(t.t_f[root as usize], t.t_m[root as usize], world.window(root));
            let got = entries.iter().find(|e| e.0 == u).map_or(0, |e| e.1);
            prop_assert_eq!(got, r, "candidate {}", u);
        }
        prop_assert!(entries.iter().all(|e| e.1 == 1 || e.1 == 2));
        let upper = rdr_for_root(&g, &world, &[0], root, Variant::Upper);
        prop_assert!(upper.contains(&(root, 2)));
    }

    #[test]
    fn phase_two_and_three_partition(g in arb_graph(), seed in any::<u64>(), root in 1u32..8) {
        let world = world_for(&g, seed);
        let root = root % g.node_count() as NodeId;
        prop_assume!(root != 0);
        let back = phase2_backward(&g, &world, &[0], root);
        for (u, _) in &back.direct {
            prop_assert!(!back.deferred.contains(u));
        }
        for b in &back.table {
            prop_assert!(b.dd < u32::MAX);
        }
        // Phase III agrees with the forward simulation on every region node
        for &u in &back.deferred {
            let tb = phase3_tiebreak(&g, &world, &[0], u, root).unwrap();
            let t = simulate(&g, &world, &[0], &[u]).unwrap();
            prop_assert_eq!(tb.root_t_f, t.t_f[root as usize]);
            prop_assert_eq!(tb.root_t_m, t.t_m[root as usize]);
            for &(x, a) in &tb.adoption {
                prop_assert_eq!(a, t.adoption[x as usize], "node {}", x);
            }
        }
    }

    #[test]
    fn rs_sets_outside_reach_are_empty(g in arb_graph(), seed in any::<u64>()) {
        let params = temporal_params();
        let sampler = RdrSampler::new(&g, &params, &[0], Variant::Lower, SamplingMode::Rs, seed).unwrap();
        let mut ws = RdrWorkspace::new(g.node_count());
        for i in 0..20 {
            let set = sampler.sample(&mut ws, i).unwrap();
            match set.root {
                None => prop_assert!(set.entries.is_empty()),
                Some(r) => prop_assert!(static_reach(&g, &[0]).contains(&r)),
            }
            prop_assert!(set.entries.iter().all(|e| e.1 == 1 || e.1 == 2));
        }
    }

    #[test]
    fn greedy_within_one_minus_inv_e((n, sets) in arb_collection(), k in 1usize..4) {
        let coll = Collection::from_sets(sets.iter().map(|s| s.as_slice()));
        let (chosen, covered) = greedy_weighted_cover(&coll, n, k, &[]);
        prop_assert!(chosen.len() <= k);
        prop_assert_eq!(covered, coll.coverage(&chosen));
        let best = subsets(n, k.min(n)).iter().map(|s| coll.coverage(s)).max().unwrap();
        prop_assert!(covered as f64 >= (1.0 - (-1.0f64).exp()) * best as f64 - 1e-9);
    }

    #[test]
    fn greedy_choice_ignores_weight_scale((n, sets) in arb_collection(), k in 1usize..4) {
        let coll = Collection::from_sets(sets.iter().map(|s| s.as_slice()));
        let scaled: Vec<Vec<(NodeId, u8)>> = sets.iter().map(|s| s.iter().map(|&(u, w)| (u, w * 3)).collect()).collect();
        let coll3 = Collection::from_sets(scaled.iter().map(|s| s.as_slice()));
        let (a, wa) = greedy_weighted_cover(&coll, n, k, &[]);
        let (b, wb) = greedy_weighted_cover(&coll3, n, k, &[]);
        prop_assert_eq!(a, b);
        prop_assert_eq!(wa * 3, wb);
    }

    #[test]
    fn bound_formulas_are_pure_and_ordered(lambda in 0f64..1e4, theta in 1f64..1e6, delta in 1e-6f64..0.5, ep in 0f64..0.2, scale in 1f64..1e5) {
        let l = sigma_lower(lambda, theta, delta, ep, scale);
        let u = sigma_upper(lambda, theta, delta, ep, scale);
        prop_assert_eq!(l.to_bits(), sigma_lower(lambda, theta, delta, ep, scale).to_bits());
        prop_assert_eq!(u.to_bits(), sigma_upper(lambda, theta, delta, ep, scale).to_bits());
        prop_assert!(l >= 0.0 && l <= u);
        let a = compute_n_max(scale, 50, 3, 0.1, ep / 4.0, delta, 2.0).unwrap();
        prop_assert_eq!(a, compute_n_max(scale, 50, 3, 0.1, ep / 4.0, delta, 2.0).unwrap());
    }

    #[test]
    fn baselines_avoid_fake_seeds(g in arb_graph(), k in 1usize..4, seed in any::<u64>()) {
        let s_f = [0];
        for method in BaselineMethod::all() {
            let mut spec = BaselineSpec::new(method, k, seed);
            spec.budget = 200;
            spec.eps = 0.3;
            let chosen = select_baseline(&g, &ModelParams::cic(), &s_f, &spec).unwrap();
            prop_assert!(chosen.len() <= k, "{:?}", method);
            prop_assert!(!chosen.contains(&0), "{:?}", method);
            let mut d = chosen.clone();
            d.sort_unstable();
            d.dedup();
            prop_assert_eq!(d.len(), chosen.len());
        }
    }
}

#[test]
fn rr_greedy_within_one_minus_inv_e() {
    let g = read_edge_list("0 1 0.5\n1 2 0.5\n2 3 0.5\n3 0 0.5\n1 4 0.7\n4 5 0.2\n".as_bytes(), true, ProbMode::Explicit).unwrap();
    let sampler = RrSampler::new(&g, &ModelParams::cic(), 5).unwrap();
    let sets = sampler.generate(0..400).unwrap();
    let coll = Collection::from_sets(sets.iter().map(|s| s.as_slice()));
    for k in 1..4 {
        let (chosen, covered) = greedy_weighted_cover(&coll, g.node_count(), k, &[]);
        let best = subsets(g.node_count(), k).iter().map(|s| coll.coverage(s)).max().unwrap();
        assert_eq!(chosen.len(), k);
        assert!(covered as f64 >= (1.0 - (-1.0f64).exp()) * best as f64);
    }
}

const SPECS: [RandomInstanceSpec; 3] = [
    RandomInstanceSpec { nodes: 6, edges: 8, uncertain_edges: 3, meeting_cap: 2, max_window: 2 },
    RandomInstanceSpec { nodes: 7, edges: 10, uncertain_edges: 4, meeting_cap: 1, max_window: 2 },
    RandomInstanceSpec { nodes: 5, edges: 8, uncertain_edges: 2, meeting_cap: 3, max_window: 1 },
];

#[test]
fn objectives_bracket_and_mu_is_monotone() {
    for spec in SPECS {
        let n = spec.nodes as NodeId;
        let mut sets = vec![vec![]];
        for a in 1..n {
            sets.push(vec![a]);
            for b in a + 1..n {
                sets.push(vec![a, b]);
            }
        }
        for seed in 0..12 {
            let inst = random_instance(spec, seed).unwrap();
            if inst.world_count().unwrap() > 3e5 {
                continue;
            }
            assert!((inst.total_probability().unwrap() - 1.0).abs() < 1e-12);
            let lo = enumerate_many(&inst, &[0], Objective::MuLower, &sets).unwrap();
            let mu = enumerate_many(&inst, &[0], Objective::Mu, &sets).unwrap();
            let hi = enumerate_many(&inst, &[0], Objective::MuUpper, &sets).unwrap();
            for (i, s) in sets.iter().enumerate() {
                assert!(lo[i] >= 0.0);
                assert!(lo[i] <= mu[i] + 1e-9, "{spec:?} #{seed} {s:?}: lower {} > mu {}", lo[i], mu[i]);
                assert!(mu[i] <= hi[i] + 1e-9, "{spec:?} #{seed} {s:?}: mu {} > upper {}", mu[i], hi[i]);
                for &x in s.iter().filter(|_| s.len() == 2) {
                    let j = sets.iter().position(|t| t == &vec![x]).unwrap();
                    assert!(mu[j] <= mu[i] + 1e-9, "{spec:?} #{seed}: mu not monotone at {s:?}");
                }
            }
        }
    }
}

#[test]
fn bounding_objectives_are_submodular_on_small_instances() {
    let spec = RandomInstanceSpec { nodes: 5, edges: 7, uncertain_edges: 3, meeting_cap: 2, max_window: 1 };
    for seed in 0..8 {
        let inst = random_instance(spec, 100 + seed).unwrap();
        for objective in [Objective::MuLower, Objective::MuUpper] {
            let v = check_submodularity(&inst, &[0], objective, 3).unwrap();
            assert!(v.is_empty(), "instance {seed} {objective:?}: {:?}", v.first());
        }
    }
}

/// Chi-square statistic of observed counts against expected probabilities.
fn chi_square(counts: &[u64], probs: &[f64], total: u64) -> f64 {
    counts.iter().zip(probs).map(|(&c, &p)| (c as f64 - p * total as f64).powi(2) / (p * total as f64)).sum()
}

#[test]
fn geometric_meeting_lengths_fit() {
    // 0.001 upper quantiles of chi-square with 20 and 10 degrees of freedom
    for (m, bins, critical) in [(1.0 / 6.0, 21usize, 45.315), (0.5, 11, 29.588)] {
        let mut rng = SmallRng::seed_from_u64(42);
        let draws = 100_000u64;
        let mut counts = vec![0u64; bins];
        for _ in 0..draws {
            let h = sample_meeting_length(m, &mut rng).unwrap() as usize;
            counts[(h - 1).min(bins - 1)] += 1;
        }
        let mut probs: Vec<f64> = (0..bins - 1).map(|i| (1.0 - m).powi(i as i32) * m).collect();
        probs.push((1.0 - m).powi(bins as i32 - 1));
        let stat = chi_square(&counts, &probs, draws);
        assert!(stat < critical, "m = {m}: chi-square {stat} exceeds {critical}");
    }
}

#[test]
fn tie_orders_are_uniform() {
    // node 3 has in-neighbours 0, 1, 2; node 4 has in-neighbours 0 and 1 only
    let g = read_edge_list("0 3 1\n1 3 1\n2 3 1\n0 4 1\n1 4 1\n".as_bytes(), true, ProbMode::Explicit).unwrap();
    let model = WorldModel::new(&g, &ModelParams::default()).unwrap();
    let draws = 100_000u64;
    let mut perms = std::collections::HashMap::new();
    let mut first_of_pair = [0u64; 3];
    let mut first_of_two = [0u64; 2];
    for i in 0..draws {
        let w = model.world(7, i);
        let order: Vec<NodeId> = tie_order(&g, &w, 3).iter().map(|&e| g.edge(e).source).collect();
        *perms.entry(order.clone()).or_insert(0u64) += 1;
        // restrict to the subset {0, 2}
        first_of_pair[*order.iter().find(|&&x| x != 1).unwrap() as usize] += 1;
        first_of_two[g.edge(tie_order(&g, &w, 4)[0]).source as usize] += 1;
    }
    let check = |count: u64, p: f64| {
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = count as f64 / draws as f64;
        assert!((freq - p).abs() < 3.0 * se, "frequency {freq} vs {p}");
    };
    assert_eq!(perms.len(), 6);
    perms.values().for_each(|&c| check(c, 1.0 / 6.0));
    check(first_of_pair[0], 0.5);
    check(first_of_pair[2], 0.5);
    check(first_of_two[0], 0.5);
}
