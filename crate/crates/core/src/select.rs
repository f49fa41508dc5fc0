//! Weighted max-coverage greedy, sample-size bounds, and the
//! nominator/assessor selection loop with its sandwich and anytime forms.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::ops::Range;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{NetGraph, NodeId};
use crate::params::ModelParams;
use crate::rdr::{RdrSampler, SamplingMode, Variant, Weight};
use crate::sim::{check_seeds, estimate_inf_f, estimate_mitigation, InfEstimate, MitigationEstimate, Objective};
use crate::world::combine;

/// Flat storage of weighted sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Collection {
    offsets: Vec<usize>,
    entries: Vec<(NodeId, Weight)>,
}

impl Collection {
    pub fn new() -> Self {
        Collection { offsets: vec![0], entries: Vec::new() }
    }

    pub fn from_sets<I, S>(sets: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[(NodeId, Weight)]>,
    {
        let mut c = Collection::new();
        sets.into_iter().for_each(|s| c.push(s.as_ref()));
        c
    }

    pub fn push(&mut self, set: &[(NodeId, Weight)]) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.entries.extend_from_slice(set);
        self.offsets.push(self.entries.len());
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set(&self, i: usize) -> &[(NodeId, Weight)] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[(NodeId, Weight)]> + '_ {
        (0..self.len()).map(move |i| self.set(i))
    }

    /// Total covered weight of `seeds`: per set, the largest weight of a member in `seeds`.
    pub fn coverage(&self, seeds: &[NodeId]) -> u64 {
        let max = seeds.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut member = vec![false; max];
        seeds.iter().for_each(|&s| member[s as usize] = true);
        self.iter()
            .map(|set| {
                set.iter()
                    .filter(|(u, _)| (*u as usize) < max && member[*u as usize])
                    .map(|&(_, w)| w as u64)
                    .max()
                    .unwrap_or(0)
            })
            .sum()
    }

    /// Sum over sets of the largest weight present.
    pub fn max_weight_total(&self) -> u64 {
        self.iter().map(|s| s.iter().map(|&(_, w)| w as u64).max().unwrap_or(0)).sum()
    }
}

/// Lazy greedy for max-weight coverage over nodes `0..n` minus `excluded`.
/// Ties go to the smallest node id. Returns the chosen nodes in selection
/// order and their total covered weight.
pub fn greedy_weighted_cover(collection: &Collection, n: usize, k: usize, excluded: &[NodeId]) -> (Vec<NodeId>, u64) {
    let mut index: Vec<Vec<(u32, Weight)>> = vec![Vec::new(); n];
    for (i, set) in collection.iter().enumerate() {
        for &(u, w) in set {
            index[u as usize].push((i as u32, w));
        }
    }
    let mut banned = vec![false; n];
    excluded.iter().filter(|&&v| (v as usize) < n).for_each(|&v| banned[v as usize] = true);
    let mut covered: Vec<Weight> = vec![0; collection.len()];
    let gain = |u: NodeId, covered: &[Weight]| -> u64 {
        index[u as usize]
            .iter()
            .map(|&(i, w)| w.saturating_sub(covered[i as usize]) as u64)
            .sum()
    };
    let mut heap: BinaryHeap<(u64, Reverse<NodeId>)> =
        (0..n as NodeId).filter(|&u| !banned[u as usize]).map(|u| (gain(u, &covered), Reverse(u))).collect();
    let mut chosen = Vec::with_capacity(k);
    let mut total = 0;
    while chosen.len() < k {
        let Some((_, Reverse(u))) = heap.pop() else { break };
        let fresh = gain(u, &covered);
        if heap.peek().is_some_and(|&top| (fresh, Reverse(u)) < top) {
            heap.push((fresh, Reverse(u)));
            continue;
        }
        for &(i, w) in &index[u as usize] {
            let c = &mut covered[i as usize];
            *c = (*c).max(w);
        }
        total += fresh;
        chosen.push(u);
    }
    (chosen, total)
}

/// Sum of the `k` largest one-hop activation probabilities from `s_f`,
/// floored at `1e-6 * n` when F has no out-neighbours.
pub fn compute_lb_mia(g: &NetGraph, s_f: &[NodeId], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    check_seeds(g.node_count(), s_f, &[])?;
    let mut is_seed = vec![false; g.node_count()];
    s_f.iter().for_each(|&s| is_seed[s as usize] = true);
    let mut miss = vec![1.0f64; g.node_count()];
    let mut touched = Vec::new();
    for &s in s_f {
        for e in g.out_edges(s) {
            let edge = g.edge(e);
            let v = edge.target as usize;
            if is_seed[v] {
                continue;
            }
            if miss[v] == 1.0 {
                touched.push(v);
            }
            miss[v] *= 1.0 - edge.prob;
        }
    }
    touched.sort_unstable();
    touched.dedup();
    let mut ap: Vec<f64> = touched.iter().map(|&v| 1.0 - miss[v]).collect();
    ap.sort_by(|a, b| b.total_cmp(a));
    let lb: f64 = ap.iter().take(k).sum();
    if lb > 0.0 {
        Ok(lb)
    } else {
        let floor = 1e-6 * g.node_count() as f64;
        log::warn!("fake seeds have no out-going probability mass; using LB floor {floor:e}");
        Ok(floor)
    }
}

/// ln C(n, k) through log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let lg = |x: f64| libm::lgamma(x);
    lg(n as f64 + 1.0) - lg(k as f64 + 1.0) - lg((n - k) as f64 + 1.0)
}

const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Upper bound on the sample count. `scale` is the normalizing node count
/// (n, or 2n when weights are halved); `n` enters only the binomial term.
pub fn compute_n_max(scale: f64, n: u64, k: u64, eps: f64, eps_prime: f64, big_delta: f64, lb: f64) -> Result<u64> {
    if !(lb > 0.0) {
        return Err(invalid(format!("LB must be positive, got {lb}")));
    }
    let gap = eps * (1.0 + eps_prime) - 2.0 * eps_prime * ONE_MINUS_INV_E;
    if !(gap > 0.0) {
        return Err(invalid("eps(1+eps') must exceed 2 eps'(1-1/e)"));
    }
    if !(big_delta > 0.0) {
        return Err(invalid("confidence budget must be positive"));
    }
    let log_term = (27.0 / (4.0 * big_delta)).ln() + ln_binomial(n, k.min(n));
    let value = 8.0 * scale * (3.0 + eps_prime) * ONE_MINUS_INV_E * log_term / (3.0 * lb * gap * gap);
    Ok(value.ceil().max(1.0) as u64)
}

/// Lower confidence bound on the normalized objective estimate; evaluated in
/// a form that stays exact near `lambda = 0`.
pub fn sigma_lower(lambda: f64, theta: f64, delta: f64, eps_prime: f64, scale: f64) -> f64 {
    let a = (1.0 / delta).ln();
    let root = (a * lambda + 25.0 * a * a / 36.0).sqrt();
    let core = lambda * (lambda - 2.0 * a / 3.0) / (lambda + 5.0 * a / 3.0 + 2.0 * root);
    let core = if core.is_finite() { core.max(0.0) } else { 0.0 };
    core * scale / (theta * (1.0 + eps_prime))
}

/// Upper confidence bound on the optimum from the greedy coverage.
pub fn sigma_upper(lambda: f64, theta: f64, delta: f64, eps_prime: f64, scale: f64) -> f64 {
    let a = (1.0 / delta).ln();
    let s = (lambda / ONE_MINUS_INV_E + a).sqrt() + a.sqrt();
    s * s * scale / (theta * (1.0 - eps_prime))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub eps: f64,
    pub delta: f64,
    pub eps_prime: f64,
    pub delta_prime: f64,
    pub big_delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub k: usize,
    pub lb: f64,
    /// Node count the normalized coverage is scaled by.
    pub scale: f64,
    pub n_max: u64,
    pub n_0: u64,
    pub i_max: u32,
}

impl BoundParams {
    /// `eps_prime` is `eps / 2` when a spread estimate enters the
    /// normalization and 0 otherwise.
    pub fn new(n: usize, scale: f64, k: usize, eps: f64, delta: f64, eps_prime: f64, lb: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("eps and delta must lie in (0,1)"));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let delta_prime = delta / 9.0;
        let big_delta = delta - delta_prime;
        let n_max = compute_n_max(scale, n as u64, k as u64, eps, eps_prime, big_delta, lb)?;
        let n_0 = ((n_max as f64 * eps * eps * lb / scale).ceil() as u64).clamp(1, n_max);
        let i_max = ((n_max as f64 / n_0 as f64).log2().ceil() as u32).max(1);
        let d = big_delta / (3.0 * i_max as f64);
        Ok(BoundParams { eps, delta, eps_prime, delta_prime, big_delta, delta1: d, delta2: d, k, lb, scale, n_max, n_0, i_max })
    }

    /// Replaces the per-iteration budgets (used by the anytime form).
    pub fn with_deltas(mut self, delta1: f64, delta2: f64) -> Self {
        self.delta1 = delta1;
        self.delta2 = delta2;
        self
    }

    pub fn threshold(&self) -> f64 {
        ONE_MINUS_INV_E - self.eps
    }
}

/// Source of independent weighted sets; sample `i` depends only on `i`.
pub trait SampleSource: Sync {
    fn node_count(&self) -> usize;
    fn generate(&self, range: Range<u64>) -> Result<Vec<Vec<(NodeId, Weight)>>>;
}

impl SampleSource for RdrSampler<'_> {
    fn node_count(&self) -> usize {
        self.graph().node_count()
    }

    fn generate(&self, range: Range<u64>) -> Result<Vec<Vec<(NodeId, Weight)>>> {
        Ok(RdrSampler::generate(self, range)?.into_iter().map(|s| s.entries).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub r1: usize,
    pub r2: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub inf: Duration,
    pub sampling: Duration,
    pub greedy: Duration,
    pub total: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chosen {
    Lower,
    Upper,
}

impl Chosen {
    pub fn label(self) -> &'static str {
        match self {
            Chosen::Lower => "S^L",
            Chosen::Upper => "S^U",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichReport {
    pub mu_lower_set: MitigationEstimate,
    pub mu_upper_set: MitigationEstimate,
    pub mu_bar_upper_set: MitigationEstimate,
    pub beta: f64,
    pub beta_se: f64,
    pub chosen: Chosen,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    /// In selection order.
    pub seeds: Vec<NodeId>,
    pub iterations: Vec<IterationRecord>,
    pub alpha: f64,
    /// True when the loop stopped on the guarantee rather than the cap.
    pub certified: bool,
    pub variant: Option<Variant>,
    pub mode: SamplingMode,
    pub bounds: BoundParams,
    pub inf: Option<InfEstimate>,
    /// Objective estimate for the seeds from the second collection.
    pub estimate: f64,
    pub sandwich: Option<SandwichReport>,
    pub timings: Timings,
}

impl SelectionResult {
    pub fn report(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let variant = self.variant.map_or("im", Variant::label);
        let _ = writeln!(out, "variant {variant}, mode {}, seeds {:?}", self.mode.label(), self.seeds);
        let b = &self.bounds;
        let _ = writeln!(out, "LB {:.4}, N_max {}, N_0 {}, i_max {}, delta1 {:.3e}", b.lb, b.n_max, b.n_0, b.i_max, b.delta1);
        if let Some(inf) = &self.inf {
            let _ = writeln!(out, "INF_F estimate {:.3} from {} samples", inf.value, inf.samples);
        }
        for r in &self.iterations {
            let _ = writeln!(
                out,
                "  iter {}: |R1|={} |R2|={} L1={:.3} L2={:.3} sigma_l={:.4} sigma_u={:.4} alpha={:.4}",
                r.iteration, r.r1, r.r2, r.lambda1, r.lambda2, r.sigma_lower, r.sigma_upper, r.alpha
            );
        }
        let _ = writeln!(
            out,
            "alpha {:.4} ({}), estimate {:.4}",
            self.alpha,
            if self.certified { "target reached" } else { "iteration cap" },
            self.estimate
        );
        if let Some(s) = &self.sandwich {
            let _ = writeln!(
                out,
                "sandwich: chose {}, mu(S^L)={:.4}±{:.4}, mu(S^U)={:.4}±{:.4}, beta={:.4}±{:.4}",
                s.chosen.label(),
                s.mu_lower_set.mean,
                s.mu_lower_set.se,
                s.mu_upper_set.mean,
                s.mu_upper_set.se,
                s.beta,
                s.beta_se
            );
        }
        out
    }
}

/// Loop controls beyond the bound parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopOptions {
    /// Stop as soon as alpha reaches the target.
    pub stop_on_alpha: bool,
    pub max_iterations: Option<u32>,
    /// Stop level for alpha; the certification threshold when `None`.
    pub alpha_target: Option<f64>,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions { stop_on_alpha: true, max_iterations: None, alpha_target: None }
    }
}

/// Two growing collections drawn from independent sources.
struct LoopState<'s, S: SampleSource> {
    src1: &'s S,
    src2: &'s S,
    r1: Collection,
    r2: Collection,
    /// Multiplies raw coverage into normalized coverage.
    factor: f64,
    excluded: Vec<NodeId>,
    timings: Timings,
}

impl<'s, S: SampleSource> LoopState<'s, S> {
    fn new(src1: &'s S, src2: &'s S, factor: f64, excluded: &[NodeId], n_0: u64) -> Result<Self> {
        let mut st = LoopState {
            src1,
            src2,
            r1: Collection::new(),
            r2: Collection::new(),
            factor,
            excluded: excluded.to_vec(),
            timings: Timings::default(),
        };
        st.grow(n_0)?;
        Ok(st)
    }

    fn grow(&mut self, target: u64) -> Result<()> {
        let start = Instant::now();
        for (src, col) in [(self.src1, &mut self.r1), (self.src2, &mut self.r2)] {
            let from = col.len() as u64;
            if target > from {
                src.generate(from..target)?.iter().for_each(|s| col.push(s));
            }
        }
        self.timings.sampling += start.elapsed();
        Ok(())
    }

    fn step(&mut self, iteration: u32, b: &BoundParams) -> (Vec<NodeId>, IterationRecord) {
        let start = Instant::now();
        let n = self.src1.node_count();
        let (seeds, w1) = greedy_weighted_cover(&self.r1, n, b.k, &self.excluded);
        let w2 = self.r2.coverage(&seeds);
        self.timings.greedy += start.elapsed();
        let (t1, t2) = (self.r1.len() as f64, self.r2.len() as f64);
        let lambda1 = self.factor * w1 as f64;
        let lambda2 = self.factor * w2 as f64;
        let su = sigma_upper(lambda1, t1, b.delta1, b.eps_prime, b.scale);
        let sl = sigma_lower(lambda2, t2, b.delta2, b.eps_prime, b.scale);
        let alpha = if su > 0.0 { (sl / su).clamp(0.0, 1.0) } else { 0.0 };
        let record = IterationRecord {
            iteration,
            r1: self.r1.len(),
            r2: self.r2.len(),
            lambda1,
            lambda2,
            sigma_lower: sl,
            sigma_upper: su,
            alpha,
        };
        (seeds, record)
    }

    fn estimate(&self, seeds: &[NodeId], scale: f64) -> f64 {
        self.factor * self.r2.coverage(seeds) as f64 * scale / self.r2.len().max(1) as f64
    }
}

/// Seeds, iteration log, certified flag, final alpha and timings.
pub type LoopOutcome = (Vec<NodeId>, Vec<IterationRecord>, bool, f64, Timings);

/// Runs the doubling loop on two sources. `factor` converts covered weight to
/// normalized coverage in [0, 1] per set.
pub fn run_selection_loop<S: SampleSource>(src1: &S, src2: &S, bounds: &BoundParams, factor: f64, excluded: &[NodeId], opts: LoopOptions) -> Result<LoopOutcome> {
    let mut st = LoopState::new(src1, src2, factor, excluded, bounds.n_0)?;
    let cap = opts.max_iterations.map_or(bounds.i_max, |m| m.clamp(1, bounds.i_max));
    let mut records = Vec::new();
    let mut i = 1;
    loop {
        let (seeds, rec) = st.step(i, bounds);
        records.push(rec);
        let certified = rec.alpha >= bounds.threshold();
        let reached = rec.alpha >= opts.alpha_target.unwrap_or(bounds.threshold());
        if (opts.stop_on_alpha && reached) || i >= cap {
            let est = st.estimate(&seeds, bounds.scale);
            return Ok((seeds, records, certified, est, st.timings));
        }
        let next = (st.r1.len() as u64 * 2).min(bounds.n_max.max(st.r1.len() as u64 + 1));
        st.grow(next)?;
        i += 1;
    }
}

/// Inputs shared by every selection entry point.
#[derive(Clone, Copy, Debug)]
pub struct SelectConfig<'a> {
    pub g: &'a NetGraph,
    pub params: &'a ModelParams,
    pub s_f: &'a [NodeId],
    pub k: usize,
    pub eps: f64,
    /// Defaults to 1/n when `None`.
    pub delta: Option<f64>,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SelectConfig<'_> {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.g.node_count().max(2) as f64)
    }
}

const INF_STREAM: u64 = 0x494e46;
const R1_STREAM: u64 = 0x5231;
const R2_STREAM: u64 = 0x5232;

fn variant_tag(variant: Variant) -> u64 {
    match variant {
        Variant::Lower => 1,
        Variant::Upper => 2,
    }
}

struct Prepared {
    bounds: BoundParams,
    factor: f64,
    inf: Option<InfEstimate>,
    inf_time: Duration,
}

fn prepare(cfg: &SelectConfig<'_>) -> Result<Prepared> {
    check_seeds(cfg.g.node_count(), cfg.s_f, &[])?;
    if cfg.s_f.is_empty() {
        return Err(invalid("the fake seed set is empty"));
    }
    let n = cfg.g.node_count();
    let delta = cfg.delta();
    let lb = compute_lb_mia(cfg.g, cfg.s_f, cfg.k)?;
    match cfg.mode {
        SamplingMode::Is => {
            let bounds = BoundParams::new(n, n as f64, cfg.k, cfg.eps, delta, cfg.eps / 2.0, lb)?;
            let start = Instant::now();
            let inf = estimate_inf_f(cfg.g, cfg.params, cfg.s_f, bounds.eps_prime, bounds.delta_prime, combine(cfg.seed, INF_STREAM))?;
            if inf.value <= 0.0 {
                return Err(crate::error::Error::NoSpread);
            }
            Ok(Prepared { factor: inf.value / n as f64, bounds, inf: Some(inf), inf_time: start.elapsed() })
        }
        SamplingMode::Rs => {
            // weights in {0,1,2} are halved so each set contributes at most 1
            let bounds = BoundParams::new(n, 2.0 * n as f64, cfg.k, cfg.eps, delta, 0.0, lb)?;
            Ok(Prepared { factor: 0.5, bounds, inf: None, inf_time: Duration::ZERO })
        }
    }
}

fn samplers<'g>(cfg: &SelectConfig<'g>, variant: Variant) -> Result<(RdrSampler<'g>, RdrSampler<'g>)> {
    let base = combine(cfg.seed, variant_tag(variant));
    Ok((
        RdrSampler::new(cfg.g, cfg.params, cfg.s_f, variant, cfg.mode, combine(base, R1_STREAM))?,
        RdrSampler::new(cfg.g, cfg.params, cfg.s_f, variant, cfg.mode, combine(base, R2_STREAM))?,
    ))
}

fn namm_with(cfg: &SelectConfig<'_>, variant: Variant, prep: &Prepared, opts: LoopOptions) -> Result<SelectionResult> {
    let start = Instant::now();
    let (s1, s2) = samplers(cfg, variant)?;
    let (seeds, iterations, certified, estimate, mut timings) =
        run_selection_loop(&s1, &s2, &prep.bounds, prep.factor, cfg.s_f, opts)?;
    timings.inf = prep.inf_time;
    timings.total = start.elapsed() + prep.inf_time;
    Ok(SelectionResult {
        alpha: iterations.last().map_or(0.0, |r| r.alpha),
        seeds,
        iterations,
        certified,
        variant: Some(variant),
        mode: cfg.mode,
        bounds: prep.bounds,
        inf: prep.inf,
        estimate,
        sandwich: None,
        timings,
    })
}

/// Certified greedy selection for one bound.
pub fn namm(cfg: &SelectConfig<'_>, variant: Variant) -> Result<SelectionResult> {
    let prep = prepare(cfg)?;
    namm_with(cfg, variant, &prep, LoopOptions::default())
}

/// As [`namm`] with explicit per-iteration budgets and loop controls.
pub fn namm_with_options(cfg: &SelectConfig<'_>, variant: Variant, deltas: Option<(f64, f64)>, opts: LoopOptions) -> Result<SelectionResult> {
    let mut prep = prepare(cfg)?;
    if let Some((d1, d2)) = deltas {
        prep.bounds = prep.bounds.with_deltas(d1, d2);
    }
    namm_with(cfg, variant, &prep, opts)
}

/// Selects for both bounds, then keeps whichever set scores higher on the
/// true objective. The ratio mu(S^U) / mu_bar(S^U) estimates the sandwich factor.
pub fn sandwich(cfg: &SelectConfig<'_>, eval_sims: u64) -> Result<SelectionResult> {
    let start = Instant::now();
    let prep = prepare(cfg)?;
    let lower = namm_with(cfg, Variant::Lower, &prep, LoopOptions::default())?;
    let upper = namm_with(cfg, Variant::Upper, &prep, LoopOptions::default())?;
    let eval_seed = combine(cfg.seed, 0x4556414c);
    let eval = |s: &[NodeId], objective| estimate_mitigation(cfg.g, cfg.params, cfg.s_f, s, objective, eval_sims, eval_seed);
    let mu_l = eval(&lower.seeds, Objective::Mu)?;
    let mu_u = eval(&upper.seeds, Objective::Mu)?;
    let bar_u = eval(&upper.seeds, Objective::MuUpper)?;
    let same = {
        let (mut a, mut b) = (lower.seeds.clone(), upper.seeds.clone());
        a.sort_unstable();
        b.sort_unstable();
        a == b
    };
    let chosen = if same || mu_u.mean >= mu_l.mean { Chosen::Upper } else { Chosen::Lower };
    let (beta, beta_se) = ratio_with_se(mu_u.mean, mu_u.se, bar_u.mean, bar_u.se);
    let mut out = match chosen {
        Chosen::Upper => upper,
        Chosen::Lower => lower,
    };
    out.sandwich = Some(SandwichReport { mu_lower_set: mu_l, mu_upper_set: mu_u, mu_bar_upper_set: bar_u, beta, beta_se, chosen });
    out.timings.total = start.elapsed();
    Ok(out)
}

/// First-order standard error of `a / b` for independent estimates.
pub fn ratio_with_se(a: f64, se_a: f64, b: f64, se_b: f64) -> (f64, f64) {
    if b <= 0.0 {
        return (0.0, 0.0);
    }
    let r = a / b;
    let rel = if a > 0.0 { (se_a / a).powi(2) } else { 0.0 } + (se_b / b).powi(2);
    let se = if a > 0.0 { r * rel.sqrt() } else { se_a / b };
    (r, se)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnytimeEmission {
    pub iteration: u32,
    pub lower: (Vec<NodeId>, IterationRecord),
    pub upper: (Vec<NodeId>, IterationRecord),
}

/// Both bounds advanced in lock step with budgets delta/2 each. After every
/// doubling an emission is passed to `stop`; returning true ends the run.
/// The last emission is returned.
pub fn namm_anytime(cfg: &SelectConfig<'_>, mut stop: impl FnMut(&AnytimeEmission) -> bool) -> Result<Vec<AnytimeEmission>> {
    let mut prep = prepare(cfg)?;
    let half = cfg.delta() / 2.0;
    prep.bounds = prep.bounds.with_deltas(half, half);
    let b = prep.bounds;
    let (l1, l2) = samplers(cfg, Variant::Lower)?;
    let (u1, u2) = samplers(cfg, Variant::Upper)?;
    let mut low = LoopState::new(&l1, &l2, prep.factor, cfg.s_f, b.n_0)?;
    let mut up = LoopState::new(&u1, &u2, prep.factor, cfg.s_f, b.n_0)?;
    let mut out = Vec::new();
    for i in 1..=b.i_max {
        let emission = AnytimeEmission { iteration: i, lower: low.step(i, &b), upper: up.step(i, &b) };
        let halt = stop(&emission);
        out.push(emission);
        if halt || i == b.i_max {
            break;
        }
        let next = (low.r1.len() as u64 * 2).min(b.n_max.max(low.r1.len() as u64 + 1));
        low.grow(next)?;
        up.grow(next)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(sets: &[&[(NodeId, Weight)]]) -> Collection {
        Collection::from_sets(sets.iter().copied())
    }

    #[test]
    fn greedy_prefers_total_weight() {
        let c = col(&[&[(0, 2)], &[(0, 1), (1, 2)]]);
        assert_eq!(greedy_weighted_cover(&c, 2, 1, &[]), (vec![0], 3));
    }

    #[test]
    fn greedy_on_empty_takes_smallest_ids() {
        assert_eq!(greedy_weighted_cover(&Collection::new(), 5, 3, &[1]), (vec![0, 2, 3], 0));
    }

    #[test]
    fn greedy_full_coverage() {
        let c = col(&[&[(0, 1), (2, 2)], &[(1, 1)], &[(0, 2), (1, 1)]]);
        let (_, w) = greedy_weighted_cover(&c, 3, 3, &[]);
        assert_eq!(w, c.max_weight_total());
    }

    #[test]
    fn greedy_k_above_n() {
        let c = col(&[&[(0, 1)]]);
        assert_eq!(greedy_weighted_cover(&c, 2, 10, &[]).0.len(), 2);
    }

    #[test]
    fn sigma_lower_zero_and_monotone() {
        assert_eq!(sigma_lower(0.0, 100.0, 0.05, 0.05, 10.0), 0.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let v = sigma_lower(i as f64 * 0.5, 100.0, 0.05, 0.05, 10.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn sigma_upper_at_zero() {
        let a = (1.0f64 / 0.05).ln();
        let v = sigma_upper(0.0, 50.0, 0.05, 0.05, 10.0);
        assert!((v - 4.0 * a * 10.0 / (50.0 * 0.95)).abs() < 1e-12);
    }

    #[test]
    fn doubling_lb_halves_n_max() {
        let a = compute_n_max(100.0, 100, 5, 0.1, 0.05, 0.01 * 8.0 / 9.0, 10.0).unwrap();
        let b = compute_n_max(100.0, 100, 5, 0.1, 0.05, 0.01 * 8.0 / 9.0, 20.0).unwrap();
        assert!((a as f64 / 2.0 - b as f64).abs() <= 1.0);
        assert!(compute_n_max(100.0, 100, 5, 0.1, 0.05, 0.01, 0.0).is_err());
    }

    #[test]
    fn bound_params_invariants() {
        let b = BoundParams::new(1000, 1000.0, 5, 0.1, 0.01, 0.05, 3.0).unwrap();
        assert!(b.delta1 + b.delta2 + b.delta_prime <= b.delta + 1e-15);
        assert!(b.n_0 <= b.n_max);
        assert!(b.i_max >= 1);
        assert_eq!(b.i_max, ((b.n_max as f64 / b.n_0 as f64).log2().ceil() as u32).max(1));
    }

    #[test]
    fn ln_binomial_small() {
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-10);
        assert_eq!(ln_binomial(5, 0), 0.0);
    }

    #[test]
    fn ratio_se_shape() {
        let (r, se) = ratio_with_se(2.0, 0.1, 4.0, 0.2);
        assert_eq!(r, 0.5);
        assert!((se - 0.5 * (0.0025f64 + 0.0025).sqrt()).abs() < 1e-12);
    }
}
