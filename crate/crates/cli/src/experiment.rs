//! Experiment protocols: method-by-k mitigation tables, parameter sweeps,
//! robustness under perturbed parameters and sampling benchmarks.

use std::fs::File;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use tcic::baselines::{select_baseline, BaselineSpec};
use tcic::graph::NodeId;
use tcic::params::{AwMode, ModelParams};
use tcic::rdr::{RdrSampler, SamplingMode, Variant};
use tcic::select::{namm, namm_with_options, sandwich, LoopOptions, SelectConfig, SelectionResult};
use tcic::sim::{estimate_mitigation, MitigationEstimate, Objective};
use tcic::world::combine;

use crate::config::{Loaded, Method};
use crate::error::{config_error, Result};

const SELECT_STREAM: u64 = 0x53454c;
const EVAL_STREAM: u64 = 0x4556;
const PERTURB_STREAM: u64 = 0x5045;
const EMPTY_STREAM: u64 = 0x454d;

/// Seeds chosen by one method plus whatever certificate it produced.
#[derive(Clone, Debug)]
pub struct Selected {
    pub seeds: Vec<NodeId>,
    pub selection: Option<SelectionResult>,
    pub wall: Duration,
}

impl Selected {
    fn alpha(&self) -> Option<f64> {
        self.selection.as_ref().map(|s| s.alpha)
    }
}

/// Runs `method` for budget `k` under `params` (which may differ from the
/// configured ones in sweeps and perturbations).
pub fn select_with(loaded: &Loaded, params: &ModelParams, method: Method, k: usize) -> Result<Selected> {
    let cfg = &loaded.cfg;
    let seed = combine(cfg.seed, SELECT_STREAM);
    let start = Instant::now();
    let sc = SelectConfig {
        g: &loaded.graph,
        params,
        s_f: &loaded.s_f,
        k,
        eps: cfg.eps,
        delta: cfg.delta,
        mode: cfg.mode,
        seed,
    };
    let selection = match method {
        Method::NammLower => Some(namm(&sc, Variant::Lower)?),
        Method::NammUpper => Some(namm(&sc, Variant::Upper)?),
        Method::Sandwich => Some(sandwich(&sc, cfg.eval_sims)?),
        _ => None,
    };
    let seeds = match (&selection, method.baseline()) {
        (Some(s), _) => s.seeds.clone(),
        (None, Some(b)) => {
            let mut spec = BaselineSpec::new(b, k, seed);
            spec.budget = cfg.baseline_budget;
            spec.eps = cfg.eps;
            select_baseline(&loaded.graph, params, &loaded.s_f, &spec)?
        }
        (None, None) => unreachable!("every method either selects or is a baseline"),
    };
    Ok(Selected { seeds, selection, wall: start.elapsed() })
}

/// Mitigation of `seeds` on the common evaluation stream of the run.
pub fn evaluate(loaded: &Loaded, params: &ModelParams, seeds: &[NodeId], objective: Objective) -> Result<MitigationEstimate> {
    let seed = combine(loaded.cfg.seed, EVAL_STREAM);
    Ok(estimate_mitigation(&loaded.graph, params, &loaded.s_f, seeds, objective, loaded.cfg.eval_sims, seed)?)
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub config_hash: String,
    pub dataset: String,
    pub fake_seeds: String,
    pub method: String,
    pub k: usize,
    pub mitigation: f64,
    pub se: f64,
    pub reward2_frac: f64,
    pub reward1_frac: f64,
    pub beta: Option<f64>,
    pub beta_se: Option<f64>,
    pub alpha: Option<f64>,
    pub certified: Option<bool>,
    pub r1: Option<usize>,
    pub r2: Option<usize>,
    pub iterations: Option<usize>,
    pub eval_sims: u64,
    pub seeds: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub config_hash: String,
    pub method: String,
    pub k: usize,
    pub wall_seconds: f64,
    pub inf_seconds: f64,
    pub sampling_seconds: f64,
    pub greedy_seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub timings: Vec<TimingRow>,
    /// Rows that could not be produced, with the reason.
    pub failures: Vec<String>,
}

fn experiment_row(loaded: &Loaded, method: Method, k: usize) -> Result<(ExperimentRow, TimingRow)> {
    let sel = select_with(loaded, &loaded.cfg.params, method, k)?;
    let est = evaluate(loaded, &loaded.cfg.params, &sel.seeds, Objective::Mu)?;
    let s = sel.selection.as_ref();
    let last = s.and_then(|s| s.iterations.last());
    let sandwich = s.and_then(|s| s.sandwich);
    let row = ExperimentRow {
        config_hash: loaded.hash.clone(),
        dataset: loaded.cfg.dataset.clone(),
        fake_seeds: loaded.cfg.fake_seeds.to_string(),
        method: method.label().to_string(),
        k,
        mitigation: est.mean,
        se: est.se,
        reward2_frac: est.reward2_frac(),
        reward1_frac: est.reward1_frac(),
        beta: sandwich.map(|b| b.beta),
        beta_se: sandwich.map(|b| b.beta_se),
        alpha: sel.alpha(),
        certified: s.map(|s| s.certified),
        r1: last.map(|r| r.r1),
        r2: last.map(|r| r.r2),
        iterations: s.map(|s| s.iterations.len()),
        eval_sims: est.sims,
        seeds: join_ids(&sel.seeds),
    };
    let t = s.map(|s| s.timings).unwrap_or_default();
    let timing = TimingRow {
        config_hash: loaded.hash.clone(),
        method: method.label().to_string(),
        k,
        wall_seconds: sel.wall.as_secs_f64(),
        inf_seconds: t.inf.as_secs_f64(),
        sampling_seconds: t.sampling.as_secs_f64(),
        greedy_seconds: t.greedy.as_secs_f64(),
    };
    Ok((row, timing))
}

/// Every configured method at every configured k. A failing row is logged and
/// skipped.
pub fn run_experiment(loaded: &Loaded) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    for &method in &loaded.cfg.methods {
        for &k in &loaded.cfg.k {
            match experiment_row(loaded, method, k) {
                Ok((row, timing)) => {
                    log::info!("{} k={}: mitigation {:.3} ± {:.3}", row.method, k, row.mitigation, row.se);
                    out.rows.push(row);
                    out.timings.push(timing);
                }
                Err(e) => {
                    log::error!("{} k={k} failed: {e}", method.label());
                    out.failures.push(format!("{} k={k}: {e}", method.label()));
                }
            }
        }
    }
    out
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `timings.csv` and the wide `plot.csv` (one line
/// per k, one mitigation column per method) into `dir`.
pub fn write_experiment(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("results.csv"), &out.rows)?;
    write_csv(&dir.join("timings.csv"), &out.timings)?;
    let mut methods: Vec<&str> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    for r in &out.rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    let mut w = csv::Writer::from_writer(File::create(dir.join("plot.csv"))?);
    let mut header = vec!["k"];
    header.extend(methods.iter().copied());
    w.write_record(&header)?;
    for k in ks {
        let mut line = vec![k.to_string()];
        for m in &methods {
            let cell = out.rows.iter().find(|r| r.k == k && r.method == *m).map_or(String::new(), |r| r.mitigation.to_string());
            line.push(cell);
        }
        w.write_record(&line)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    /// Mean M meeting length in hops; m = 1 / length.
    MeetingLength,
    /// Mean reading time in seconds for the single learned window.
    AwSeconds,
    /// Probability that a node reads before committing.
    ReadProb,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::MeetingLength => "meeting-length",
            SweepAxis::AwSeconds => "aw-seconds",
            SweepAxis::ReadProb => "read-prob",
        }
    }

    pub fn apply(self, base: &ModelParams, value: f64) -> Result<ModelParams> {
        let mut p = base.clone();
        match self {
            SweepAxis::MeetingLength => {
                if value < 1.0 {
                    return Err(config_error("meeting length must be at least 1"));
                }
                p.meeting_prob_m = 1.0 / value;
            }
            SweepAxis::AwSeconds => {
                if value < 1.0 {
                    return Err(config_error("mean reading time must be at least 1 s"));
                }
                p.aw_mode = AwMode::LearnedSingle;
                p.aw_rate = 1.0 / value;
            }
            SweepAxis::ReadProb => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(config_error("read probability must lie in [0,1]"));
                }
                p.aw_zero_probability = 1.0 - value;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = crate::error::CliError;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::MeetingLength, SweepAxis::AwSeconds, SweepAxis::ReadProb]
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| config_error(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub axis: String,
    /// Axis value, or `base` for the unswept configuration.
    pub value: String,
    pub method: String,
    pub k: usize,
    pub mitigation: f64,
    pub se: f64,
    pub delta: f64,
    pub delta_se: f64,
    pub seeds: String,
}

/// Re-selects and re-evaluates each method at each k for every axis value.
/// Deltas are against the base configuration with independent-error SEs.
pub fn sweep_parameter(loaded: &Loaded, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let base_params = loaded.cfg.params.clone();
    let mut settings: Vec<(String, ModelParams)> = vec![("base".into(), base_params)];
    for &v in values {
        settings.push((v.to_string(), axis.apply(&loaded.cfg.params, v)?));
    }
    for &method in &loaded.cfg.methods {
        for &k in &loaded.cfg.k {
            let mut base: Option<MitigationEstimate> = None;
            for (label, params) in &settings {
                let sel = match select_with(loaded, params, method, k) {
                    Ok(s) => s,
                    Err(e) => {
                        log::error!("sweep {} {label} {} k={k} failed: {e}", axis.label(), method.label());
                        continue;
                    }
                };
                let est = evaluate(loaded, params, &sel.seeds, Objective::Mu)?;
                let b = *base.get_or_insert(est);
                rows.push(SweepRow {
                    config_hash: loaded.hash.clone(),
                    axis: axis.label().into(),
                    value: label.clone(),
                    method: method.label().into(),
                    k,
                    mitigation: est.mean,
                    se: est.se,
                    delta: est.mean - b.mean,
                    delta_se: if label == "base" { 0.0 } else { (est.se * est.se + b.se * b.se).sqrt() },
                    seeds: join_ids(&sel.seeds),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    /// Multiplicative Gaussian noise with this relative standard deviation
    /// on the meeting length, window length, reading probability and base rate.
    Gauss(f64),
    /// Unit meeting lengths and zero windows.
    TemporalOff,
}

impl Perturbation {
    pub fn label(self) -> String {
        match self {
            Perturbation::Gauss(s) => format!("gauss:{s}"),
            Perturbation::TemporalOff => "temporal-off".into(),
        }
    }

    pub fn apply(self, base: &ModelParams, seed: u64) -> Result<ModelParams> {
        let sigma = match self {
            Perturbation::TemporalOff => return Ok(base.temporal_off()),
            Perturbation::Gauss(s) => s,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(1.0, sigma).map_err(|e| config_error(format!("noise level {sigma}: {e}")))?;
        let mut factor = || noise.sample(&mut rng).max(0.05);
        let mut p = base.clone();
        // meeting length 1/m, kept at least one hop
        p.meeting_prob_m = (1.0 / ((1.0 / p.meeting_prob_m) * factor()).max(1.0)).min(1.0);
        let f = factor();
        p.aw_rate = (p.aw_rate / f).clamp(1e-9, 1.0);
        p.aw_mixture.iter_mut().for_each(|c| c.success_prob = (c.success_prob / f).clamp(1e-9, 1.0));
        p.aw_zero_probability = 1.0 - (base.read_probability() * factor()).clamp(0.0, 1.0);
        p.base_hop_seconds *= factor();
        p.validate()?;
        Ok(p)
    }
}

impl std::str::FromStr for Perturbation {
    type Err = crate::error::CliError;

    /// `gauss:0.05` or `temporal-off`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "temporal-off" {
            return Ok(Perturbation::TemporalOff);
        }
        let sigma = s
            .strip_prefix("gauss:")
            .and_then(|x| x.parse::<f64>().ok())
            .filter(|x| *x > 0.0)
            .ok_or_else(|| config_error(format!("unknown perturbation '{s}'")))?;
        Ok(Perturbation::Gauss(sigma))
    }
}

pub fn jaccard(a: &[NodeId], b: &[NodeId]) -> f64 {
    let inter = a.iter().filter(|x| b.contains(x)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub config_hash: String,
    pub perturbation: String,
    pub repetition: u32,
    pub method: String,
    pub k: usize,
    pub jaccard: f64,
}

/// Similarity of seed sets chosen under perturbed parameters to those chosen
/// under the configured ones.
pub fn robustness_jaccard(loaded: &Loaded, perturbations: &[Perturbation], repetitions: u32) -> Result<Vec<RobustnessRow>> {
    let mut rows = Vec::new();
    for &method in &loaded.cfg.methods {
        for &k in &loaded.cfg.k {
            let truth = select_with(loaded, &loaded.cfg.params, method, k)?.seeds;
            for &pert in perturbations {
                let reps = if pert == Perturbation::TemporalOff { 1 } else { repetitions.max(1) };
                for rep in 0..reps {
                    let params = pert.apply(&loaded.cfg.params, combine(combine(loaded.cfg.seed, PERTURB_STREAM), rep as u64))?;
                    let seeds = select_with(loaded, &params, method, k)?.seeds;
                    rows.push(RobustnessRow {
                        config_hash: loaded.hash.clone(),
                        perturbation: pert.label(),
                        repetition: rep,
                        method: method.label().into(),
                        k,
                        jaccard: jaccard(&truth, &seeds),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub config_hash: String,
    pub mode: String,
    pub k: usize,
    pub alpha_target: f64,
    pub alpha: f64,
    pub reached: bool,
    pub iterations: usize,
    pub r1: usize,
    pub r2: usize,
    /// Fraction of rootless sets among the probe draws.
    pub empty_rate: f64,
    pub wall_seconds: f64,
}

/// Lower-bound selection in each sampling mode, optionally run past the
/// certification threshold up to `alpha_target`.
pub fn bench_sampling(loaded: &Loaded, modes: &[SamplingMode], alpha_target: Option<f64>, empty_probe: u64) -> Result<Vec<BenchRow>> {
    let cfg = &loaded.cfg;
    let mut rows = Vec::new();
    for &mode in modes {
        let probe = RdrSampler::new(&loaded.graph, &cfg.params, &loaded.s_f, Variant::Lower, mode, combine(cfg.seed, EMPTY_STREAM))?;
        let empty_rate = if empty_probe == 0 {
            0.0
        } else {
            probe.generate(0..empty_probe)?.iter().filter(|s| s.root.is_none()).count() as f64 / empty_probe as f64
        };
        for &k in &cfg.k {
            let sc = SelectConfig {
                g: &loaded.graph,
                params: &cfg.params,
                s_f: &loaded.s_f,
                k,
                eps: cfg.eps,
                delta: cfg.delta,
                mode,
                seed: combine(cfg.seed, SELECT_STREAM),
            };
            let opts = LoopOptions { alpha_target, ..LoopOptions::default() };
            let start = Instant::now();
            let res = namm_with_options(&sc, Variant::Lower, None, opts)?;
            let target = alpha_target.unwrap_or(res.bounds.threshold());
            let last = res.iterations.last().copied();
            rows.push(BenchRow {
                config_hash: loaded.hash.clone(),
                mode: mode.label().into(),
                k,
                alpha_target: target,
                alpha: res.alpha,
                reached: res.alpha >= target,
                iterations: res.iterations.len(),
                r1: last.map_or(0, |r| r.r1),
                r2: last.map_or(0, |r| r.r2),
                empty_rate,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{FakeSeeds, GraphSource, RunConfig};

    fn small() -> Loaded {
        RunConfig {
            graph: GraphSource::Synthetic { nodes: 60, degree: 2, seed: 3 },
            fake_seeds: FakeSeeds::Top { count: 2 },
            methods: vec![Method::NammLower, Method::Random],
            k: vec![1, 3],
            eval_sims: 500,
            baseline_budget: 500,
            ..RunConfig::default()
        }
        .load()
        .unwrap()
    }

    #[test]
    fn experiment_rows_are_consistent() {
        let loaded = small();
        let out = run_experiment(&loaded);
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.rows.len(), 4);
        for r in &out.rows {
            assert!(r.reward2_frac >= 0.0 && r.reward1_frac >= 0.0);
            if r.mitigation > 0.0 {
                assert!((r.reward2_frac + r.reward1_frac - 1.0).abs() < 1e-12);
            }
            assert_eq!(r.config_hash, loaded.hash);
            assert_eq!(r.alpha.is_some(), r.method == "namm-lower");
        }
    }

    #[test]
    fn isolated_fake_seed_gives_nothing_to_mitigate() {
        let mut cfg = small().cfg;
        cfg.graph = GraphSource::Synthetic { nodes: 30, degree: 2, seed: 1 };
        cfg.fake_seeds = FakeSeeds::List { nodes: vec![0] };
        cfg.methods = vec![Method::Random, Method::Proximity];
        let mut loaded = cfg.load().unwrap();
        let g = &loaded.graph;
        let mut edges: Vec<(NodeId, NodeId, f64)> = g.edges().iter().map(|e| (e.source, e.target, e.prob)).collect();
        edges.retain(|e| e.0 != 0);
        loaded.graph = tcic::NetGraph::from_edges(30, edges, true).unwrap();
        let out = run_experiment(&loaded);
        assert!(out.rows.iter().all(|r| r.mitigation == 0.0));
    }

    #[test]
    fn jaccard_extremes() {
        assert_eq!(jaccard(&[1, 2], &[2, 1]), 1.0);
        assert_eq!(jaccard(&[1], &[2]), 0.0);
        assert!((jaccard(&[1, 2, 3], &[3, 4]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sweep_base_row_matches_plain_run() {
        let loaded = small();
        let rows = sweep_parameter(&loaded, SweepAxis::MeetingLength, &[1.0]).unwrap();
        let base = rows.iter().find(|r| r.value == "base" && r.method == "namm-lower" && r.k == 3).unwrap();
        let plain = run_experiment(&loaded).rows.into_iter().find(|r| r.method == "namm-lower" && r.k == 3).unwrap();
        assert_eq!(base.mitigation, plain.mitigation);
        assert_eq!(base.delta, 0.0);
    }

    #[test]
    fn perturbations_keep_params_valid() {
        let base = ModelParams::default();
        for seed in 0..50 {
            Perturbation::Gauss(0.1).apply(&base, seed).unwrap();
        }
        let off = Perturbation::TemporalOff.apply(&base, 0).unwrap();
        assert_eq!(off.meeting_prob_m, 1.0);
        assert_eq!("gauss:0.05".parse::<Perturbation>().unwrap(), Perturbation::Gauss(0.05));
    }

    #[test]
    fn unperturbed_robustness_is_one() {
        let loaded = small();
        let rows = robustness_jaccard(&loaded, &[Perturbation::Gauss(1e-12)], 1).unwrap();
        assert!(rows.iter().filter(|r| r.method == "random").all(|r| r.jaccard == 1.0));
    }

    #[test]
    fn bench_empty_rates() {
        let loaded = small();
        let rows = bench_sampling(&loaded, &[SamplingMode::Is, SamplingMode::Rs], None, 2000).unwrap();
        assert!(rows.iter().filter(|r| r.mode == "IS").all(|r| r.empty_rate == 0.0));
        assert!(rows.iter().filter(|r| r.mode == "RS").all(|r| r.empty_rate > 0.0));
    }
}
