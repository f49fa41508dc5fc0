use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::value::{Error as ValueError, StrDeserializer};
use serde::de::DeserializeOwned;
use tcic::graph::NodeId;
use tcic::rdr::{RdrSampler, SamplingMode, Variant};
use tcic::sim::Objective;
use tcic::world::combine;

use tcic_cli::config::{FakeSeeds, GraphSource, Method, ProbChoice, RunConfig};
use tcic_cli::error::{CliError, Result};
use tcic_cli::experiment::{
    bench_sampling, evaluate, robustness_jaccard, run_experiment, select_with, sweep_parameter, write_csv, write_experiment, Perturbation, SweepAxis,
};
use tcic_cli::testbed::scale_free;
use tcic_cli::verify::run_checks;

#[derive(Parser)]
#[command(name = "tcic", version, about = "Mitigation seed selection under temporal competitive cascades")]
struct Cli {
    /// Worker threads for sampling and evaluation.
    #[arg(long, global = true, env = "TCIC_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print node count, edge count and average degree.
    LoadStats(RunArgs),
    /// Select seeds with one method and print its report.
    Select {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "sandwich")]
        method: String,
        /// Write this many lower-variant RDR sets, one "root|u:w,..." line each.
        #[arg(long)]
        dump_rdr: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        dump_count: u64,
    },
    /// Estimate the objective of an explicit mitigation seed set.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<NodeId>,
        /// mu, mu-lower or mu-upper.
        #[arg(long, default_value = "mu")]
        objective: String,
    },
    /// Every method at every k; writes results.csv, plot.csv, timings.csv.
    Experiment(RunArgs),
    /// Re-run the experiment along one parameter axis; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// meeting-length, aw-seconds or read-prob.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Jaccard similarity of seed sets under perturbed parameters; writes robustness.csv.
    Robustness {
        #[command(flatten)]
        run: RunArgs,
        /// gauss:SIGMA or temporal-off, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "gauss:0.05,gauss:0.1,temporal-off")]
        perturb: Vec<String>,
        #[arg(long, default_value_t = 10)]
        reps: u32,
    },
    /// Selection cost in IS and RS mode; writes bench.csv.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "is,rs")]
        modes: Vec<String>,
        /// Keep doubling until alpha reaches this value (or the cap).
        #[arg(long)]
        alpha_target: Option<f64>,
        /// Sets drawn to measure the empty-set rate.
        #[arg(long, default_value_t = 20_000)]
        empty_probe: u64,
    },
    /// Check the built-in fixtures and reward equivalence against the exact oracle.
    OracleVerify {
        #[arg(long, default_value_t = 20)]
        instances: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a synthetic scale-free edge list.
    GenTestbed {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        degree: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A config file plus per-field overrides.
#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// Edge-list file (replaces the synthetic graph).
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    directed: bool,
    /// Synthetic scale-free graph with this many nodes.
    #[arg(long, conflicts_with = "graph")]
    synthetic_nodes: Option<usize>,
    #[arg(long, default_value_t = 3)]
    synthetic_degree: usize,
    #[arg(long, default_value_t = 7)]
    synthetic_seed: u64,
    /// inverse-indegree, fixed or explicit.
    #[arg(long)]
    prob_mode: Option<String>,
    #[arg(long)]
    fixed_prob: Option<f64>,
    /// top:M, random:M or list:a,b,c.
    #[arg(long)]
    fake_seeds: Option<String>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// is or rs.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    eval_sims: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    baseline_budget: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// global-constant, ego-centric or per-edge.
    #[arg(long)]
    meeting_mode: Option<String>,
    #[arg(long)]
    meeting_prob_m: Option<f64>,
    #[arg(long)]
    meeting_prob_f: Option<f64>,
    #[arg(long)]
    ego_c: Option<f64>,
    /// mixture-raw, learned-single, constant, uniform or custom.
    #[arg(long)]
    aw_mode: Option<String>,
    #[arg(long)]
    read_prob: Option<f64>,
    #[arg(long)]
    aw_rate: Option<f64>,
    #[arg(long)]
    base_hop_seconds: Option<f64>,
    #[arg(long)]
    aw_constant_hops: Option<u32>,
    #[arg(long)]
    aw_uniform_max: Option<u32>,
}

fn kebab<T: DeserializeOwned>(s: &str, what: &str) -> Result<T> {
    T::deserialize(StrDeserializer::<ValueError>::new(s)).map_err(|_| CliError::Config(format!("unknown {what} '{s}'")))
}

fn sampling_mode(s: &str) -> Result<SamplingMode> {
    kebab(&s.to_ascii_lowercase(), "sampling mode")
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if let Some(p) = &self.graph {
            c.graph = GraphSource::File { path: p.clone(), directed: self.directed };
        }
        if let Some(nodes) = self.synthetic_nodes {
            c.graph = GraphSource::Synthetic { nodes, degree: self.synthetic_degree, seed: self.synthetic_seed };
        }
        if let Some(v) = &self.prob_mode {
            c.prob_mode = kebab::<ProbChoice>(v, "probability mode")?;
        }
        if let Some(v) = self.fixed_prob {
            c.fixed_prob = v;
        }
        if let Some(v) = &self.fake_seeds {
            c.fake_seeds = v.parse::<FakeSeeds>()?;
        }
        if let Some(v) = &self.methods {
            c.methods = v.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = &self.k {
            c.k = v.clone();
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if self.delta.is_some() {
            c.delta = self.delta;
        }
        if let Some(v) = &self.mode {
            c.mode = sampling_mode(v)?;
        }
        if let Some(v) = self.eval_sims {
            c.eval_sims = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.baseline_budget {
            c.baseline_budget = v;
        }
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        let p = &mut c.params;
        if let Some(v) = &self.meeting_mode {
            p.meeting_mode = kebab(v, "meeting mode")?;
        }
        if let Some(v) = self.meeting_prob_m {
            p.meeting_prob_m = v;
        }
        if let Some(v) = self.meeting_prob_f {
            p.meeting_prob_f = v;
        }
        if let Some(v) = self.ego_c {
            p.ego_c = v;
        }
        if let Some(v) = &self.aw_mode {
            p.aw_mode = kebab(v, "window mode")?;
        }
        if let Some(v) = self.read_prob {
            p.aw_zero_probability = 1.0 - v;
        }
        if let Some(v) = self.aw_rate {
            p.aw_rate = v;
        }
        if let Some(v) = self.base_hop_seconds {
            p.base_hop_seconds = v;
        }
        if let Some(v) = self.aw_constant_hops {
            p.aw_constant_hops = v;
        }
        if let Some(v) = self.aw_uniform_max {
            p.aw_uniform_max = v;
        }
        Ok(c)
    }
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::LoadStats(run) => {
            let cfg = run.resolve()?;
            let g = cfg.load_graph()?;
            println!("{}", g.stats());
        }
        Command::Select { run, method, dump_rdr, dump_count } => {
            let loaded = run.resolve()?.load()?;
            let method: Method = method.parse()?;
            let k = loaded.cfg.k[0];
            let sel = select_with(&loaded, &loaded.cfg.params, method, k)?;
            println!("fake seeds {:?}", loaded.s_f);
            match &sel.selection {
                Some(s) => print!("{}", s.report()),
                None => println!("{} seeds {:?}", method.label(), sel.seeds),
            }
            if let Some(path) = dump_rdr {
                let sampler = RdrSampler::new(&loaded.graph, &loaded.cfg.params, &loaded.s_f, Variant::Lower, loaded.cfg.mode, combine(loaded.cfg.seed, 0x44554d50))?;
                let lines: Vec<String> = sampler.generate(0..dump_count)?.iter().map(|s| s.dump_line()).collect();
                std::fs::write(&path, lines.join("\n") + "\n")?;
                println!("wrote {dump_count} sets to {}", path.display());
            }
        }
        Command::Evaluate { run, seeds, objective } => {
            let loaded = run.resolve()?.load()?;
            let objective: Objective = kebab(&objective, "objective")?;
            let est = evaluate(&loaded, &loaded.cfg.params, &seeds, objective)?;
            println!("{}", tcic::sim::MitigationEstimate::csv_header());
            println!("{}", est.csv_row());
        }
        Command::Experiment(run) => {
            let loaded = run.resolve()?.load()?;
            let out = run_experiment(&loaded);
            write_config(&loaded.cfg, &loaded.cfg.output)?;
            write_experiment(&out, &loaded.cfg.output)?;
            println!("{} rows, {} failures, written to {}", out.rows.len(), out.failures.len(), loaded.cfg.output.display());
            for f in &out.failures {
                println!("failed: {f}");
            }
            return Ok(out.failures.is_empty());
        }
        Command::Sweep { run, axis, values } => {
            let loaded = run.resolve()?.load()?;
            let axis: SweepAxis = axis.parse()?;
            let rows = sweep_parameter(&loaded, axis, &values)?;
            write_config(&loaded.cfg, &loaded.cfg.output)?;
            write_csv(&loaded.cfg.output.join("sweep.csv"), &rows)?;
            for r in &rows {
                println!("{} {} {} k={}: {:.3} ({:+.3} ± {:.3})", r.axis, r.value, r.method, r.k, r.mitigation, r.delta, r.delta_se);
            }
        }
        Command::Robustness { run, perturb, reps } => {
            let loaded = run.resolve()?.load()?;
            let perts: Vec<Perturbation> = perturb.iter().map(|p| p.parse()).collect::<Result<_>>()?;
            let rows = robustness_jaccard(&loaded, &perts, reps)?;
            write_config(&loaded.cfg, &loaded.cfg.output)?;
            write_csv(&loaded.cfg.output.join("robustness.csv"), &rows)?;
            for p in &perts {
                for &k in &loaded.cfg.k {
                    let vals: Vec<f64> = rows.iter().filter(|r| r.perturbation == p.label() && r.k == k).map(|r| r.jaccard).collect();
                    let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                    println!("{} k={k}: mean Jaccard {mean:.3} over {} sets", p.label(), vals.len());
                }
            }
        }
        Command::Bench { run, modes, alpha_target, empty_probe } => {
            let loaded = run.resolve()?.load()?;
            let modes: Vec<SamplingMode> = modes.iter().map(|m| sampling_mode(m)).collect::<Result<_>>()?;
            let rows = bench_sampling(&loaded, &modes, alpha_target, empty_probe)?;
            write_config(&loaded.cfg, &loaded.cfg.output)?;
            write_csv(&loaded.cfg.output.join("bench.csv"), &rows)?;
            for r in &rows {
                println!(
                    "{} k={}: alpha {:.3} (target {:.3}) after {} iterations, |R1|={} |R2|={}, empty {:.3}, {:.2}s",
                    r.mode, r.k, r.alpha, r.alpha_target, r.iterations, r.r1, r.r2, r.empty_rate, r.wall_seconds
                );
            }
        }
        Command::OracleVerify { instances, seed } => {
            let checks = run_checks(instances, seed)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::GenTestbed { nodes, degree, seed, out } => {
            let g = scale_free(nodes, degree, seed)?;
            g.save_edge_list(&out)?;
            println!("{} written to {}", g.stats(), out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
