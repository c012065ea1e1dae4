use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use protogossip::metrics::{parse_config_text, run_experiment, ExperimentConfig};
use protogossip::sim::run_simulation_traced;

/// Runs a seed sweep of the decentralized prototype-learning simulator and
/// writes per-run CSVs, an aggregate CSV and a summary.
///
/// Settings are applied in order: defaults, the scenario bundle, the config
/// file, then command-line flags.
#[derive(Debug, Parser)]
#[command(name = "protogossip", version)]
struct Args {
    /// Key-value config file; every flag below is a valid key
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write an event trace of the first seed to this file
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,

    /// base, jsd, limit-queue or clustering
    #[arg(long)]
    scenario: Option<String>,
    /// Number of nodes
    #[arg(long)]
    n: Option<String>,
    /// Peers contacted per sharing attempt
    #[arg(long)]
    s: Option<String>,
    /// Sharing probability per trained sensor sample
    #[arg(long = "t-share")]
    t_share: Option<String>,
    /// Worthiness threshold on the Jensen-Shannon distance
    #[arg(long = "th-jsd")]
    th_jsd: Option<String>,
    /// Prototype count that triggers compression
    #[arg(long = "th-prot")]
    th_prot: Option<String>,
    /// Per-peer queue cap in prototypes, or "none"
    #[arg(long = "queue-max-protos")]
    queue_max_protos: Option<String>,
    /// Per-peer queue cap in prototype sets, or "none"
    #[arg(long = "queue-max-sets")]
    queue_max_sets: Option<String>,
    /// Sensor arrival rate per node (1/s)
    #[arg(long = "lambda-s")]
    lambda_s: Option<String>,
    /// Service rate per node (1/s)
    #[arg(long)]
    mu: Option<String>,
    /// "synthetic" or a CSV path
    #[arg(long)]
    dataset: Option<String>,
    /// Samples used across all nodes
    #[arg(long = "d-size")]
    d_size: Option<String>,
    /// Fixed start index into the source
    #[arg(long = "r-start", conflicts_with = "r_random")]
    r_start: Option<String>,
    /// Draw the start index per seed
    #[arg(long = "r-random")]
    r_random: bool,
    /// Simulated seconds per run
    #[arg(long)]
    horizon: Option<String>,
    /// Number of seeds
    #[arg(long)]
    seeds: Option<String>,
    /// First seed of the sweep
    #[arg(long = "seed-base")]
    seed_base: Option<String>,
    /// Output directory
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    /// Seconds between metric samples
    #[arg(long = "metrics-period")]
    metrics_period: Option<String>,
    /// Message delivery latency (s)
    #[arg(long)]
    latency: Option<String>,
    /// Length of the synthetic source
    #[arg(long = "synthetic-length")]
    synthetic_length: Option<String>,
    /// Label column of a CSV dataset (default: last)
    #[arg(long = "label-column")]
    label_column: Option<String>,
    /// Min-max normalize each node's stream (true/false)
    #[arg(long)]
    normalize: Option<String>,
    /// Override the scenario's worthiness gate (true/false)
    #[arg(long)]
    gate: Option<String>,
    /// Override compression after absorbing peer prototypes (true/false)
    #[arg(long = "compress-on-queue")]
    compress_on_queue: Option<String>,
    /// Override compression before sharing (true/false)
    #[arg(long = "compress-on-share")]
    compress_on_share: Option<String>,
}

impl Args {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let options = [
            ("scenario", &self.scenario),
            ("n", &self.n),
            ("s", &self.s),
            ("t-share", &self.t_share),
            ("th-jsd", &self.th_jsd),
            ("th-prot", &self.th_prot),
            ("queue-max-protos", &self.queue_max_protos),
            ("queue-max-sets", &self.queue_max_sets),
            ("lambda-s", &self.lambda_s),
            ("mu", &self.mu),
            ("dataset", &self.dataset),
            ("d-size", &self.d_size),
            ("r-start", &self.r_start),
            ("horizon", &self.horizon),
            ("seeds", &self.seeds),
            ("seed-base", &self.seed_base),
            ("out-dir", &self.out_dir),
            ("metrics-period", &self.metrics_period),
            ("latency", &self.latency),
            ("synthetic-length", &self.synthetic_length),
            ("label-column", &self.label_column),
            ("normalize", &self.normalize),
            ("gate", &self.gate),
            ("compress-on-queue", &self.compress_on_queue),
            ("compress-on-share", &self.compress_on_share),
        ];
        for (key, value) in options {
            if let Some(v) = value {
                out.push((key, v.clone()));
            }
        }
        if self.r_random {
            out.push(("r-random", "true".to_string()));
        }
        out
    }
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        pairs = parse_config_text(&text).with_context(|| format!("in {}", path.display()))?;
    }
    pairs.extend(args.pairs().into_iter().map(|(k, v)| (k.to_string(), v)));
    let mut cfg = ExperimentConfig::default();
    cfg.apply_all(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    let cfg = build_config(&args)?;
    if let Some(path) = &args.trace {
        let file =
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        run_simulation_traced(&cfg, cfg.seed_base, &mut w).context("traced run failed")?;
        w.flush()
            .with_context(|| format!("cannot write {}", path.display()))?;
        log::info!(
            "trace of seed {} written to {}",
            cfg.seed_base,
            path.display()
        );
    }
    let report = run_experiment(&cfg)?;
    print!("{}", report.summary.render());
    println!("output_dir = {}", cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
