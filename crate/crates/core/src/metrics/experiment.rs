use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig};
use super::record::{write_records, MetricsRecord};
use crate::sim::{run_simulation, SimError, SimOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("seed {seed}: {source}")]
    Sim {
        seed: u64,
        #[source]
        source: SimError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// Mean and sample standard deviation across runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Node-averaged metrics at one sampling time, summarised across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub time: f64,
    pub runs: usize,
    pub f1: Stat,
    pub prototypes_trained: Stat,
    pub bytes_sent: Stat,
    pub model_size: Stat,
    pub mean_staleness: Stat,
}

const METRIC_NAMES: [&str; 5] = [
    "f1",
    "prototypes_trained",
    "bytes_sent",
    "model_size",
    "mean_staleness",
];

fn node_average(records: &[MetricsRecord]) -> Vec<(f64, [f64; 5])> {
    let mut out: Vec<(f64, [f64; 5], usize)> = Vec::new();
    for r in records {
        let v = [
            r.f1,
            r.prototypes_trained as f64,
            r.bytes_sent as f64,
            r.model_size as f64,
            r.mean_staleness,
        ];
        match out.last_mut() {
            Some((t, acc, k)) if *t == r.time => {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                *k += 1;
            }
            _ => out.push((r.time, v, 1)),
        }
    }
    out.into_iter()
        .map(|(t, acc, k)| (t, acc.map(|a| a / k as f64)))
        .collect()
}

/// Per-time mean and std across runs of the node-averaged metrics.
pub fn aggregate(runs: &[&[MetricsRecord]]) -> Vec<AggregateRow> {
    let series: Vec<_> = runs.iter().map(|r| node_average(r)).collect();
    let Some(first) = series.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|k| {
            let column = |m: usize| -> Stat {
                let vals: Vec<f64> = series
                    .iter()
                    .filter_map(|s| s.get(k))
                    .map(|(_, v)| v[m])
                    .collect();
                Stat::of(&vals)
            };
            AggregateRow {
                time: first[k].0,
                runs: series.iter().filter(|s| s.len() > k).count(),
                f1: column(0),
                prototypes_trained: column(1),
                bytes_sent: column(2),
                model_size: column(3),
                mean_staleness: column(4),
            }
        })
        .collect()
}

pub fn write_aggregate<W: std::io::Write>(out: W, rows: &[AggregateRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string(), "runs".to_string()];
    for m in METRIC_NAMES {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.time.to_string(), r.runs.to_string()];
        for s in [
            r.f1,
            r.prototypes_trained,
            r.bytes_sent,
            r.model_size,
            r.mean_staleness,
        ] {
            row.push(s.mean.to_string());
            row.push(s.std.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Headline numbers of a seed sweep. Bandwidth figures are per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub runs: usize,
    pub horizon: f64,
    pub final_f1: Stat,
    /// Cumulative bytes sent per node by the end of the run.
    pub bytes_per_node: Stat,
    /// Mean sending rate per node over the horizon.
    pub bytes_per_second_per_node: Stat,
    pub prototypes_trained_per_node: Stat,
    pub mean_staleness: Stat,
    pub max_message_bytes: u64,
    /// Final F1 in percent divided by the per-node rate in MB/s
    /// (1 MB = 10^6 bytes). Infinite when nothing was sent.
    pub f1_percent_per_mb_s: f64,
}

impl ExperimentSummary {
    pub fn from_outcomes(cfg: &ExperimentConfig, outcomes: &[SimOutcome]) -> Self {
        let n = cfg.n_nodes as f64;
        let stat =
            |f: &dyn Fn(&SimOutcome) -> f64| Stat::of(&outcomes.iter().map(f).collect::<Vec<_>>());
        let final_f1 = stat(&|o| o.summary.final_f1);
        let bytes_per_node = stat(&|o| o.summary.bytes_sent as f64 / n);
        let rate = stat(&|o| o.summary.bytes_sent as f64 / n / cfg.horizon);
        let mb_s = rate.mean / 1e6;
        Self {
            scenario: cfg.scenario.to_string(),
            runs: outcomes.len(),
            horizon: cfg.horizon,
            final_f1,
            bytes_per_node,
            bytes_per_second_per_node: rate,
            prototypes_trained_per_node: stat(&|o| o.summary.prototypes_trained as f64 / n),
            mean_staleness: stat(&|o| o.summary.mean_staleness),
            max_message_bytes: outcomes
                .iter()
                .map(|o| o.summary.max_message_bytes)
                .max()
                .unwrap_or(0),
            f1_percent_per_mb_s: if mb_s > 0.0 {
                final_f1.mean * 100.0 / mb_s
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let pm = |st: Stat| format!("{} +- {}", st.mean, st.std);
        line("scenario", self.scenario.clone());
        line("runs", self.runs.to_string());
        line("horizon_s", self.horizon.to_string());
        line("final_f1", pm(self.final_f1));
        line("bytes_sent_per_node", pm(self.bytes_per_node));
        line(
            "bytes_per_second_per_node",
            pm(self.bytes_per_second_per_node),
        );
        line(
            "mb_per_second_per_node",
            (self.bytes_per_second_per_node.mean / 1e6).to_string(),
        );
        line(
            "prototypes_trained_per_node",
            pm(self.prototypes_trained_per_node),
        );
        line("mean_staleness", pm(self.mean_staleness));
        line("max_message_bytes", self.max_message_bytes.to_string());
        line("f1_percent_per_mb_s", self.f1_percent_per_mb_s.to_string());
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outcomes: Vec<SimOutcome>,
    pub aggregate: Vec<AggregateRow>,
    pub summary: ExperimentSummary,
    pub files: Vec<PathBuf>,
}

pub fn seeds(cfg: &ExperimentConfig) -> impl Iterator<Item = u64> {
    let base = cfg.seed_base;
    (0..cfg.seeds as u64).map(move |k| base + k)
}

/// Runs every seed in parallel, results in seed order.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SimOutcome>, ExperimentError> {
    cfg.validate()?;
    seeds(cfg)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|seed| {
            run_simulation(cfg, seed).map_err(|source| ExperimentError::Sim { seed, source })
        })
        .collect()
}

pub fn run_file_name(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}_seed{seed}.csv", cfg.scenario)
}

/// Runs the sweep, then writes the per-run CSVs, the aggregate CSV and the
/// summary into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let outcomes = run_seeds(cfg)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    let scenario = cfg.scenario.to_string();
    for o in &outcomes {
        let path = dir.join(run_file_name(cfg, o.summary.seed));
        write_csv_file(&path, |f| {
            write_records(f, &o.records, o.summary.seed, &scenario)
        })?;
        files.push(path);
    }
    let runs: Vec<&[MetricsRecord]> = outcomes.iter().map(|o| o.records.as_slice()).collect();
    let aggregate = aggregate(&runs);
    let path = dir.join(format!("{scenario}_aggregate.csv"));
    write_csv_file(&path, |f| write_aggregate(f, &aggregate))?;
    files.push(path);

    let summary = ExperimentSummary::from_outcomes(cfg, &outcomes);
    let path = dir.join(format!("{scenario}_summary.txt"));
    fs::write(&path, summary.render()).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(ExperimentReport {
        outcomes,
        aggregate,
        summary,
        files,
    })
}

fn write_csv_file(
    path: &Path,
    f: impl FnOnce(fs::File) -> Result<(), csv::Error>,
) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f(file).map_err(|source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: f64, node: u32, f1: f64, bytes: u64) -> MetricsRecord {
        MetricsRecord {
            time,
            node,
            tp: 0,
            fp: 0,
            fn_: 0,
            f1,
            prototypes_trained: 0,
            bytes_sent: bytes,
            model_size: 0,
            mean_staleness: 0.0,
        }
    }

    #[test]
    fn stat_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(Stat::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn aggregate_averages_nodes_then_runs() {
        let a = vec![
            rec(1.0, 0, 0.2, 10),
            rec(1.0, 1, 0.4, 30),
            rec(2.0, 0, 0.6, 40),
            rec(2.0, 1, 0.8, 60),
        ];
        let b = vec![
            rec(1.0, 0, 0.5, 0),
            rec(1.0, 1, 0.5, 0),
            rec(2.0, 0, 1.0, 0),
            rec(2.0, 1, 1.0, 0),
        ];
        let rows = aggregate(&[&a, &b]);
        assert_eq!(rows.len(), 2);
        assert!((rows[0].f1.mean - 0.4).abs() < 1e-12);
        assert!((rows[1].f1.mean - 0.85).abs() < 1e-12);
        assert_eq!(rows[0].bytes_sent.mean, 10.0);
        assert_eq!(rows[1].runs, 2);
    }
}
