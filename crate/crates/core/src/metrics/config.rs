use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::compress::CompressionConfig;
use crate::data::{DataSource, DatasetSpec, StartIndex};
use crate::metrics::F1Mode;
use crate::node::{NodeConfig, QueuePolicy, ShareParams};
use crate::prototype::IlvqParams;
use crate::similarity::KdeConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Base,
    Jsd,
    LimitQueue,
    Clustering,
}

/// Feature switches a scenario turns on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioFlags {
    pub gate: bool,
    pub queue: QueuePolicy,
    pub compress_on_queue: bool,
    pub compress_on_share: bool,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Base,
        Scenario::Jsd,
        Scenario::LimitQueue,
        Scenario::Clustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Base => "base",
            Scenario::Jsd => "jsd",
            Scenario::LimitQueue => "limit-queue",
            Scenario::Clustering => "clustering",
        }
    }

    /// Each scenario adds to the previous one.
    pub fn flags(self) -> ScenarioFlags {
        let mut f = ScenarioFlags {
            gate: false,
            queue: QueuePolicy::default(),
            compress_on_queue: false,
            compress_on_share: false,
        };
        if self == Scenario::Base {
            return f;
        }
        f.gate = true;
        if self == Scenario::Jsd {
            return f;
        }
        f.queue.max_prototypes = Some(10_000);
        if self == Scenario::LimitQueue {
            return f;
        }
        f.queue.max_sets = Some(1);
        f.compress_on_queue = true;
        f.compress_on_share = true;
        f
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("expected one of base, jsd, limit-queue, clustering; got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_nodes: usize,
    pub s: usize,
    pub t_share: f64,
    pub th_jsd: f64,
    pub th_prot: usize,
    pub queue: QueuePolicy,
    pub gate: bool,
    pub compress_on_queue: bool,
    pub compress_on_share: bool,
    /// Sensor arrival rate per node, samples/s.
    pub lambda_s: f64,
    /// Service rate of a node's learner, operations/s.
    pub mu: f64,
    /// Transport delay; kept at zero for the analysed model.
    pub latency: f64,
    pub dataset: DatasetSpec,
    pub horizon: f64,
    pub seeds: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    pub metrics_period: f64,
    pub kde: KdeConfig,
    pub ilvq: IlvqParams,
    pub compression: CompressionConfig,
    /// Overrides the label-set based choice.
    pub f1_mode: Option<F1Mode>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_scenario(Scenario::Base)
    }
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        let f = scenario.flags();
        Self {
            scenario,
            n_nodes: 5,
            s: 4,
            t_share: 1.0,
            th_jsd: 0.05,
            th_prot: 500,
            queue: f.queue,
            gate: f.gate,
            compress_on_queue: f.compress_on_queue,
            compress_on_share: f.compress_on_share,
            lambda_s: 10.0,
            mu: 200.0,
            latency: 0.0,
            dataset: DatasetSpec::default(),
            horizon: 100.0,
            seeds: 50,
            seed_base: 0,
            out_dir: PathBuf::from("out"),
            metrics_period: 1.0,
            kde: KdeConfig::default(),
            ilvq: IlvqParams::default(),
            compression: CompressionConfig::default(),
            f1_mode: None,
        }
    }

    /// Switches scenario and resets the flag bundle to its defaults.
    pub fn set_scenario(&mut self, scenario: Scenario) {
        let f = scenario.flags();
        self.scenario = scenario;
        self.queue = f.queue;
        self.gate = f.gate;
        self.compress_on_queue = f.compress_on_queue;
        self.compress_on_share = f.compress_on_share;
    }

    pub fn compression_enabled(&self) -> bool {
        self.compress_on_queue || self.compress_on_share
    }

    /// Every violated constraint, or `Ok`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if self.n_nodes < 1 {
            v.push("n must be at least 1".to_string());
        }
        if self.n_nodes >= 1 && self.s > self.n_nodes - 1 {
            v.push(format!(
                "s = {} exceeds n - 1 = {}",
                self.s,
                self.n_nodes - 1
            ));
        }
        if !(0.0..=1.0).contains(&self.t_share) {
            v.push(format!("t-share = {} is not a probability", self.t_share));
        }
        if !(self.th_jsd >= 0.0 && self.th_jsd <= 1.0) {
            v.push(format!("th-jsd = {} must lie in [0, 1]", self.th_jsd));
        }
        if self.compression_enabled() && self.th_prot < 2 {
            v.push(format!("th-prot = {} must be at least 2", self.th_prot));
        }
        if !(self.lambda_s > 0.0 && self.lambda_s.is_finite()) {
            v.push(format!("lambda-s = {} must be positive", self.lambda_s));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            v.push(format!("mu = {} must be positive", self.mu));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            v.push(format!("latency = {} must be non-negative", self.latency));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            v.push(format!("horizon = {} must be positive", self.horizon));
        }
        if !(self.metrics_period > 0.0 && self.metrics_period.is_finite()) {
            v.push(format!(
                "metrics-period = {} must be positive",
                self.metrics_period
            ));
        }
        if self.seeds == 0 {
            v.push("seeds must be at least 1".to_string());
        }
        if self.queue.max_sets == Some(0) {
            v.push("queue-max-sets must be at least 1".to_string());
        }
        if self.queue.max_prototypes == Some(0) {
            v.push("queue-max-protos must be at least 1".to_string());
        }
        if let Err(e) = self.dataset.validate(self.n_nodes.max(1)) {
            v.push(e.to_string());
        }
        if let Err(e) = self.compression_config().validate() {
            v.push(e.to_string());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn compression_config(&self) -> CompressionConfig {
        CompressionConfig {
            limit_size: self.th_prot,
            ..self.compression.clone()
        }
    }

    pub fn node_config(&self, f1_mode: F1Mode) -> NodeConfig {
        NodeConfig {
            n_nodes: self.n_nodes,
            share: ShareParams {
                s: self.s,
                t_share: self.t_share,
                th_jsd: self.th_jsd,
                gate: self.gate,
            },
            queue: self.queue,
            kde: self.kde,
            ilvq: self.ilvq,
            compression: self
                .compression_enabled()
                .then(|| self.compression_config()),
            compress_on_queue: self.compress_on_queue,
            compress_on_share: self.compress_on_share,
            f1_mode: self.f1_mode.unwrap_or(f1_mode),
        }
    }

    /// Applies one `key = value` setting. Keys match the CLI flag names
    /// without the leading dashes.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = |message: String| ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            message,
        };
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        fn limit(v: &str) -> Result<Option<usize>, String> {
            match v {
                "none" | "unbounded" => Ok(None),
                _ => num(v).map(Some),
            }
        }
        fn flag(v: &str) -> Result<bool, String> {
            match v {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err("expected true or false".into()),
            }
        }
        match key {
            "scenario" => self.set_scenario(value.parse().map_err(bad)?),
            "n" => self.n_nodes = num(value).map_err(bad)?,
            "s" => self.s = num(value).map_err(bad)?,
            "t-share" => self.t_share = num(value).map_err(bad)?,
            "th-jsd" => self.th_jsd = num(value).map_err(bad)?,
            "th-prot" => self.th_prot = num(value).map_err(bad)?,
            "queue-max-protos" => self.queue.max_prototypes = limit(value).map_err(bad)?,
            "queue-max-sets" => self.queue.max_sets = limit(value).map_err(bad)?,
            "lambda-s" => self.lambda_s = num(value).map_err(bad)?,
            "mu" => self.mu = num(value).map_err(bad)?,
            "latency" => self.latency = num(value).map_err(bad)?,
            "dataset" => {
                self.dataset.source = if value == "synthetic" {
                    DataSource::Synthetic { length: None }
                } else {
                    let label_column = match &self.dataset.source {
                        DataSource::Csv { label_column, .. } => *label_column,
                        DataSource::Synthetic { .. } => None,
                    };
                    DataSource::Csv {
                        path: PathBuf::from(value),
                        label_column,
                    }
                }
            }
            "synthetic-length" => {
                let len = num(value).map_err(bad)?;
                match &mut self.dataset.source {
                    DataSource::Synthetic { length } => *length = Some(len),
                    DataSource::Csv { .. } => return Err(bad("dataset is not synthetic".into())),
                }
            }
            "label-column" => {
                let col = num(value).map_err(bad)?;
                match &mut self.dataset.source {
                    DataSource::Csv { label_column, .. } => *label_column = Some(col),
                    DataSource::Synthetic { .. } => {
                        return Err(bad("dataset is not a CSV file".into()))
                    }
                }
            }
            "d-size" => self.dataset.d_size = num(value).map_err(bad)?,
            "r-start" => self.dataset.start = StartIndex::Fixed(num(value).map_err(bad)?),
            "r-random" => {
                if flag(value).map_err(bad)? {
                    self.dataset.start = StartIndex::Random;
                } else if self.dataset.start == StartIndex::Random {
                    self.dataset.start = StartIndex::Fixed(0);
                }
            }
            "normalize" => self.dataset.normalize = flag(value).map_err(bad)?,
            "gate" => self.gate = flag(value).map_err(bad)?,
            "compress-on-queue" => self.compress_on_queue = flag(value).map_err(bad)?,
            "compress-on-share" => self.compress_on_share = flag(value).map_err(bad)?,
            "horizon" => self.horizon = num(value).map_err(bad)?,
            "seeds" => self.seeds = num(value).map_err(bad)?,
            "seed-base" => self.seed_base = num(value).map_err(bad)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "metrics-period" => self.metrics_period = num(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a list of settings, `scenario` first so explicit flag
    /// overrides survive its bundle.
    pub fn apply_all<'a, I>(&mut self, pairs: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<_> = pairs.into_iter().collect();
        for (k, v) in pairs.iter().filter(|(k, _)| *k == "scenario") {
            self.apply(k, v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| *k != "scenario") {
            self.apply(k, v)?;
        }
        Ok(())
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundles_are_cumulative() {
        let b = Scenario::Base.flags();
        assert!(!b.gate && b.queue == QueuePolicy::default() && !b.compress_on_queue);
        let j = Scenario::Jsd.flags();
        assert!(j.gate && j.queue == QueuePolicy::default());
        let l = Scenario::LimitQueue.flags();
        assert!(l.gate && l.queue.max_prototypes == Some(10_000) && l.queue.max_sets.is_none());
        let c = Scenario::Clustering.flags();
        assert!(c.gate && c.queue.max_prototypes == Some(10_000) && c.queue.max_sets == Some(1));
        assert!(c.compress_on_queue && c.compress_on_share);
    }

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("clusters".parse::<Scenario>().is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut c = ExperimentConfig {
            s: 9,
            t_share: 1.5,
            mu: 0.0,
            ..Default::default()
        };
        match c.validate() {
            Err(ConfigError::Invalid(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
        c = ExperimentConfig::default();
        c.s = 5;
        assert!(c.validate().is_err());
        c.s = 4;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn text_config() {
        let text = "# comment\nth-prot = 50\nscenario = clustering\n\nqueue-max-sets = none  # unbounded\n";
        let pairs = parse_config_text(text).unwrap();
        let mut c = ExperimentConfig::default();
        c.apply_all(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
            .unwrap();
        assert_eq!(c.scenario, Scenario::Clustering);
        assert_eq!(c.th_prot, 50);
        assert_eq!(c.queue.max_sets, None);
        assert_eq!(c.queue.max_prototypes, Some(10_000));
        assert_eq!(c.compression_config().limit_size, 50);
        assert!(matches!(
            parse_config_text("novalue"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            c.apply("bogus", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            c.apply("n", "five"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn dataset_keys() {
        let mut c = ExperimentConfig::default();
        c.apply("dataset", "data/elec.csv").unwrap();
        c.apply("label-column", "0").unwrap();
        c.apply("r-random", "true").unwrap();
        assert_eq!(
            c.dataset.source,
            DataSource::Csv {
                path: "data/elec.csv".into(),
                label_column: Some(0)
            }
        );
        assert_eq!(c.dataset.start, StartIndex::Random);
    }
}
