//! Experiment configuration: a flat `key = value` file whose keys can each be
//! overridden by a command-line flag of the same name (`noise_sigma` ↔
//! `--noise-sigma`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use neural_pde::experiment::{Benchmark, PipelineConfig, SolverOptions};
use neural_pde::nn::Peephole;
use neural_pde::pipeline::NormKind;
use neural_pde::solvers::{BurgersForm, TimeOrigin};
use neural_pde::training::TrainConfig;
use neural_pde::GridSpec;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SEED_ENV: &str = "NEURALPDE_SEED";

macro_rules! config_keys {
    ($($key:ident: $help:literal,)*) => {
        /// Every configuration key, in canonical order.
        pub const KEYS: &[&str] = &[$(stringify!($key)),*];

        /// Flag overrides for the configuration keys.
        #[derive(Debug, Clone, Default, Args)]
        pub struct KeyArgs {
            $(
                #[arg(long, help = $help, value_name = "VALUE")]
                pub $key: Option<String>,
            )*
        }

        impl KeyArgs {
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$key {
                        out.push((stringify!($key), v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

config_keys! {
    benchmark: "wave, heat2d, burgers2d, or external",
    data: "Series file (.nps) to read; defaults to <output_dir>/<benchmark>.nps",
    output_dir: "Directory for every written artifact [default: out]",
    scale: "Grid preset: full or reduced (26 points per axis for 2D benchmarks)",
    x_min: "Domain start along x",
    x_max: "Domain end along x",
    nx: "Grid points along x (also sets ny for 2D benchmarks unless ny is given)",
    y_min: "Domain start along y",
    y_max: "Domain end along y",
    ny: "Grid points along y",
    dt: "Time step",
    n_steps: "Number of stored time steps",
    include_initial: "Wave only: start the time axis at t = 0 instead of t = dt",
    burgers_as_written: "Use the literal second Burgers equation",
    n_in: "Input window length [default: 30]",
    m_out: "Prediction window length [default: 10]",
    stride: "Distance between window starts [default: 40]",
    train_fraction: "Share of windows used for training [default: 0.8]",
    seed: "Seed for splits, noise, initialization, and shuffling",
    normalizer: "identity, sigmoid, or minmax [default: identity]",
    noise_sigma: "Gaussian noise level on input windows [default: 0]",
    hidden: "LSTM hidden size [default: 48]",
    peephole: "diag or dense [default: diag]",
    epochs: "Training epochs [default: 20]",
    batch_size: "Samples per optimizer step [default: 4]",
    lr: "Adam learning rate [default: 0.001]",
    validation_fraction: "Share of the training windows held out for validation [default: 0.2]",
    clip_norm: "Optional gradient norm cap",
    timing: "Record wall-clock seconds in history.csv (true/false) [default: false]",
}

/// Merged raw key/value settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value, got '{}'", n + 1, raw.trim()))
            })?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("line {}: unknown key '{}'", n + 1, k.trim())));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Config file (if any) with flag overrides applied on top.
    pub fn resolve(config: Option<&Path>, flags: &KeyArgs) -> Result<Self, CliError> {
        let mut s = match config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        for (k, v) in flags.pairs() {
            s.values.insert(k.to_string(), v.to_string());
        }
        Ok(s)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    #[cfg(test)]
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical `key=value` text, one per line in key order.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("invalid value for {key}: '{v}'"))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(CliError::Config(format!("invalid value for {key}: '{v}' (expected true or false)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Builtin(Benchmark),
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub grid: Option<GridSpec>,
    pub solver: SolverOptions,
    pub pipeline: PipelineConfig,
    pub hidden: usize,
    pub peephole: Peephole,
    pub train: TrainConfig,
    pub timing: bool,
    pub output_dir: PathBuf,
    pub data: Option<PathBuf>,
    /// Where the seed came from: `config`, `env`, or `default`.
    pub seed_source: &'static str,
    /// Whether `n_in` was set explicitly rather than defaulted.
    pub n_in_explicit: bool,
}

impl ExperimentConfig {
    /// Interprets `settings`, reading `NEURALPDE_SEED` when no seed is set.
    pub fn from_settings(settings: &Settings, env_seed: Option<&str>) -> Result<Self, CliError> {
        let source = match settings.get("benchmark").unwrap_or("wave") {
            "external" => Source::External,
            name => Source::Builtin(Benchmark::parse(name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown benchmark '{name}' (expected wave, heat2d, burgers2d, or external)"
                ))
            })?),
        };

        let grid = match &source {
            Source::External => None,
            Source::Builtin(b) => Some(grid_for(*b, settings)?),
        };
        let solver = SolverOptions {
            burgers_form: if settings.flag("burgers_as_written")? {
                BurgersForm::AsWritten
            } else {
                BurgersForm::Coupled
            },
            time_origin: if settings.flag("include_initial")? {
                TimeOrigin::AtInitial
            } else {
                TimeOrigin::AfterInitial
            },
        };

        let (seed, seed_source) = match settings.parsed::<u64>("seed")? {
            Some(s) => (s, "config"),
            None => match env_seed {
                Some(v) => (
                    v.trim().parse().map_err(|_| {
                        CliError::Config(format!("invalid {SEED_ENV} value '{v}'"))
                    })?,
                    "env",
                ),
                None => (0, "default"),
            },
        };

        let base = PipelineConfig::default();
        let pipeline = PipelineConfig {
            n_in: settings.parsed("n_in")?.unwrap_or(base.n_in),
            m_out: settings.parsed("m_out")?.unwrap_or(base.m_out),
            stride: settings.parsed("stride")?.unwrap_or(base.stride),
            train_fraction: settings.parsed("train_fraction")?.unwrap_or(base.train_fraction),
            seed,
            noise_sigma: settings.parsed("noise_sigma")?.unwrap_or(base.noise_sigma),
        };
        if pipeline.n_in == 0 || pipeline.m_out == 0 || pipeline.stride == 0 {
            return Err(CliError::Config("n_in, m_out, and stride must be at least 1".into()));
        }
        if !(pipeline.train_fraction > 0.0 && pipeline.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                pipeline.train_fraction
            )));
        }

        let normalizer = match settings.get("normalizer") {
            None => NormKind::Identity,
            Some(v) => NormKind::parse(v).ok_or_else(|| {
                CliError::Config(format!("unknown normalizer '{v}' (expected identity, sigmoid, or minmax)"))
            })?,
        };
        let peephole = match settings.get("peephole") {
            None => Peephole::Diagonal,
            Some(v) => Peephole::parse(v)
                .ok_or_else(|| CliError::Config(format!("unknown peephole '{v}' (expected diag or dense)")))?,
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs: settings.parsed("epochs")?.unwrap_or(defaults.epochs),
            batch_size: settings.parsed("batch_size")?.unwrap_or(defaults.batch_size),
            lr: settings.parsed("lr")?.unwrap_or(defaults.lr),
            seed,
            validation_fraction: settings
                .parsed("validation_fraction")?
                .unwrap_or(defaults.validation_fraction),
            normalizer,
            noise_sigma: pipeline.noise_sigma,
            clip_norm: settings.parsed("clip_norm")?,
        };
        train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(pipeline.noise_sigma >= 0.0 && pipeline.noise_sigma.is_finite()) {
            return Err(CliError::Config("noise_sigma must be finite and non-negative".into()));
        }
        let hidden = settings.parsed("hidden")?.unwrap_or(48);
        if hidden == 0 {
            return Err(CliError::Config("hidden must be at least 1".into()));
        }

        Ok(Self {
            source,
            grid,
            solver,
            pipeline,
            hidden,
            peephole,
            train,
            timing: settings.flag("timing")?,
            output_dir: PathBuf::from(settings.get("output_dir").unwrap_or("out")),
            data: settings.get("data").map(PathBuf::from),
            seed_source,
            n_in_explicit: settings.get("n_in").is_some(),
        })
    }

    pub fn benchmark_name(&self) -> &'static str {
        match self.source {
            Source::Builtin(b) => b.as_str(),
            Source::External => "external",
        }
    }

    /// Dataset path: the `data` key, else the file `generate` writes.
    pub fn data_path(&self) -> Result<PathBuf, CliError> {
        match (&self.data, &self.source) {
            (Some(p), _) => Ok(p.clone()),
            (None, Source::Builtin(b)) => Ok(self.output_dir.join(format!("{}.nps", b.as_str()))),
            (None, Source::External) => {
                Err(CliError::Config("the external benchmark needs a data path".into()))
            }
        }
    }
}

fn grid_for(bench: Benchmark, s: &Settings) -> Result<GridSpec, CliError> {
    let mut g = match s.get("scale").unwrap_or("full") {
        "full" => bench.default_grid(),
        "reduced" => bench.reduced_grid(),
        other => return Err(CliError::Config(format!("unknown scale '{other}' (expected full or reduced)"))),
    };
    if let Some(v) = s.parsed("x_min")? {
        g.x_min = v;
    }
    if let Some(v) = s.parsed("x_max")? {
        g.x_max = v;
    }
    if let Some(v) = s.parsed::<usize>("nx")? {
        g.nx = v;
        if g.is_2d() {
            g.ny = v;
        }
    }
    if g.is_2d() {
        if let Some(v) = s.parsed("y_min")? {
            g.y_min = v;
        }
        if let Some(v) = s.parsed("y_max")? {
            g.y_max = v;
        }
        if let Some(v) = s.parsed("ny")? {
            g.ny = v;
        }
    } else if ["y_min", "y_max", "ny"].iter().any(|k| s.get(k).is_some()) {
        return Err(CliError::Config(format!("{} is one-dimensional; y keys do not apply", bench.as_str())));
    }
    if let Some(v) = s.parsed("dt")? {
        g.dt = v;
    }
    if let Some(v) = s.parsed("n_steps")? {
        g.n_steps = v;
    }
    g.validate_stencil().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(g)
}
