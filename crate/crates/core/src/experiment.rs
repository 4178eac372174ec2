//! Benchmark presets and the generate → window → split → train → evaluate
//! workflow shared by the CLI and the reproduction tests.

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec};
use crate::nn::{init_params, Hyper, ModelParams, Peephole};
use crate::pipeline::{add_gaussian_noise, split, window_pair, SampleSet};
use crate::solvers::{
    heat_initial_condition, solve_burgers_2d, solve_heat_2d, wave_exact_with, BurgersForm,
    TimeOrigin,
};
use crate::training::{evaluate, train_observed, EpochRecord, TrainConfig, TrainOutcome};

/// Diffusivity of the heat benchmark.
pub const HEAT_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Wave,
    Heat2d,
    Burgers2d,
}

impl Benchmark {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wave" => Some(Self::Wave),
            "heat2d" | "heat" => Some(Self::Heat2d),
            "burgers2d" | "burgers" => Some(Self::Burgers2d),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wave => "wave",
            Self::Heat2d => "heat2d",
            Self::Burgers2d => "burgers2d",
        }
    }

    /// Full-size grid: wave on 101 points of [0, 1] for 2000 steps of 1e-3;
    /// heat on 101² points of [0, 2]² for 1500 steps of 1e-4; Burgers on
    /// 101² points of [0, 1]² for 1000 steps of 1e-3.
    pub fn default_grid(self) -> GridSpec {
        match self {
            Self::Wave => GridSpec {
                x_min: 0.0,
                x_max: 1.0,
                nx: 101,
                y_min: 0.0,
                y_max: 0.0,
                ny: 0,
                dt: 1e-3,
                n_steps: 2000,
            },
            Self::Heat2d => square(0.0, 2.0, 101, 1e-4, 1500),
            Self::Burgers2d => square(0.0, 1.0, 101, 1e-3, 1000),
        }
    }

    /// The same problem on a 26-point-per-axis grid, keeping domain, time
    /// step, and horizon. The wave grid is already small and is unchanged.
    pub fn reduced_grid(self) -> GridSpec {
        let full = self.default_grid();
        match self {
            Self::Wave => full,
            _ => GridSpec {
                nx: 26,
                ny: 26,
                ..full
            },
        }
    }

    pub fn num_vars(self) -> usize {
        match self {
            Self::Burgers2d => 2,
            _ => 1,
        }
    }
}

fn square(lo: f64, hi: f64, n: usize, dt: f64, n_steps: usize) -> GridSpec {
    GridSpec {
        x_min: lo,
        x_max: hi,
        nx: n,
        y_min: lo,
        y_max: hi,
        ny: n,
        dt,
        n_steps,
    }
}

/// Solver options that are not part of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub burgers_form: BurgersForm,
    pub time_origin: TimeOrigin,
}

/// Ground-truth series of `bench` on `grid`.
pub fn generate(bench: Benchmark, grid: &GridSpec, opts: SolverOptions) -> Result<FieldSeries> {
    match bench {
        Benchmark::Wave => wave_exact_with(grid, opts.time_origin),
        Benchmark::Heat2d => {
            grid.validate_stencil()?;
            solve_heat_2d(&heat_initial_condition(grid), grid, HEAT_ALPHA)
        }
        Benchmark::Burgers2d => solve_burgers_2d(grid, opts.burgers_form),
    }
}

/// Windowing, splitting, and noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub n_in: usize,
    pub m_out: usize,
    pub stride: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to input windows only.
    pub noise_sigma: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_in: 30,
            m_out: 10,
            stride: 40,
            train_fraction: 0.8,
            seed: 0,
            noise_sigma: 0.0,
        }
    }
}

/// Seed of the noise stream, kept apart from the split and training streams.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x6e6f_6973_6500_0000
}

/// Windows `series` into a split sample set. Noise, if any, is drawn once
/// over the whole matrix and enters the input windows; targets stay clean.
pub fn prepare_samples(series: &FieldSeries, cfg: &PipelineConfig) -> Result<SampleSet> {
    let noisy = add_gaussian_noise(&series.data, cfg.noise_sigma, noise_seed(cfg.seed))?;
    let mut set = window_pair(&noisy, &series.data, cfg.n_in, cfg.m_out, cfg.stride)?;
    set.num_vars = series.variables.len();
    split(set, cfg.train_fraction, cfg.seed)
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: TrainOutcome,
    pub test_mse: f64,
    pub samples: SampleSet,
}

/// Initializes a model, trains it on the train split, and scores the
/// returned parameters on the test split.
pub fn run(
    series: &FieldSeries,
    pipeline: &PipelineConfig,
    hidden: usize,
    peephole: Peephole,
    train_cfg: &TrainConfig,
) -> Result<RunReport> {
    let samples = prepare_samples(series, pipeline)?;
    let model = initial_model(pipeline, hidden, peephole, train_cfg.seed)?;
    run_with(model, samples, train_cfg)
}

/// Freshly initialized model sized for `pipeline`'s windows.
pub fn initial_model(
    pipeline: &PipelineConfig,
    hidden: usize,
    peephole: Peephole,
    seed: u64,
) -> Result<ModelParams> {
    let hyper = Hyper {
        peephole,
        ..Hyper::new(pipeline.n_in, pipeline.m_out, hidden)
    };
    init_params(hyper, seed)
}

pub fn run_with(model: ModelParams, samples: SampleSet, train_cfg: &TrainConfig) -> Result<RunReport> {
    run_observed(model, samples, train_cfg, |_| {})
}

/// [`run_with`], reporting each finished epoch to `on_epoch`.
pub fn run_observed(
    model: ModelParams,
    samples: SampleSet,
    train_cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<RunReport> {
    let test = samples.test();
    if test.is_empty() {
        return Err(Error::Data("the split left no test samples".into()));
    }
    let mut outcome = train_observed(model, &samples, train_cfg, on_epoch)?;
    let test_mse = evaluate(&outcome.params, &test, &outcome.normalizer)?;
    outcome.history.test_mse = Some(test_mse);
    Ok(RunReport {
        outcome,
        test_mse,
        samples,
    })
}
