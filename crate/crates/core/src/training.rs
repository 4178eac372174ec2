//! Mini-batch training with best-validation checkpointing, evaluation on the
//! original data scale, and fixed-window or autoregressive prediction.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Matrix;
use crate::nn::{backward_acc, model_forward, mse_loss, AdamConfig, AdamState, ModelParams};
use crate::pipeline::{
    denormalize, normalize, partition, NormKind, Normalizer, Sample, SampleSet, SplitTag,
    Transform,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Share of the training split held out for validation.
    pub validation_fraction: f64,
    pub normalizer: NormKind,
    /// Input noise level; applied by the data preparation step, recorded
    /// here so a run's configuration is self-describing.
    pub noise_sigma: f64,
    /// Rescale each batch gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 4,
            lr: 1e-3,
            seed: 0,
            validation_fraction: 0.2,
            normalizer: NormKind::Identity,
            noise_sigma: 0.0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid learning rate {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter(format!(
                "validation_fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise_sigma must be non-negative".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch's batches (normalized scale).
    pub train_mse: f64,
    /// Validation loss after the epoch; `None` without a validation set.
    pub val_mse: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub test_mse: Option<f64>,
}

impl TrainHistory {
    /// `epoch,train_mse,val_mse,seconds` rows. Without `with_timing` the
    /// seconds column is written as 0 so identical runs give identical files.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut s = String::from("epoch,train_mse,val_mse,seconds\n");
        for r in &self.epochs {
            let val = r.val_mse.map_or_else(String::new, |v| format!("{v:e}"));
            let secs = if with_timing { r.seconds } else { 0.0 };
            writeln!(s, "{},{:e},{},{}", r.epoch, r.train_mse, val, secs).expect("write to String");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, with_timing: bool) -> Result<()> {
        fs::write(path, self.to_csv(with_timing))?;
        Ok(())
    }
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub normalizer: Normalizer,
    pub history: TrainHistory,
}

struct Prepared {
    input: Matrix,
    target: Matrix,
}

fn prepare(samples: &[&Sample], norm: &Normalizer) -> Result<Vec<Prepared>> {
    samples
        .iter()
        .map(|s| {
            Ok(Prepared {
                input: normalize(&s.input, norm)?,
                target: normalize(&s.target, norm)?,
            })
        })
        .collect()
}

fn mean_loss(model: &ModelParams, data: &[Prepared]) -> Result<f64> {
    let mut total = 0.0;
    for d in data {
        total += mse_loss(&model_forward(&d.input, model)?, &d.target)?;
    }
    Ok(total / data.len() as f64)
}

/// Trains on the train-tagged samples of `data`, carving a validation subset
/// out of them, and returns the parameters with the lowest validation loss.
pub fn train(model: ModelParams, data: &SampleSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(model, data, cfg, |_| {})
}

/// [`train`], calling `on_epoch` after every epoch.
pub fn train_observed(
    model: ModelParams,
    data: &SampleSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.check_shapes()?;
    let pool: Vec<&Sample> = if data.is_split() {
        data.train()
    } else {
        data.samples.iter().collect()
    };
    if pool.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }

    let (fit_set, val_set): (Vec<&Sample>, Vec<&Sample>) = if cfg.validation_fraction > 0.0 {
        let tags = partition(pool.len(), 1.0 - cfg.validation_fraction, cfg.seed ^ 0x5eed_0001);
        let mut fit = Vec::new();
        let mut val = Vec::new();
        for (s, t) in pool.iter().zip(tags) {
            match t {
                SplitTag::Train => fit.push(*s),
                SplitTag::Test => val.push(*s),
            }
        }
        (fit, val)
    } else {
        (pool.clone(), Vec::new())
    };
    if fit_set.is_empty() {
        return Err(Error::Data(format!(
            "validation carve left no samples to fit ({} training samples, fraction {})",
            pool.len(),
            cfg.validation_fraction
        )));
    }

    let normalizer = Normalizer::fit(
        cfg.normalizer,
        data.num_vars,
        pool.iter().flat_map(|s| [&s.input, &s.target]),
    )?;
    let fit_data = prepare(&fit_set, &normalizer)?;
    let val_data = prepare(&val_set, &normalizer)?;

    let mut params = model;
    let mut adam = AdamState::new(
        &params,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut grad = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..fit_data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams, usize)> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            grad.clear();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let d = &fit_data[i];
                let loss = backward_acc(&d.input, &d.target, &params, scale, &mut grad)
                    .map_err(|e| diverged(e, epoch, b))?;
                if !loss.is_finite() {
                    return Err(Error::Numeric {
                        location: format!("epoch {epoch}, batch {b}: loss {loss}"),
                    });
                }
                epoch_loss += loss;
            }
            if let Some(max_norm) = cfg.clip_norm {
                let norm = grad.l2_norm();
                if norm > max_norm {
                    let factor = max_norm / norm;
                    for block in grad.blocks_mut() {
                        block.iter_mut().for_each(|v| *v *= factor);
                    }
                }
            }
            adam.step(&mut params, &grad)?;
        }
        let train_mse = epoch_loss / fit_data.len() as f64;
        let val_mse = if val_data.is_empty() {
            None
        } else {
            Some(mean_loss(&params, &val_data).map_err(|e| diverged(e, epoch, usize::MAX))?)
        };
        let score = val_mse.unwrap_or(train_mse);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, params.clone(), epoch));
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    let (_, params, best_epoch) = best.expect("at least one epoch");
    history.best_epoch = best_epoch;
    Ok(TrainOutcome {
        params,
        normalizer,
        history,
    })
}

fn diverged(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numeric { location } => Error::Numeric {
            location: if batch == usize::MAX {
                format!("{location} (epoch {epoch}, validation)")
            } else {
                format!("{location} (epoch {epoch}, batch {batch})")
            },
        },
        other => other,
    }
}

/// Keeps raw network outputs inside the range the normalizer can invert.
fn clamp_for(norm: &Normalizer, m: &mut Matrix) {
    let v = norm.transforms.len();
    let block = m.rows() / v;
    for r in 0..m.rows() {
        if let Transform::Sigmoid = norm.transforms[r / block] {
            const EDGE: f64 = 1e-15;
            for x in m.row_mut(r) {
                *x = x.clamp(EDGE, 1.0 - EDGE);
            }
        }
    }
}

/// Normalize, run the network, and map predictions back to the data scale.
/// Outputs of sigmoid-normalized blocks are clamped into (0, 1) first.
pub fn predict(model: &ModelParams, x: &Matrix, norm: &Normalizer) -> Result<Matrix> {
    let mut out = model_forward(&normalize(x, norm)?, model)?;
    clamp_for(norm, &mut out);
    denormalize(&out, norm)
}

/// Mean over samples of the data-scale MSE between predictions and targets.
pub fn evaluate(model: &ModelParams, samples: &[&Sample], norm: &Normalizer) -> Result<f64> {
    Ok(evaluate_report(model, samples, norm)?.mse)
}

/// Detailed error breakdown of a model on a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mse: f64,
    pub per_variable_mse: Vec<f64>,
    pub max_abs_error: f64,
    /// MSE at each of the `m_out` predicted steps.
    pub per_step_mse: Vec<f64>,
    pub samples: usize,
}

pub fn evaluate_report(
    model: &ModelParams,
    samples: &[&Sample],
    norm: &Normalizer,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Data("evaluation needs at least one sample".into()));
    }
    let v = norm.transforms.len();
    let m = model.hyper.m_out;
    let mut mse = 0.0;
    let mut per_var = vec![0.0; v];
    let mut per_step = vec![0.0; m];
    let mut max_abs = 0.0f64;
    for s in samples {
        let pred = predict(model, &s.input, norm)?;
        if pred.shape() != s.target.shape() {
            return Err(Error::shape(
                "evaluate target",
                format!("{:?}", pred.shape()),
                format!("{:?}", s.target.shape()),
            ));
        }
        mse += mse_loss(&pred, &s.target)?;
        let rows = pred.rows();
        let block = rows / v;
        let mut var_sq = vec![0.0; v];
        let mut step_sq = vec![0.0; m];
        for r in 0..rows {
            for (c, (p, t)) in pred.row(r).iter().zip(s.target.row(r)).enumerate() {
                let e = p - t;
                var_sq[r / block] += e * e;
                step_sq[c] += e * e;
                max_abs = max_abs.max(e.abs());
            }
        }
        for (acc, sq) in per_var.iter_mut().zip(var_sq) {
            *acc += sq / (block * m) as f64;
        }
        for (acc, sq) in per_step.iter_mut().zip(step_sq) {
            *acc += sq / rows as f64;
        }
    }
    let n = samples.len() as f64;
    Ok(EvalReport {
        mse: mse / n,
        per_variable_mse: per_var.into_iter().map(|x| x / n).collect(),
        max_abs_error: max_abs,
        per_step_mse: per_step.into_iter().map(|x| x / n).collect(),
        samples: samples.len(),
    })
}

/// Autoregressive extension beyond one window: each predicted block is
/// appended and the input window slides forward by `m_out` columns.
pub fn rollout(
    model: &ModelParams,
    seed_window: &Matrix,
    horizon: usize,
    norm: &Normalizer,
) -> Result<Matrix> {
    let n_in = model.hyper.n_in;
    let m_out = model.hyper.m_out;
    if horizon < m_out {
        return Err(Error::InvalidParameter(format!(
            "rollout horizon {horizon} is shorter than one prediction block ({m_out})"
        )));
    }
    if seed_window.cols() != n_in {
        return Err(Error::shape("rollout seed window", n_in, seed_window.cols()));
    }
    let mut context = seed_window.clone();
    let mut produced: Option<Matrix> = None;
    let mut have = 0;
    while have < horizon {
        let block = predict(model, &context, norm)?;
        let joined = context.hstack(&block)?;
        context = joined.column_range(joined.cols() - n_in..joined.cols());
        produced = Some(match produced {
            None => block,
            Some(p) => p.hstack(&block)?,
        });
        have += m_out;
    }
    Ok(produced.expect("horizon >= m_out").column_range(0..horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Hyper};
    use crate::pipeline::{split, window};

    fn toy_set() -> SampleSet {
        let m = Matrix::from_fn(5, 200, |r, c| ((r as f64) * 0.7 + c as f64 * 0.05).sin() * 0.5);
        split(window(&m, 6, 2, 8).unwrap(), 0.8, 1).unwrap()
    }

    fn toy_model() -> ModelParams {
        init_params(Hyper::new(6, 2, 3), 2).unwrap()
    }

    #[test]
    fn no_training_samples_is_an_error() {
        let mut set = toy_set();
        set.split_assignment.iter_mut().for_each(|t| *t = SplitTag::Test);
        let err = train(toy_model(), &set, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(toy_model(), &toy_set(), &cfg).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let model = toy_model();
        let out = train(model.clone(), &toy_set(), &cfg).unwrap();
        assert_eq!(out.params, model);
        let first = out.history.epochs[0];
        for r in &out.history.epochs {
            assert!((r.train_mse - first.train_mse).abs() < 1e-12 * first.train_mse);
            assert_eq!(r.val_mse, first.val_mse);
        }
    }

    #[test]
    fn training_reduces_loss_and_is_reproducible() {
        let cfg = TrainConfig {
            epochs: 8,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        let a = train(toy_model(), &toy_set(), &cfg).unwrap();
        let b = train(toy_model(), &toy_set(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history.to_csv(false), b.history.to_csv(false));
        let h = &a.history.epochs;
        assert_eq!(h.len(), 8);
        assert!(h.last().unwrap().train_mse < h[0].train_mse);
        let best = h[a.history.best_epoch - 1].val_mse.unwrap();
        assert!(h.iter().all(|r| r.val_mse.unwrap() >= best));
    }

    #[test]
    fn history_csv_layout() {
        let h = TrainHistory {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_mse: 0.5,
                val_mse: Some(0.25),
                seconds: 1.5,
            }],
            best_epoch: 1,
            test_mse: None,
        };
        assert_eq!(h.to_csv(true), "epoch,train_mse,val_mse,seconds\n1,5e-1,2.5e-1,1.5\n");
        assert_eq!(h.to_csv(false), "epoch,train_mse,val_mse,seconds\n1,5e-1,2.5e-1,0\n");
    }

    #[test]
    fn perfect_predictions_score_zero() {
        // A zero network with dense bias equal to a constant target.
        let mut p = ModelParams::zeros(Hyper::new(4, 2, 2));
        p.dense_b = vec![0.3, 0.3];
        let sample = Sample {
            input: Matrix::zeros(3, 4),
            target: Matrix::from_fn(3, 2, |_, _| 0.3),
            origin_step: 0,
        };
        let norm = Normalizer::identity(1);
        let report = evaluate_report(&p, &[&sample], &norm).unwrap();
        assert_eq!(report.mse, 0.0);
        assert_eq!(report.max_abs_error, 0.0);
        assert!(evaluate(&p, &[], &norm).is_err());
    }

    #[test]
    fn identity_prediction_equals_forward() {
        let p = toy_model();
        let x = toy_set().samples[0].input.clone();
        assert_eq!(predict(&p, &x, &Normalizer::identity(1)).unwrap(), model_forward(&x, &p).unwrap());
        assert!(predict(&p, &Matrix::zeros(5, 7), &Normalizer::identity(1)).is_err());
    }

    #[test]
    fn rollout_chains_predictions() {
        let p = toy_model();
        let norm = Normalizer::identity(1);
        let seed = toy_set().samples[3].input.clone();
        let one = rollout(&p, &seed, 2, &norm).unwrap();
        assert_eq!(one, predict(&p, &seed, &norm).unwrap());
        let two = rollout(&p, &seed, 4, &norm).unwrap();
        let first = two.column_range(0..2);
        assert_eq!(first, one);
        let next_in = seed.column_range(2..6).hstack(&first).unwrap();
        assert_eq!(two.column_range(2..4), predict(&p, &next_in, &norm).unwrap());
        assert_eq!(rollout(&p, &seed, 5, &norm).unwrap().cols(), 5);
        assert!(rollout(&p, &seed, 1, &norm).is_err());
    }
}
