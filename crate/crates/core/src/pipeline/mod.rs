//! Turns field series into training data: grid flattening, the `(V·K) × N`
//! matrix, `(n_in, m_out)` windows, seeded train/test splits, normalization,
//! input noise, and the `.nps` interchange format.

mod format;
mod normalize;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, FieldSnapshot, GridSpec, Matrix};

pub use format::{
    read_series, read_series_from, write_series, write_series_csv, write_series_to, SERIES_MAGIC,
};
pub use normalize::{denormalize, normalize, NormKind, Normalizer, Transform};

/// Row-major flattening: point `(i, j)` maps to index `i·ny + j`.
pub fn flatten_2d(snapshot: &FieldSnapshot) -> Vec<f64> {
    snapshot.values().to_vec()
}

/// Inverse of [`flatten_2d`] for the points of `grid`.
pub fn unflatten_2d(values: &[f64], grid: &GridSpec, name: &str) -> Result<FieldSnapshot> {
    let k = grid.num_points();
    if values.len() != k {
        return Err(Error::shape(
            "unflatten_2d",
            format!("{k} values for a {}x{} grid", grid.nx, grid.ny_eff()),
            values.len(),
        ));
    }
    FieldSnapshot::new(grid.nx, grid.ny_eff(), values.to_vec(), name)
}

/// The `(V·K) × N` data matrix of a series: row `v·K + p` is the time series
/// of variable `v` at flattened point `p`.
pub fn assemble_matrix(series: &FieldSeries) -> Matrix {
    series.data.clone()
}

/// One training pair: `n_in` consecutive columns in, the next `m_out` out.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Matrix,
    pub target: Matrix,
    /// Column of the series where the input window starts.
    pub origin_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Train,
    Test,
}

/// Windowed samples plus, once split, a train/test tag per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    /// Empty until [`split`] assigns tags.
    pub split_assignment: Vec<SplitTag>,
    pub rng_seed: Option<u64>,
    /// Number of stacked variable blocks in every sample's rows.
    pub num_vars: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_split(&self) -> bool {
        self.split_assignment.len() == self.samples.len() && !self.samples.is_empty()
    }

    fn tagged(&self, tag: SplitTag) -> Vec<&Sample> {
        self.samples
            .iter()
            .zip(&self.split_assignment)
            .filter(|(_, t)| **t == tag)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn train(&self) -> Vec<&Sample> {
        self.tagged(SplitTag::Train)
    }

    pub fn test(&self) -> Vec<&Sample> {
        self.tagged(SplitTag::Test)
    }
}

/// Number of windows [`window`] produces for `n` columns.
pub fn window_count(n: usize, n_in: usize, m_out: usize, stride: usize) -> usize {
    if n < n_in + m_out || stride == 0 {
        0
    } else {
        (n - n_in - m_out) / stride + 1
    }
}

/// Cuts `matrix` into samples whose input covers columns
/// `[s·stride, s·stride + n_in)` and whose target covers the following
/// `m_out` columns.
pub fn window(matrix: &Matrix, n_in: usize, m_out: usize, stride: usize) -> Result<SampleSet> {
    window_pair(matrix, matrix, n_in, m_out, stride)
}

/// Windows a series, keeping its variable count.
pub fn window_series(
    series: &FieldSeries,
    n_in: usize,
    m_out: usize,
    stride: usize,
) -> Result<SampleSet> {
    let mut set = window(&series.data, n_in, m_out, stride)?;
    set.num_vars = series.variables.len();
    Ok(set)
}

/// Like [`window`], but input windows are cut from `inputs` and targets from
/// `targets` (e.g. a noisy copy and the clean original).
pub fn window_pair(
    inputs: &Matrix,
    targets: &Matrix,
    n_in: usize,
    m_out: usize,
    stride: usize,
) -> Result<SampleSet> {
    if inputs.shape() != targets.shape() {
        return Err(Error::shape(
            "window_pair",
            format!("{:?}", targets.shape()),
            format!("{:?}", inputs.shape()),
        ));
    }
    let matrix = targets;
    if n_in == 0 || m_out == 0 || stride == 0 {
        return Err(Error::InvalidParameter(format!(
            "window sizes must be positive (n_in={n_in}, m_out={m_out}, stride={stride})"
        )));
    }
    let n = matrix.cols();
    if n < n_in + m_out {
        return Err(Error::Data(format!(
            "series has {n} timesteps; a window needs {}",
            n_in + m_out
        )));
    }
    let count = window_count(n, n_in, m_out, stride);
    let samples = (0..count)
        .map(|s| {
            let start = s * stride;
            Sample {
                input: inputs.column_range(start..start + n_in),
                target: matrix.column_range(start + n_in..start + n_in + m_out),
                origin_step: start,
            }
        })
        .collect();
    Ok(SampleSet {
        samples,
        split_assignment: Vec::new(),
        rng_seed: None,
        num_vars: 1,
    })
}

/// Seeded random partition: the first `⌊n·train_fraction⌋` samples of a
/// shuffled order are tagged train, the rest test.
pub fn split(set: SampleSet, train_fraction: f64, seed: u64) -> Result<SampleSet> {
    if set.samples.is_empty() {
        return Err(Error::Data("cannot split an empty sample set".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = set.samples.len();
    let tags = partition(n, train_fraction, seed);
    Ok(SampleSet {
        split_assignment: tags,
        rng_seed: Some(seed),
        ..set
    })
}

/// Tags `n` items, `⌊n·fraction⌋` of them `Train`, in seeded random order.
pub fn partition(n: usize, fraction: f64, seed: u64) -> Vec<SplitTag> {
    // The small offset keeps products such as 0.57·100 from flooring low.
    let n_train = ((n as f64 * fraction) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut tags = vec![SplitTag::Test; n];
    for &idx in &order[..n_train.min(n)] {
        tags[idx] = SplitTag::Train;
    }
    tags
}

/// Adds i.i.d. `N(0, σ²)` noise to every entry, reproducibly under `seed`.
pub fn add_gaussian_noise(matrix: &Matrix, sigma: f64, seed: u64) -> Result<Matrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(matrix.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = matrix.clone();
    for v in out.as_mut_slice() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_is_row_major() {
        let s = FieldSnapshot::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], "u").unwrap();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 3.0);
        assert_eq!(flatten_2d(&s), vec![1.0, 2.0, 3.0, 4.0]);
        let g = GridSpec::plane(0.0, 1.0, 101, 0.0, 1.0, 101, 0.1, 1).unwrap();
        assert_eq!(flatten_2d(&FieldSnapshot::filled(&g, 0.0, "u")).len(), 10201);
    }

    #[test]
    fn unflatten_inverts_and_checks_length() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 1.0,
            nx: 2,
            y_min: 0.0,
            y_max: 1.0,
            ny: 2,
            dt: 0.1,
            n_steps: 1,
        };
        let s = unflatten_2d(&[1.0, 2.0, 3.0, 4.0], &g, "u").unwrap();
        assert_eq!((s.get(0, 0), s.get(0, 1), s.get(1, 0), s.get(1, 1)), (1.0, 2.0, 3.0, 4.0));
        assert!(unflatten_2d(&[1.0; 5], &g, "u").is_err());

        let heat = GridSpec::plane(0.0, 2.0, 26, 0.0, 2.0, 26, 1e-4, 1).unwrap();
        let ic = crate::solvers::heat_initial_condition(&heat);
        assert_eq!(unflatten_2d(&flatten_2d(&ic), &heat, "u").unwrap(), ic);
    }

    #[test]
    fn assembled_columns_are_flattened_snapshots() {
        let g = GridSpec::plane(0.0, 1.0, 6, 0.0, 1.0, 6, 1e-3, 5).unwrap();
        let s = crate::solvers::solve_burgers_2d(&g, Default::default()).unwrap();
        let m = assemble_matrix(&s);
        assert_eq!(m.shape(), (72, 5));
        for n in 0..5 {
            let col = m.column(n);
            assert_eq!(flatten_2d(&s.snapshot(0, n)), col[..36]);
            assert_eq!(flatten_2d(&s.snapshot(1, n)), col[36..]);
        }
    }

    #[test]
    fn single_point_series_is_its_own_row() {
        let g = GridSpec {
            x_min: 0.0,
            x_max: 0.0,
            nx: 1,
            y_min: 0.0,
            y_max: 0.0,
            ny: 0,
            dt: 0.5,
            n_steps: 4,
        };
        let m = Matrix::from_vec(1, 4, vec![3.0, 1.0, 4.0, 1.5]).unwrap();
        let s = FieldSeries::new(g, vec!["u".into()], m.clone()).unwrap();
        assert_eq!(assemble_matrix(&s), m);
    }

    #[test]
    fn window_counts() {
        assert_eq!(window(&Matrix::zeros(3, 2000), 30, 10, 40).unwrap().len(), 50);
        let one = window(&Matrix::from_fn(2, 40, |r, c| (r * 100 + c) as f64), 30, 10, 40).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.samples[0].input.row(1)[0], 100.0);
        assert_eq!(one.samples[0].target.row(1)[9], 139.0);
        assert!(window(&Matrix::zeros(3, 39), 30, 10, 40).is_err());
        assert_eq!(window(&Matrix::zeros(1, 2000), 30, 10, 1).unwrap().len(), 1961);
    }

    #[test]
    fn windows_chain_back_to_the_series() {
        let m = Matrix::from_fn(4, 130, |r, c| (r as f64).sin() + c as f64 * 0.01);
        let set = window(&m, 30, 10, 40).unwrap();
        assert_eq!(set.len(), 3);
        let mut rebuilt = set.samples[0].input.hstack(&set.samples[0].target).unwrap();
        for s in &set.samples[1..] {
            rebuilt = rebuilt.hstack(&s.input).unwrap().hstack(&s.target).unwrap();
        }
        assert_eq!(rebuilt, m.column_range(0..120));
    }

    #[test]
    fn noisy_inputs_clean_targets() {
        let clean = Matrix::from_fn(3, 80, |r, c| (r + c) as f64);
        let noisy = add_gaussian_noise(&clean, 0.1, 4).unwrap();
        let set = window_pair(&noisy, &clean, 30, 10, 40).unwrap();
        assert_eq!(set.samples[1].input, noisy.column_range(40..70));
        assert_eq!(set.samples[1].target, clean.column_range(70..80));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let set = window(&Matrix::zeros(1, 2000), 30, 10, 40).unwrap();
        let a = split(set.clone(), 0.8, 7).unwrap();
        assert_eq!((a.train().len(), a.test().len()), (40, 10));
        let b = split(set.clone(), 0.8, 7).unwrap();
        assert_eq!(a.split_assignment, b.split_assignment);
        let c = split(set, 0.8, 8).unwrap();
        assert_ne!(a.split_assignment, c.split_assignment);

        let burgers = window(&Matrix::zeros(1, 31 * 40), 30, 10, 40).unwrap();
        let s = split(burgers, 0.8, 0).unwrap();
        assert_eq!((s.train().len(), s.test().len()), (24, 7));
    }

    #[test]
    fn split_errors() {
        let empty = SampleSet {
            samples: vec![],
            split_assignment: vec![],
            rng_seed: None,
            num_vars: 1,
        };
        assert!(split(empty, 0.8, 0).is_err());
        let set = window(&Matrix::zeros(1, 80), 30, 10, 40).unwrap();
        assert!(split(set.clone(), 1.0, 0).is_err());
        assert!(split(set, 0.0, 0).is_err());
    }

    #[test]
    fn noise_statistics_and_seeding() {
        let clean = Matrix::from_fn(10201, 30, |r, c| ((r + c) as f64).cos());
        assert_eq!(add_gaussian_noise(&clean, 0.0, 1).unwrap(), clean);
        let sigma = 0.01;
        let noisy = add_gaussian_noise(&clean, sigma, 1).unwrap();
        let n = clean.as_slice().len() as f64;
        let mean: f64 = noisy
            .as_slice()
            .iter()
            .zip(clean.as_slice())
            .map(|(a, b)| a - b)
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 4.0 * sigma / n.sqrt(), "{mean}");
        assert_eq!(noisy, add_gaussian_noise(&clean, sigma, 1).unwrap());
        assert_ne!(noisy, add_gaussian_noise(&clean, sigma, 2).unwrap());
        assert!(add_gaussian_noise(&clean, -1.0, 1).is_err());
    }
}
