use crate::error::{Error, Result};
use crate::grid::Matrix;

/// Elementwise map applied to one variable block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// `1 / (1 + e^{-x})`, inverted by the logit.
    Sigmoid,
    /// Affine map of `[min, max]` onto `[0, 1]`.
    MinMax { min: f64, max: f64 },
}

impl Transform {
    #[inline]
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Sigmoid => {
                if x >= 0.0 {
                    // 1 - e/(1+e) rounds once at the end, so values near 1
                    // keep the best representable distance from 1.
                    let e = (-x).exp();
                    1.0 - e / (1.0 + e)
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Transform::MinMax { min, max } => (x - min) / (max - min),
        }
    }

    #[inline]
    pub fn inverse(self, y: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(y),
            Transform::Sigmoid => {
                if !(y > 0.0 && y < 1.0) {
                    return Err(Error::Data(format!(
                        "sigmoid-normalized value {y} lies outside (0, 1)"
                    )));
                }
                Ok(y.ln() - (-y).ln_1p())
            }
            Transform::MinMax { min, max } => Ok(min + y * (max - min)),
        }
    }
}

/// Normalization family chosen in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    #[default]
    Identity,
    Sigmoid,
    MinMax,
}

impl NormKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" | "none" => Some(NormKind::Identity),
            "sigmoid" => Some(NormKind::Sigmoid),
            "minmax" => Some(NormKind::MinMax),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Identity => "identity",
            NormKind::Sigmoid => "sigmoid",
            NormKind::MinMax => "minmax",
        }
    }
}

/// One transform per variable; a `(V·K) × N` matrix is split into `V` equal
/// row blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub transforms: Vec<Transform>,
}

impl Normalizer {
    pub fn identity(num_vars: usize) -> Self {
        Self {
            transforms: vec![Transform::Identity; num_vars],
        }
    }

    pub fn sigmoid(num_vars: usize) -> Self {
        Self {
            transforms: vec![Transform::Sigmoid; num_vars],
        }
    }

    /// Builds a normalizer of `kind`. Min-max bounds are taken per variable
    /// over every matrix in `data` (callers pass training data only).
    pub fn fit<'a>(
        kind: NormKind,
        num_vars: usize,
        data: impl IntoIterator<Item = &'a Matrix>,
    ) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidParameter("normalizer needs at least one variable".into()));
        }
        match kind {
            NormKind::Identity => Ok(Self::identity(num_vars)),
            NormKind::Sigmoid => Ok(Self::sigmoid(num_vars)),
            NormKind::MinMax => {
                let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); num_vars];
                for m in data {
                    let block = block_rows(m.rows(), num_vars)?;
                    for r in 0..m.rows() {
                        let b = &mut bounds[r / block];
                        for &v in m.row(r) {
                            b.0 = b.0.min(v);
                            b.1 = b.1.max(v);
                        }
                    }
                }
                let transforms = bounds
                    .into_iter()
                    .enumerate()
                    .map(|(v, (min, max))| {
                        if max > min {
                            Ok(Transform::MinMax { min, max })
                        } else {
                            Err(Error::Data(format!(
                                "min-max normalization of variable {v} needs max > min (got [{min}, {max}])"
                            )))
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(Self { transforms })
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        self.transforms.iter().all(|t| *t == Transform::Identity)
    }
}

fn block_rows(rows: usize, num_vars: usize) -> Result<usize> {
    if num_vars == 0 || rows % num_vars != 0 || rows == 0 {
        return Err(Error::shape(
            "normalizer variable blocks",
            format!("a multiple of {num_vars} rows"),
            rows,
        ));
    }
    Ok(rows / num_vars)
}

pub fn normalize(matrix: &Matrix, norm: &Normalizer) -> Result<Matrix> {
    let block = block_rows(matrix.rows(), norm.transforms.len())?;
    let mut out = matrix.clone();
    for r in 0..out.rows() {
        let t = norm.transforms[r / block];
        for v in out.row_mut(r) {
            *v = t.forward(*v);
        }
    }
    Ok(out)
}

pub fn denormalize(matrix: &Matrix, norm: &Normalizer) -> Result<Matrix> {
    let block = block_rows(matrix.rows(), norm.transforms.len())?;
    let mut out = matrix.clone();
    for r in 0..out.rows() {
        let t = norm.transforms[r / block];
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = t.inverse(*v).map_err(|e| match e {
                Error::Data(msg) => Error::Data(format!("{msg} (row {r}, column {c})")),
                other => other,
            })?;
        }
    }
    Ok(out)
}
