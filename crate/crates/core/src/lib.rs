//! Neural-PDE: learn time-dependent PDE dynamics from mesh-grid time series
//! with a bidirectional LSTM encoder-decoder.
//!
//! The crate covers the whole pipeline:
//!
//! - [`solvers`]: ground-truth generators for the wave, heat, and inviscid
//!   Burgers benchmarks (closed form and explicit finite differences).
//! - [`pipeline`]: grid flattening, the `(V·K) × N` data matrix, windowing,
//!   splitting, normalization, noise, and the `.nps` interchange format.
//! - [`nn`]: the peephole LSTM encoder-decoder with exact backpropagation
//!   through time, Adam, and `.npm` model files.
//! - [`training`]: epochs, validation, evaluation, prediction, and rollout.
//! - [`experiment`]: benchmark presets and the end-to-end workflow.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod nn;
pub mod pipeline;
pub mod solvers;
pub mod training;

pub use error::{Error, Result};
pub use grid::{FieldSeries, FieldSnapshot, GridSpec, Matrix};
