//! Encoder-decoder network: a bidirectional LSTM encoder over the grid-point
//! axis, a bidirectional LSTM decoder over the latent sequence, and a linear
//! head mapping each decoder state to `m_out` future values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Matrix;

use super::lstm::{
    backprop_direction, run_direction, DirectionTrace, LstmCellParams, Peephole, GATE_FORGET,
};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    /// Input timesteps per row.
    pub n_in: usize,
    /// Predicted timesteps per row.
    pub m_out: usize,
    /// Hidden size of every LSTM direction.
    pub hidden: usize,
    pub peephole: Peephole,
}

impl Hyper {
    pub fn new(n_in: usize, m_out: usize, hidden: usize) -> Self {
        Self {
            n_in,
            m_out,
            hidden,
            peephole: Peephole::Diagonal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.m_out == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter(format!(
                "n_in, m_out and hidden must be positive (got {}, {}, {})",
                self.n_in, self.m_out, self.hidden
            )));
        }
        Ok(())
    }
}

impl Default for Hyper {
    fn default() -> Self {
        Self::new(30, 10, 48)
    }
}

/// Closed-form parameter count of the full model.
pub fn param_count(hyper: &Hyper) -> usize {
    let d = hyper.hidden;
    2 * LstmCellParams::count(hyper.n_in, d, hyper.peephole)
        + 2 * LstmCellParams::count(2 * d, d, hyper.peephole)
        + 2 * d * hyper.m_out
        + hyper.m_out
}

/// All trainable weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub encoder_fwd: LstmCellParams,
    pub encoder_bwd: LstmCellParams,
    pub decoder_fwd: LstmCellParams,
    pub decoder_bwd: LstmCellParams,
    /// `2d × m_out`, row-major.
    pub dense_w: Vec<f64>,
    pub dense_b: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(hyper: Hyper) -> Self {
        let d = hyper.hidden;
        let cell = |n_in| LstmCellParams::zeros(n_in, d, hyper.peephole);
        Self {
            hyper,
            encoder_fwd: cell(hyper.n_in),
            encoder_bwd: cell(hyper.n_in),
            decoder_fwd: cell(2 * d),
            decoder_bwd: cell(2 * d),
            dense_w: vec![0.0; 2 * d * hyper.m_out],
            dense_b: vec![0.0; hyper.m_out],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hyper)
    }

    /// Parameter blocks in the canonical flat order: encoder forward,
    /// encoder backward, decoder forward, decoder backward, dense weight,
    /// dense bias.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(62);
        for cell in self.cells() {
            out.extend(cell.blocks());
        }
        out.push(&self.dense_w);
        out.push(&self.dense_b);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(62);
        out.extend(self.encoder_fwd.blocks_mut());
        out.extend(self.encoder_bwd.blocks_mut());
        out.extend(self.decoder_fwd.blocks_mut());
        out.extend(self.decoder_bwd.blocks_mut());
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out
    }

    pub fn cells(&self) -> [&LstmCellParams; 4] {
        [
            &self.encoder_fwd,
            &self.encoder_bwd,
            &self.decoder_fwd,
            &self.decoder_bwd,
        ]
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    /// Rebuilds parameters from a flat vector in canonical order.
    pub fn from_flat(hyper: Hyper, flat: &[f64]) -> Result<Self> {
        hyper.validate()?;
        let expected = param_count(&hyper);
        if flat.len() != expected {
            return Err(Error::shape("ModelParams::from_flat", expected, flat.len()));
        }
        let mut p = Self::zeros(hyper);
        let mut offset = 0;
        for block in p.blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
        Ok(p)
    }

    /// Sets every entry to zero, keeping shapes.
    pub fn clear(&mut self) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.hyper.validate()?;
        let d = self.hyper.hidden;
        for (cell, n_in) in self.cells().into_iter().zip([
            self.hyper.n_in,
            self.hyper.n_in,
            2 * d,
            2 * d,
        ]) {
            if cell.input_size() != n_in || cell.hidden() != d || cell.peephole() != self.hyper.peephole {
                return Err(Error::shape(
                    "ModelParams",
                    format!("cell with n_in={n_in}, d={d}"),
                    format!("n_in={}, d={}", cell.input_size(), cell.hidden()),
                ));
            }
            cell.check_shapes()?;
        }
        if self.dense_w.len() != 2 * d * self.hyper.m_out || self.dense_b.len() != self.hyper.m_out {
            return Err(Error::shape(
                "ModelParams dense head",
                format!("{}x{} + {}", 2 * d, self.hyper.m_out, self.hyper.m_out),
                format!("{} + {}", self.dense_w.len(), self.dense_b.len()),
            ));
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases except the forget gate (1.0).
pub fn init_params(hyper: Hyper, seed: u64) -> Result<ModelParams> {
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(hyper);
    let d = hyper.hidden;

    let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in w.iter_mut() {
            *v = rng.random_range(-limit..=limit);
        }
    };
    for cell in [
        &mut p.encoder_fwd,
        &mut p.encoder_bwd,
        &mut p.decoder_fwd,
        &mut p.decoder_bwd,
    ] {
        let n_in = cell.input_size();
        for (g, gate) in cell.gates.iter_mut().enumerate() {
            fill(&mut gate.w_x, n_in, d);
            fill(&mut gate.w_h, d, d);
            // Peepholes read the d-dimensional cell state in both layouts.
            fill(&mut gate.w_c, d, d);
            if g == GATE_FORGET {
                gate.b.iter_mut().for_each(|b| *b = 1.0);
            }
        }
    }
    fill(&mut p.dense_w, 2 * d, hyper.m_out);
    Ok(p)
}

fn trace_rows(fwd: &DirectionTrace, bwd: &DirectionTrace) -> Vec<f64> {
    let d = fwd.hidden;
    let len = fwd.len;
    let mut out = Vec::with_capacity(len * 2 * d);
    for k in 0..len {
        out.extend_from_slice(fwd.h_at_row(k));
        out.extend_from_slice(bwd.h_at_row(k));
    }
    out
}

fn check_finite(values: &[f64], location: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            location: location.to_string(),
        })
    }
}

/// Bidirectional pass over `seq` from zero initial states. Element `i` of the
/// result is the forward state at `i` concatenated with the backward state at
/// `i`.
pub fn bilstm_forward(
    seq: &[Vec<f64>],
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(Error::Data("bilstm_forward needs a nonempty sequence".into()));
    }
    fwd.check_shapes()?;
    bwd.check_shapes()?;
    if fwd.input_size() != bwd.input_size() || fwd.hidden() != bwd.hidden() {
        return Err(Error::shape(
            "bilstm_forward: direction cells",
            format!("n_in={} d={}", fwd.input_size(), fwd.hidden()),
            format!("n_in={} d={}", bwd.input_size(), bwd.hidden()),
        ));
    }
    let n_in = fwd.input_size();
    let mut flat = Vec::with_capacity(seq.len() * n_in);
    for (i, x) in seq.iter().enumerate() {
        if x.len() != n_in {
            return Err(Error::shape(
                "bilstm_forward: sequence element",
                n_in,
                format!("{} at position {i}", x.len()),
            ));
        }
        flat.extend_from_slice(x);
    }
    let tf = run_direction(fwd, &flat, seq.len(), false);
    let tb = run_direction(bwd, &flat, seq.len(), true);
    let d2 = 2 * fwd.hidden();
    Ok(trace_rows(&tf, &tb)
        .chunks_exact(d2)
        .map(<[f64]>::to_vec)
        .collect())
}

/// Everything the backward pass needs from a forward evaluation.
struct ForwardTrace {
    enc_f: DirectionTrace,
    enc_b: DirectionTrace,
    latent: Vec<f64>,
    dec_f: DirectionTrace,
    dec_b: DirectionTrace,
    decoded: Vec<f64>,
    output: Matrix,
}

fn check_input(x: &Matrix, p: &ModelParams) -> Result<()> {
    p.check_shapes()?;
    if x.cols() != p.hyper.n_in {
        return Err(Error::shape(
            "model input columns",
            p.hyper.n_in,
            format!("{} ({}x{} matrix)", x.cols(), x.rows(), x.cols()),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::Data("model input has no rows".into()));
    }
    Ok(())
}

fn forward_trace(x: &Matrix, p: &ModelParams) -> Result<ForwardTrace> {
    let k = x.rows();
    let d = p.hyper.hidden;
    let m = p.hyper.m_out;

    let enc_f = run_direction(&p.encoder_fwd, x.as_slice(), k, false);
    check_finite(&enc_f.h, "encoder forward direction")?;
    let enc_b = run_direction(&p.encoder_bwd, x.as_slice(), k, true);
    check_finite(&enc_b.h, "encoder backward direction")?;
    let latent = trace_rows(&enc_f, &enc_b);

    let dec_f = run_direction(&p.decoder_fwd, &latent, k, false);
    check_finite(&dec_f.h, "decoder forward direction")?;
    let dec_b = run_direction(&p.decoder_bwd, &latent, k, true);
    check_finite(&dec_b.h, "decoder backward direction")?;
    let decoded = trace_rows(&dec_f, &dec_b);

    let mut output = Matrix::zeros(k, m);
    for (row, h) in decoded.chunks_exact(2 * d).enumerate() {
        let out = output.row_mut(row);
        out.copy_from_slice(&p.dense_b);
        for (a, &ha) in h.iter().enumerate() {
            let w = &p.dense_w[a * m..(a + 1) * m];
            for (o, wj) in out.iter_mut().zip(w) {
                *o += ha * wj;
            }
        }
    }
    check_finite(output.as_slice(), "dense head")?;
    Ok(ForwardTrace {
        enc_f,
        enc_b,
        latent,
        dec_f,
        dec_b,
        decoded,
        output,
    })
}

/// Maps a `(V·K) × n_in` window to `(V·K) × m_out` predictions. The rows form
/// the recurrent sequence axis.
pub fn model_forward(x: &Matrix, p: &ModelParams) -> Result<Matrix> {
    check_input(x, p)?;
    Ok(forward_trace(x, p)?.output)
}

/// Mean of squared entrywise differences.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Err(Error::Data("mse_loss of empty matrices".into()));
    }
    let sum: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

/// Loss and exact gradient of the MSE loss with respect to every parameter.
pub fn backward(x: &Matrix, y: &Matrix, p: &ModelParams) -> Result<(ModelParams, f64)> {
    let mut grad = p.zeros_like();
    let loss = backward_acc(x, y, p, 1.0, &mut grad)?;
    Ok((grad, loss))
}

/// Accumulates `scale · ∂L/∂θ` into `grad` and returns the loss `L`.
pub fn backward_acc(
    x: &Matrix,
    y: &Matrix,
    p: &ModelParams,
    scale: f64,
    grad: &mut ModelParams,
) -> Result<f64> {
    check_input(x, p)?;
    if y.shape() != (x.rows(), p.hyper.m_out) {
        return Err(Error::shape(
            "backward target",
            format!("{}x{}", x.rows(), p.hyper.m_out),
            format!("{}x{}", y.rows(), y.cols()),
        ));
    }
    if grad.hyper != p.hyper {
        return Err(Error::shape(
            "backward gradient buffer",
            format!("{:?}", p.hyper),
            format!("{:?}", grad.hyper),
        ));
    }
    let trace = forward_trace(x, p)?;
    let k = x.rows();
    let d = p.hyper.hidden;
    let m = p.hyper.m_out;
    let loss = mse_loss(&trace.output, y)?;

    // dL/dP for the mean loss, pre-scaled.
    let coef = scale * 2.0 / (k * m) as f64;
    let resid: Vec<f64> = trace
        .output
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| coef * (a - b))
        .collect();

    // Dense head.
    let mut d_decoded = vec![0.0; k * 2 * d];
    for row in 0..k {
        let r = &resid[row * m..(row + 1) * m];
        let h = &trace.decoded[row * 2 * d..(row + 1) * 2 * d];
        let dh = &mut d_decoded[row * 2 * d..(row + 1) * 2 * d];
        for (j, rj) in r.iter().enumerate() {
            grad.dense_b[j] += rj;
        }
        for a in 0..2 * d {
            let w = &p.dense_w[a * m..(a + 1) * m];
            let gw = &mut grad.dense_w[a * m..(a + 1) * m];
            let mut acc = 0.0;
            for j in 0..m {
                gw[j] += h[a] * r[j];
                acc += w[j] * r[j];
            }
            dh[a] = acc;
        }
    }

    // Decoder: split the concatenated gradient into the two directions.
    let (dh_dec_f, dh_dec_b) = split_halves(&d_decoded, k, d);
    let mut d_latent = vec![0.0; k * 2 * d];
    backprop_direction(
        &p.decoder_fwd,
        &trace.latent,
        &trace.dec_f,
        &dh_dec_f,
        &mut grad.decoder_fwd,
        Some(&mut d_latent),
    );
    backprop_direction(
        &p.decoder_bwd,
        &trace.latent,
        &trace.dec_b,
        &dh_dec_b,
        &mut grad.decoder_bwd,
        Some(&mut d_latent),
    );
    check_finite(&d_latent, "decoder backpropagation")?;

    let (dh_enc_f, dh_enc_b) = split_halves(&d_latent, k, d);
    backprop_direction(
        &p.encoder_fwd,
        x.as_slice(),
        &trace.enc_f,
        &dh_enc_f,
        &mut grad.encoder_fwd,
        None,
    );
    backprop_direction(
        &p.encoder_bwd,
        x.as_slice(),
        &trace.enc_b,
        &dh_enc_b,
        &mut grad.encoder_bwd,
        None,
    );
    Ok(loss)
}

/// Splits `len × 2d` rows into the forward and backward `len × d` halves.
fn split_halves(rows: &[f64], len: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(len * d);
    let mut b = Vec::with_capacity(len * d);
    for row in rows.chunks_exact(2 * d) {
        f.extend_from_slice(&row[..d]);
        b.extend_from_slice(&row[d..]);
    }
    (f, b)
}
