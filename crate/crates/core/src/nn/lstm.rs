//! Peephole LSTM cell and single-direction sequence passes with exact
//! backpropagation through the recurrence.

use crate::error::{Error, Result};

use super::linalg::{axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid};

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CELL: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// How the cell state feeds the gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Peephole {
    /// Elementwise weights (one vector per gate).
    Diagonal,
    /// Full `d × d` matrices.
    Dense,
}

impl Peephole {
    pub fn as_str(self) -> &'static str {
        match self {
            Peephole::Diagonal => "diag",
            Peephole::Dense => "dense",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "diag" => Some(Peephole::Diagonal),
            "dense" => Some(Peephole::Dense),
            _ => None,
        }
    }

    fn len(self, hidden: usize) -> usize {
        match self {
            Peephole::Diagonal => hidden,
            Peephole::Dense => hidden * hidden,
        }
    }
}

/// Weights of one gate. `w_c` is empty for the cell-candidate gate, which has
/// no peephole term.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// `d × n_in`, row-major.
    pub w_x: Vec<f64>,
    /// `d × d`, row-major.
    pub w_h: Vec<f64>,
    pub w_c: Vec<f64>,
    pub b: Vec<f64>,
}

/// Parameters of one peephole LSTM cell, gates ordered input, forget, cell,
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    input_size: usize,
    hidden: usize,
    peephole: Peephole,
    pub gates: [GateParams; 4],
}

impl LstmCellParams {
    pub fn zeros(input_size: usize, hidden: usize, peephole: Peephole) -> Self {
        let gate = |g: usize| GateParams {
            w_x: vec![0.0; hidden * input_size],
            w_h: vec![0.0; hidden * hidden],
            w_c: if g == GATE_CELL {
                Vec::new()
            } else {
                vec![0.0; peephole.len(hidden)]
            },
            b: vec![0.0; hidden],
        };
        Self {
            input_size,
            hidden,
            peephole,
            gates: [gate(0), gate(1), gate(2), gate(3)],
        }
    }

    /// Number of scalars in a cell: `4d·n_in + 4d² + 3·|peephole| + 4d`.
    pub fn count(input_size: usize, hidden: usize, peephole: Peephole) -> usize {
        4 * hidden * input_size + 4 * hidden * hidden + 3 * peephole.len(hidden) + 4 * hidden
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn peephole(&self) -> Peephole {
        self.peephole
    }

    /// Parameter blocks in serialization order: for each gate
    /// `W^(x), W^(h), W^(c), b`, skipping the absent cell-gate peephole.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(15);
        for g in &self.gates {
            out.push(g.w_x.as_slice());
            out.push(g.w_h.as_slice());
            if !g.w_c.is_empty() {
                out.push(g.w_c.as_slice());
            }
            out.push(g.b.as_slice());
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(15);
        for g in &mut self.gates {
            out.push(g.w_x.as_mut_slice());
            out.push(g.w_h.as_mut_slice());
            if !g.w_c.is_empty() {
                out.push(g.w_c.as_mut_slice());
            }
            out.push(g.b.as_mut_slice());
        }
        out
    }

    /// Verifies every block has the length implied by the hyperparameters.
    pub fn check_shapes(&self) -> Result<()> {
        let d = self.hidden;
        for (k, g) in self.gates.iter().enumerate() {
            let peep = if k == GATE_CELL { 0 } else { self.peephole.len(d) };
            let ok = g.w_x.len() == d * self.input_size
                && g.w_h.len() == d * d
                && g.w_c.len() == peep
                && g.b.len() == d;
            if !ok {
                return Err(Error::shape(
                    "LstmCellParams",
                    format!("gate {k} with d={d}, n_in={}", self.input_size),
                    format!(
                        "w_x {} w_h {} w_c {} b {}",
                        g.w_x.len(),
                        g.w_h.len(),
                        g.w_c.len(),
                        g.b.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Adds the peephole contribution `W^(c) c` of gate `g` into `out`.
    #[inline]
    fn peep_acc(&self, g: usize, c: &[f64], out: &mut [f64]) {
        let w = &self.gates[g].w_c;
        match self.peephole {
            Peephole::Diagonal => {
                for ((o, &wk), &ck) in out.iter_mut().zip(w).zip(c) {
                    *o += wk * ck;
                }
            }
            Peephole::Dense => matvec_acc(w, c, out),
        }
    }

    /// Adds `W^(c)ᵀ δ` of gate `g` into `out`.
    #[inline]
    fn peep_t_acc(&self, g: usize, delta: &[f64], out: &mut [f64]) {
        let w = &self.gates[g].w_c;
        match self.peephole {
            Peephole::Diagonal => {
                for ((o, &wk), &dk) in out.iter_mut().zip(w).zip(delta) {
                    *o += wk * dk;
                }
            }
            Peephole::Dense => matvec_t_acc(w, delta, out),
        }
    }

    /// Accumulates the peephole weight gradient of gate `g`.
    #[inline]
    fn peep_grad_acc(&mut self, g: usize, delta: &[f64], c: &[f64]) {
        let peephole = self.peephole;
        let w = &mut self.gates[g].w_c;
        match peephole {
            Peephole::Diagonal => {
                for ((wk, &dk), &ck) in w.iter_mut().zip(delta).zip(c) {
                    *wk += dk * ck;
                }
            }
            Peephole::Dense => outer_acc(delta, c, w),
        }
    }
}

/// Pre-activation `b + W^(x) x + W^(h) h` of gate `g`.
#[inline]
fn affine(p: &LstmCellParams, g: usize, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
    let gate = &p.gates[g];
    out.copy_from_slice(&gate.b);
    matvec_acc(&gate.w_x, x, out);
    matvec_acc(&gate.w_h, h_prev, out);
}

/// One cell step. `acts` receives the activated gates `[i | f | g̃ | o]`
/// (each of length `d`).
fn step(
    p: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    acts: &mut [f64],
    c: &mut [f64],
    h: &mut [f64],
) {
    let d = p.hidden;
    let (i_gate, rest) = acts.split_at_mut(d);
    let (f_gate, rest) = rest.split_at_mut(d);
    let (g_cand, o_gate) = rest.split_at_mut(d);

    affine(p, GATE_INPUT, x, h_prev, i_gate);
    p.peep_acc(GATE_INPUT, c_prev, i_gate);
    affine(p, GATE_FORGET, x, h_prev, f_gate);
    p.peep_acc(GATE_FORGET, c_prev, f_gate);
    affine(p, GATE_CELL, x, h_prev, g_cand);
    for k in 0..d {
        i_gate[k] = sigmoid(i_gate[k]);
        f_gate[k] = sigmoid(f_gate[k]);
        g_cand[k] = g_cand[k].tanh();
        c[k] = f_gate[k] * c_prev[k] + i_gate[k] * g_cand[k];
    }
    // The output gate peeks at the updated cell state.
    affine(p, GATE_OUTPUT, x, h_prev, o_gate);
    p.peep_acc(GATE_OUTPUT, c, o_gate);
    for k in 0..d {
        o_gate[k] = sigmoid(o_gate[k]);
        h[k] = o_gate[k] * c[k].tanh();
    }
}

/// Single forward step of the peephole LSTM cell, returning `(h_t, c_t)`.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    p.check_shapes()?;
    let d = p.hidden;
    if x.len() != p.input_size {
        return Err(Error::shape("lstm_cell_forward: x", p.input_size, x.len()));
    }
    if h_prev.len() != d || c_prev.len() != d {
        return Err(Error::shape(
            "lstm_cell_forward: state",
            d,
            format!("h {} c {}", h_prev.len(), c_prev.len()),
        ));
    }
    let mut acts = vec![0.0; 4 * d];
    let mut c = vec![0.0; d];
    let mut h = vec![0.0; d];
    step(p, x, h_prev, c_prev, &mut acts, &mut c, &mut h);
    Ok((h, c))
}

/// Activations recorded while running one direction over a sequence.
///
/// Index `t` is the step number in processing order; a reversed pass reads
/// input row `len - 1 - t` at step `t`.
#[derive(Debug, Clone)]
pub(crate) struct DirectionTrace {
    pub hidden: usize,
    pub len: usize,
    pub reverse: bool,
    /// `len × 4d` activated gates.
    pub acts: Vec<f64>,
    /// `len × d` cell states.
    pub c: Vec<f64>,
    /// `len × d` hidden states.
    pub h: Vec<f64>,
}

impl DirectionTrace {
    #[inline]
    pub fn row_of_step(&self, t: usize) -> usize {
        if self.reverse {
            self.len - 1 - t
        } else {
            t
        }
    }

    /// Hidden state aligned with input row `k`.
    #[inline]
    pub fn h_at_row(&self, k: usize) -> &[f64] {
        let t = if self.reverse { self.len - 1 - k } else { k };
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }
}

/// Runs the cell over `len` rows of `inputs` (row-major, width `n_in`) from
/// zero initial state.
pub(crate) fn run_direction(
    p: &LstmCellParams,
    inputs: &[f64],
    len: usize,
    reverse: bool,
) -> DirectionTrace {
    let d = p.hidden;
    let n_in = p.input_size;
    debug_assert_eq!(inputs.len(), len * n_in);
    let mut acts = vec![0.0; len * 4 * d];
    let mut c = vec![0.0; len * d];
    let mut h = vec![0.0; len * d];
    let zeros = vec![0.0; d];
    for t in 0..len {
        let row = if reverse { len - 1 - t } else { t };
        let x = &inputs[row * n_in..(row + 1) * n_in];
        let (c_done, c_rest) = c.split_at_mut(t * d);
        let (h_done, h_rest) = h.split_at_mut(t * d);
        let (c_prev, h_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (&c_done[(t - 1) * d..], &h_done[(t - 1) * d..])
        };
        step(
            p,
            x,
            h_prev,
            c_prev,
            &mut acts[t * 4 * d..(t + 1) * 4 * d],
            &mut c_rest[..d],
            &mut h_rest[..d],
        );
    }
    DirectionTrace {
        hidden: d,
        len,
        reverse,
        acts,
        c,
        h,
    }
}

/// Backpropagates through one direction.
///
/// `dh_rows` holds `∂L/∂h` aligned with input rows (`len × d`). Parameter
/// gradients are accumulated into `grad`; if `dx_rows` is given, input
/// gradients are accumulated into it (aligned with input rows).
pub(crate) fn backprop_direction(
    p: &LstmCellParams,
    inputs: &[f64],
    trace: &DirectionTrace,
    dh_rows: &[f64],
    grad: &mut LstmCellParams,
    mut dx_rows: Option<&mut [f64]>,
) {
    let d = p.hidden;
    let n_in = p.input_size;
    let len = trace.len;
    let zeros = vec![0.0; d];

    let mut dh_next = vec![0.0; d];
    let mut dc_next = vec![0.0; d];
    let mut dh = vec![0.0; d];
    let mut dc = vec![0.0; d];
    let mut da = vec![0.0; 4 * d];

    for t in (0..len).rev() {
        let row = trace.row_of_step(t);
        let x = &inputs[row * n_in..(row + 1) * n_in];
        let acts = &trace.acts[t * 4 * d..(t + 1) * 4 * d];
        let c = &trace.c[t * d..(t + 1) * d];
        let (c_prev, h_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &trace.c[(t - 1) * d..t * d],
                &trace.h[(t - 1) * d..t * d],
            )
        };
        let (i_gate, rest) = acts.split_at(d);
        let (f_gate, rest) = rest.split_at(d);
        let (g_cand, o_gate) = rest.split_at(d);

        let ext = &dh_rows[row * d..(row + 1) * d];
        for k in 0..d {
            dh[k] = ext[k] + dh_next[k];
        }

        let (da_i, rest) = da.split_at_mut(d);
        let (da_f, rest) = rest.split_at_mut(d);
        let (da_g, da_o) = rest.split_at_mut(d);

        for k in 0..d {
            let tc = c[k].tanh();
            da_o[k] = dh[k] * tc * o_gate[k] * (1.0 - o_gate[k]);
            dc[k] = dc_next[k] + dh[k] * o_gate[k] * (1.0 - tc * tc);
        }
        p.peep_t_acc(GATE_OUTPUT, da_o, &mut dc);
        for k in 0..d {
            da_i[k] = dc[k] * g_cand[k] * i_gate[k] * (1.0 - i_gate[k]);
            da_g[k] = dc[k] * i_gate[k] * (1.0 - g_cand[k] * g_cand[k]);
            da_f[k] = dc[k] * c_prev[k] * f_gate[k] * (1.0 - f_gate[k]);
            dc_next[k] = dc[k] * f_gate[k];
        }
        p.peep_t_acc(GATE_INPUT, da_i, &mut dc_next);
        p.peep_t_acc(GATE_FORGET, da_f, &mut dc_next);

        grad.peep_grad_acc(GATE_INPUT, da_i, c_prev);
        grad.peep_grad_acc(GATE_FORGET, da_f, c_prev);
        grad.peep_grad_acc(GATE_OUTPUT, da_o, c);

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (g, delta) in da.chunks_exact(d).enumerate() {
            let gp = &p.gates[g];
            let gg = &mut grad.gates[g];
            outer_acc(delta, x, &mut gg.w_x);
            outer_acc(delta, h_prev, &mut gg.w_h);
            axpy(1.0, delta, &mut gg.b);
            matvec_t_acc(&gp.w_h, delta, &mut dh_next);
            if let Some(dx) = dx_rows.as_deref_mut() {
                matvec_t_acc(&gp.w_x, delta, &mut dx[row * n_in..(row + 1) * n_in]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cell(n_in: usize, d: usize, peephole: Peephole, seed: u64) -> LstmCellParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LstmCellParams::zeros(n_in, d, peephole);
        for block in p.blocks_mut() {
            for v in block.iter_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
        }
        p
    }

    /// Straight-line evaluation of the five cell equations, one scalar at a
    /// time, with no shared helpers.
    fn scalar_oracle(
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        p: &LstmCellParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let d = p.hidden();
        let n = x.len();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let lin = |g: usize, k: usize| {
            let gp = &p.gates[g];
            let mut s = gp.b[k];
            for m in 0..n {
                s += gp.w_x[k * n + m] * x[m];
            }
            for m in 0..d {
                s += gp.w_h[k * d + m] * h_prev[m];
            }
            s
        };
        let peep = |g: usize, k: usize, c: &[f64]| match p.peephole() {
            Peephole::Diagonal => p.gates[g].w_c[k] * c[k],
            Peephole::Dense => (0..d).map(|m| p.gates[g].w_c[k * d + m] * c[m]).sum(),
        };
        let mut c = vec![0.0; d];
        for k in 0..d {
            let i = sig(lin(0, k) + peep(0, k, c_prev));
            let f = sig(lin(1, k) + peep(1, k, c_prev));
            c[k] = f * c_prev[k] + i * lin(2, k).tanh();
        }
        let mut h = vec![0.0; d];
        for k in 0..d {
            let o = sig(lin(3, k) + peep(3, k, &c));
            h[k] = o * c[k].tanh();
        }
        (h, c)
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = LstmCellParams::zeros(3, 4, Peephole::Diagonal);
        let (h, c) = lstm_cell_forward(&[1.0, -2.0, 3.0], &[0.0; 4], &[0.0; 4], &p).unwrap();
        assert!(h.iter().chain(&c).all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut p = LstmCellParams::zeros(2, 3, Peephole::Diagonal);
        p.gates[GATE_FORGET].b.iter_mut().for_each(|b| *b = 50.0);
        let (_, c) = lstm_cell_forward(&[0.3, -0.7], &[0.0; 3], &[1.0; 3], &p).unwrap();
        for v in c {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_scalar_oracle() {
        for (seed, peephole) in [(1, Peephole::Diagonal), (2, Peephole::Dense)] {
            let p = random_cell(5, 4, peephole, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c0: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, c) = lstm_cell_forward(&x, &h0, &c0, &p).unwrap();
            let (ho, co) = scalar_oracle(&x, &h0, &c0, &p);
            for k in 0..4 {
                assert!((h[k] - ho[k]).abs() < 1e-14, "h[{k}]");
                assert!((c[k] - co[k]).abs() < 1e-14, "c[{k}]");
            }
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let p = LstmCellParams::zeros(3, 2, Peephole::Diagonal);
        assert!(lstm_cell_forward(&[0.0; 4], &[0.0; 2], &[0.0; 2], &p).is_err());
        assert!(lstm_cell_forward(&[0.0; 3], &[0.0; 3], &[0.0; 2], &p).is_err());
    }

    #[test]
    fn cell_count_matches_blocks() {
        for peephole in [Peephole::Diagonal, Peephole::Dense] {
            let p = LstmCellParams::zeros(7, 5, peephole);
            let total: usize = p.blocks().iter().map(|b| b.len()).sum();
            assert_eq!(total, LstmCellParams::count(7, 5, peephole));
        }
    }

    #[test]
    fn gates_stay_in_open_unit_interval() {
        let p = random_cell(4, 6, Peephole::Diagonal, 9);
        let inputs: Vec<f64> = (0..40).map(|k| ((k * 7) % 11) as f64 - 5.0).collect();
        let trace = run_direction(&p, &inputs, 10, false);
        let d = 6;
        for t in 0..10 {
            let a = &trace.acts[t * 4 * d..(t + 1) * 4 * d];
            for k in 0..d {
                for g in [GATE_INPUT, GATE_FORGET, GATE_OUTPUT] {
                    let v = a[g * d + k];
                    assert!(v > 0.0 && v < 1.0);
                }
                assert!(a[GATE_CELL * d + k].abs() < 1.0);
                assert!(trace.h[t * d + k].abs() < 1.0);
            }
        }
    }
}
