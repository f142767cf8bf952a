//! Recurrent cell with peephole-style gates.
//!
//! With `h` the previous hidden state, `c` the previous cell and `x` the input:
//!
//! ```text
//! forget = σ(W_forget·[h, c, x] + b_forget)
//! input  = σ(W_input ·[h, c, x] + b_input)
//! cell   = forget ⊙ c + input ⊙ tanh(W_cell·[h, x] + b_cell)
//! output = σ(W_output·[cell, h, x] + b_output)
//! hidden = output ⊙ tanh(cell)
//! ```
//!
//! The output gate reads the freshly updated cell; the candidate term does
//! not see the previous cell.

use rand::Rng;

use super::matrix::Matrix;
use super::{check_finite, Parameterized, TensorMut, TensorRef};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub name: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `H × (2H + In)` over `[h, c, x]`.
    pub w_forget: Matrix,
    /// `H × (2H + In)` over `[h, c, x]`.
    pub w_input: Matrix,
    /// `H × (H + In)` over `[h, x]`.
    pub w_cell: Matrix,
    /// `H × (2H + In)` over `[cell, h, x]`.
    pub w_output: Matrix,
    pub b_forget: Vec<f64>,
    pub b_input: Vec<f64>,
    pub b_cell: Vec<f64>,
    pub b_output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }
}

/// Intermediates of one step, kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    gate_in: Vec<f64>,
    cell_in: Vec<f64>,
    out_in: Vec<f64>,
    prev_cell: Vec<f64>,
    forget: Vec<f64>,
    input: Vec<f64>,
    candidate: Vec<f64>,
    output: Vec<f64>,
    tanh_cell: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(name: impl Into<String>, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let wide = 2 * hidden_dim + input_dim;
        Lstm {
            name: name.into(),
            input_dim,
            hidden_dim,
            w_forget: Matrix::fan_in_uniform(hidden_dim, wide, rng),
            w_input: Matrix::fan_in_uniform(hidden_dim, wide, rng),
            w_cell: Matrix::fan_in_uniform(hidden_dim, hidden_dim + input_dim, rng),
            w_output: Matrix::fan_in_uniform(hidden_dim, wide, rng),
            b_forget: vec![0.0; hidden_dim],
            b_input: vec![0.0; hidden_dim],
            b_cell: vec![0.0; hidden_dim],
            b_output: vec![0.0; hidden_dim],
        }
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.hidden_dim)
    }

    /// Advances `state` by one input and returns the new hidden vector.
    pub fn step(&self, state: &mut LstmState, input: &[f64]) -> Result<Vec<f64>> {
        let (next, _) = self.step_cached(state, input)?;
        *state = next;
        Ok(state.hidden.clone())
    }

    pub fn step_cached(&self, state: &LstmState, input: &[f64]) -> Result<(LstmState, LstmCache)> {
        if input.len() != self.input_dim {
            return Err(Error::shape(format!("{} input", self.name), self.input_dim, input.len()));
        }
        if state.hidden.len() != self.hidden_dim || state.cell.len() != self.hidden_dim {
            return Err(Error::shape(format!("{} state", self.name), self.hidden_dim, state.hidden.len()));
        }
        let h = &state.hidden;
        let c = &state.cell;
        let gate_in = [h.as_slice(), c, input].concat();
        let cell_in = [h.as_slice(), input].concat();

        let mut forget = Vec::new();
        self.w_forget.affine(&gate_in, &self.b_forget, &mut forget);
        forget.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut in_gate = Vec::new();
        self.w_input.affine(&gate_in, &self.b_input, &mut in_gate);
        in_gate.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut candidate = Vec::new();
        self.w_cell.affine(&cell_in, &self.b_cell, &mut candidate);
        candidate.iter_mut().for_each(|v| *v = v.tanh());

        let cell: Vec<f64> = (0..self.hidden_dim)
            .map(|k| forget[k] * c[k] + in_gate[k] * candidate[k])
            .collect();
        let out_in = [cell.as_slice(), h, input].concat();
        let mut output = Vec::new();
        self.w_output.affine(&out_in, &self.b_output, &mut output);
        output.iter_mut().for_each(|v| *v = sigmoid(*v));
        let tanh_cell: Vec<f64> = cell.iter().map(|v| v.tanh()).collect();
        let hidden: Vec<f64> = output.iter().zip(&tanh_cell).map(|(o, t)| o * t).collect();
        check_finite(&hidden, || self.name.clone())?;
        check_finite(&cell, || self.name.clone())?;

        let cache = LstmCache {
            gate_in,
            cell_in,
            out_in,
            prev_cell: c.clone(),
            forget,
            input: in_gate,
            candidate,
            output,
            tanh_cell,
        };
        Ok((LstmState { hidden, cell }, cache))
    }

    /// One step of backpropagation through time.
    ///
    /// `d_hidden` is the total gradient reaching this step's hidden output and
    /// `d_cell` the gradient flowing back from the next step's cell. Returns
    /// `(∂L/∂input, ∂L/∂hidden₋₁, ∂L/∂cell₋₁)`.
    pub fn backward_step(
        &self,
        cache: &LstmCache,
        d_hidden: &[f64],
        d_cell: &[f64],
        grad: &mut Lstm,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let mut dc = d_cell.to_vec();
        let mut do_pre = vec![0.0; hd];
        for k in 0..hd {
            let o = cache.output[k];
            let t = cache.tanh_cell[k];
            do_pre[k] = d_hidden[k] * t * o * (1.0 - o);
            dc[k] += d_hidden[k] * o * (1.0 - t * t);
        }
        let mut d_out_in = vec![0.0; 2 * hd + self.input_dim];
        self.w_output.transpose_matvec_acc(&do_pre, &mut d_out_in);
        grad.w_output.outer_acc(&do_pre, &cache.out_in);
        grad.b_output.iter_mut().zip(&do_pre).for_each(|(b, g)| *b += g);
        for k in 0..hd {
            dc[k] += d_out_in[k];
        }

        let mut df_pre = vec![0.0; hd];
        let mut dp_pre = vec![0.0; hd];
        let mut dg_pre = vec![0.0; hd];
        for k in 0..hd {
            let (f, p, g) = (cache.forget[k], cache.input[k], cache.candidate[k]);
            df_pre[k] = dc[k] * cache.prev_cell[k] * f * (1.0 - f);
            dp_pre[k] = dc[k] * g * p * (1.0 - p);
            dg_pre[k] = dc[k] * p * (1.0 - g * g);
        }
        let mut d_gate_in = vec![0.0; 2 * hd + self.input_dim];
        self.w_forget.transpose_matvec_acc(&df_pre, &mut d_gate_in);
        self.w_input.transpose_matvec_acc(&dp_pre, &mut d_gate_in);
        let mut d_cell_in = vec![0.0; hd + self.input_dim];
        self.w_cell.transpose_matvec_acc(&dg_pre, &mut d_cell_in);

        grad.w_forget.outer_acc(&df_pre, &cache.gate_in);
        grad.w_input.outer_acc(&dp_pre, &cache.gate_in);
        grad.w_cell.outer_acc(&dg_pre, &cache.cell_in);
        grad.b_forget.iter_mut().zip(&df_pre).for_each(|(b, g)| *b += g);
        grad.b_input.iter_mut().zip(&dp_pre).for_each(|(b, g)| *b += g);
        grad.b_cell.iter_mut().zip(&dg_pre).for_each(|(b, g)| *b += g);

        let d_prev_hidden: Vec<f64> = (0..hd)
            .map(|k| d_out_in[hd + k] + d_gate_in[k] + d_cell_in[k])
            .collect();
        let d_prev_cell: Vec<f64> = (0..hd).map(|k| dc[k] * cache.forget[k] + d_gate_in[hd + k]).collect();
        let d_input: Vec<f64> = (0..self.input_dim)
            .map(|k| d_out_in[2 * hd + k] + d_gate_in[2 * hd + k] + d_cell_in[hd + k])
            .collect();
        (d_input, d_prev_hidden, d_prev_cell)
    }
}

impl Parameterized for Lstm {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let n = &self.name;
        let mut out = Vec::with_capacity(8);
        for (s, w) in [
            ("w_forget", &self.w_forget),
            ("w_input", &self.w_input),
            ("w_cell", &self.w_cell),
            ("w_output", &self.w_output),
        ] {
            out.push(TensorRef::new(format!("{n}.{s}"), vec![w.rows, w.cols], &w.data));
        }
        for (s, b) in [
            ("b_forget", &self.b_forget),
            ("b_input", &self.b_input),
            ("b_cell", &self.b_cell),
            ("b_output", &self.b_output),
        ] {
            out.push(TensorRef::new(format!("{n}.{s}"), vec![b.len()], b));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let n = self.name.clone();
        let mut out = Vec::with_capacity(8);
        for (s, w) in [
            ("w_forget", &mut self.w_forget),
            ("w_input", &mut self.w_input),
            ("w_cell", &mut self.w_cell),
            ("w_output", &mut self.w_output),
        ] {
            out.push(TensorMut::new(format!("{n}.{s}"), vec![w.rows, w.cols], &mut w.data));
        }
        for (s, b) in [
            ("b_forget", &mut self.b_forget),
            ("b_input", &mut self.b_input),
            ("b_cell", &mut self.b_cell),
            ("b_output", &mut self.b_output),
        ] {
            out.push(TensorMut::new(format!("{n}.{s}"), vec![b.len()], b));
        }
        out
    }

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.data.fill(0.0));
        z
    }
}
