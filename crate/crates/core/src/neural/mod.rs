//! A small differentiable stack: dense layers, a recurrent cell, hand-written
//! reverse-mode gradients, probability heads and Adam.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod dist;
pub mod lstm;
pub mod matrix;

pub use adam::{adam_update, AdamState};
pub use dense::{softmax, Activation, Dense, DenseCache, Mlp};
pub use lstm::{Lstm, LstmCache, LstmState};
pub use matrix::Matrix;

use rand::Rng;

use crate::{Error, Result};

/// Read-only view of one named parameter tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn new(name: String, dims: Vec<usize>, data: &'a [f64]) -> Self {
        TensorRef { name, dims, data }
    }
}

#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a mut [f64],
}

impl<'a> TensorMut<'a> {
    pub fn new(name: String, dims: Vec<usize>, data: &'a mut [f64]) -> Self {
        TensorMut { name, dims, data }
    }
}

/// Anything holding trainable tensors. Gradients are stored in a value of the
/// same type obtained from [`Parameterized::zeroed`], so both sides enumerate
/// tensors in the same order.
pub trait Parameterized {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>>;
    fn zeroed(&self) -> Self
    where
        Self: Sized;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        let n = self.num_parameters();
        if values.len() != n {
            return Err(Error::shape("flat parameters", n, values.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.data.len();
            t.data.copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn check_finite(values: &[f64], layer: impl FnOnce() -> String) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer: layer() })
    }
}

/// Optional recurrent trunk followed by a dense stack, applied along a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    pub trunk: Option<Lstm>,
    pub head: Mlp,
}

impl SequenceModel {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        lstm_hidden: Option<usize>,
        head_sizes: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        let trunk = lstm_hidden.map(|h| Lstm::new("lstm", input_dim, h, rng));
        let head_in = lstm_hidden.unwrap_or(input_dim);
        let mut sizes = vec![head_in];
        sizes.extend_from_slice(head_sizes);
        SequenceModel {
            trunk,
            head: Mlp::new("head", &sizes, hidden, last, rng),
        }
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut state = self.trunk.as_ref().map(Lstm::initial_state);
        inputs
            .iter()
            .map(|x| {
                let features = match (&self.trunk, state.as_mut()) {
                    (Some(l), Some(s)) => l.step(s, x)?,
                    _ => x.clone(),
                };
                self.head.forward(&features)
            })
            .collect()
    }
}

impl Parameterized for SequenceModel {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = self.trunk.as_ref().map(Lstm::tensors).unwrap_or_default();
        out.extend(self.head.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = self.trunk.as_mut().map(Lstm::tensors_mut).unwrap_or_default();
        out.extend(self.head.tensors_mut());
        out
    }

    fn zeroed(&self) -> Self {
        SequenceModel {
            trunk: self.trunk.as_ref().map(Lstm::zeroed),
            head: self.head.zeroed(),
        }
    }
}

/// Loss and parameter gradients of a sequence loss.
///
/// `loss_fn(t, output)` returns the loss contribution of step `t` and its
/// gradient with respect to that step's output. Gradients flow back through
/// the dense stack and through time across the whole input sequence.
pub fn gradients<F>(model: &SequenceModel, inputs: &[Vec<f64>], mut loss_fn: F) -> Result<(f64, SequenceModel)>
where
    F: FnMut(usize, &[f64]) -> (f64, Vec<f64>),
{
    let mut grad = model.zeroed();
    let mut total = 0.0;
    let mut lstm_caches = Vec::with_capacity(inputs.len());
    let mut d_features = Vec::with_capacity(inputs.len());
    let mut state = model.trunk.as_ref().map(Lstm::initial_state);
    for (t, x) in inputs.iter().enumerate() {
        let features = match (&model.trunk, state.as_mut()) {
            (Some(l), Some(s)) => {
                let (next, cache) = l.step_cached(s, x)?;
                lstm_caches.push(cache);
                *s = next;
                s.hidden.clone()
            }
            _ => x.clone(),
        };
        let (out, caches) = model.head.forward_cached(&features)?;
        let (loss, d_out) = loss_fn(t, &out);
        if !loss.is_finite() {
            return Err(Error::NonFinite { layer: "loss".into() });
        }
        total += loss;
        d_features.push(model.head.backward(&caches, &d_out, &mut grad.head));
    }
    if let (Some(l), Some(g)) = (&model.trunk, grad.trunk.as_mut()) {
        let h = l.hidden_dim;
        let mut d_hidden_next = vec![0.0; h];
        let mut d_cell_next = vec![0.0; h];
        for t in (0..inputs.len()).rev() {
            let dh: Vec<f64> = d_features[t].iter().zip(&d_hidden_next).map(|(a, b)| a + b).collect();
            let (_, dh_prev, dc_prev) = l.backward_step(&lstm_caches[t], &dh, &d_cell_next, g);
            d_hidden_next = dh_prev;
            d_cell_next = dc_prev;
        }
    }
    Ok((total, grad))
}
