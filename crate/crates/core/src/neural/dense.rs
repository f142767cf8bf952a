use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{check_finite, Parameterized, TensorMut, TensorRef};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Softmax,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => softmax_in_place(z),
            Activation::Identity => {}
        }
    }

    /// Pre-activation gradient from the output gradient, written into `d`.
    fn backward(self, y: &[f64], d: &mut [f64]) {
        match self {
            Activation::Relu => d.iter_mut().zip(y).for_each(|(g, &v)| {
                if v <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => d.iter_mut().zip(y).for_each(|(g, &v)| *g *= 1.0 - v * v),
            Activation::Softmax => {
                let s: f64 = d.iter().zip(y).map(|(g, v)| g * v).sum();
                d.iter_mut().zip(y).for_each(|(g, &v)| *g = v * (*g - s));
            }
            Activation::Identity => {}
        }
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Fully connected layer `activation(W·x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        Dense {
            weights: Matrix::fan_in_uniform(output, input, rng),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::shape("dense input", self.input_dim(), input.len()));
        }
        let mut out = Vec::with_capacity(self.output_dim());
        self.weights.affine(input, &self.bias, &mut out);
        self.activation.apply(&mut out);
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad` and returns `∂L/∂input`.
    pub fn backward(&self, cache: &DenseCache, d_out: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dz = d_out.to_vec();
        self.activation.backward(&cache.output, &mut dz);
        grad.weights.outer_acc(&dz, &cache.input);
        grad.bias.iter_mut().zip(&dz).for_each(|(b, g)| *b += g);
        let mut dx = vec![0.0; self.input_dim()];
        self.weights.transpose_matvec_acc(&dz, &mut dx);
        dx
    }

    pub fn zeroed(&self) -> Self {
        Dense {
            weights: Matrix::zeros(self.weights.rows, self.weights.cols),
            bias: vec![0.0; self.bias.len()],
            activation: self.activation,
        }
    }
}

/// Stack of dense layers with a name used in diagnostics and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub name: String,
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes = [in, h1, …, out]`; hidden layers use `hidden`, the last uses `last`.
    pub fn new<R: Rng + ?Sized>(
        name: impl Into<String>,
        sizes: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| Dense::new(sizes[k], sizes[k + 1], if k + 1 == n { last } else { hidden }, rng))
            .collect();
        Mlp {
            name: name.into(),
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x)?;
            check_finite(&x, || format!("{}.{k}", self.name))?;
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<DenseCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(&x)?;
            check_finite(&y, || format!("{}.{k}", self.name))?;
            caches.push(DenseCache {
                input: std::mem::take(&mut x),
                output: y.clone(),
            });
            x = y;
        }
        Ok((x, caches))
    }

    pub fn backward(&self, caches: &[DenseCache], d_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut d = d_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            d = self.layers[k].backward(&caches[k], &d, &mut grad.layers[k]);
        }
        d
    }
}

impl Parameterized for Mlp {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter().enumerate() {
            out.push(TensorRef::new(
                format!("{}.{k}.weight", self.name),
                vec![l.weights.rows, l.weights.cols],
                &l.weights.data,
            ));
            out.push(TensorRef::new(format!("{}.{k}.bias", self.name), vec![l.bias.len()], &l.bias));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.push(TensorMut::new(
                format!("{}.{k}.weight", self.name),
                vec![l.weights.rows, l.weights.cols],
                &mut l.weights.data,
            ));
            out.push(TensorMut::new(format!("{}.{k}.bias", self.name), vec![l.bias.len()], &mut l.bias));
        }
        out
    }

    fn zeroed(&self) -> Self {
        Mlp {
            name: self.name.clone(),
            layers: self.layers.iter().map(Dense::zeroed).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layer(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Dense {
        Dense {
            weights,
            bias,
            activation,
        }
    }

    #[test]
    fn identity_layer_passes_input() {
        let l = layer(Matrix::identity(3), vec![0.0; 3], Activation::Identity);
        assert_eq!(l.forward(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn zero_weights_give_activation_of_bias() {
        let l = layer(Matrix::zeros(2, 4), vec![-1.0, 0.3], Activation::Tanh);
        let y = l.forward(&[5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(y, vec![(-1.0f64).tanh(), 0.3f64.tanh()]);
    }

    #[test]
    fn relu_elementwise() {
        let l = layer(Matrix::identity(2), vec![0.0; 2], Activation::Relu);
        assert_eq!(l.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let l = layer(Matrix::identity(2), vec![0.0; 2], Activation::Relu);
        assert!(matches!(l.forward(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn non_finite_output_names_layer() {
        let mut rng = rand::rng();
        let mut m = Mlp::new("probe", &[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng);
        m.layers[1].bias[0] = f64::NAN;
        match m.forward(&[1.0, 1.0]) {
            Err(Error::NonFinite { layer }) => assert_eq!(layer, "probe.1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            z in prop::collection::vec(-50.0..50.0f64, 1..20),
            shift in -100.0..100.0f64,
        ) {
            let p = softmax(&z);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
