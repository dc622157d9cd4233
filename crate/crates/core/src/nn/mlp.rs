use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Parameterized};
use crate::error::{Error, Result};

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (input + output) as f64).sqrt();
        let mut weight = Matrix::zeros(output, input);
        for w in weight.data_mut() {
            *w = rng.gen_range(-a..a);
        }
        Self {
            weight,
            bias: vec![0.0; output],
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Applies the map to a single row, writing into `out`.
    #[inline]
    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (o, dst) in out.iter_mut().enumerate() {
            let w = self.weight.row(o);
            let mut acc = self.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            *dst = acc;
        }
    }

    pub fn apply(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "linear layer expects {} inputs, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        let mut out = Matrix::zeros(input.rows(), self.output_dim());
        for r in 0..input.rows() {
            self.apply_row(input.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    /// Accumulates `dW += dyᵀ x`, `db += Σ dy` into `grads` and optionally
    /// writes `dx = dy W` into `input_grad`.
    pub(crate) fn backward_row(
        &self,
        x: &[f64],
        dy: &[f64],
        grads: &mut Linear,
        input_grad: Option<&mut [f64]>,
    ) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.bias[o] += g;
            for (gw, xi) in grads.weight.row_mut(o).iter_mut().zip(x) {
                *gw += g * xi;
            }
        }
        if let Some(dx) = input_grad {
            dx.fill(0.0);
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (d, w) in dx.iter_mut().zip(self.weight.row(o)) {
                    *d += g * w;
                }
            }
        }
    }
}

impl Parameterized for Linear {
    fn parameter_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }

    fn write_parameters(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weight.data());
        out.extend_from_slice(&self.bias);
    }

    fn read_parameters(&mut self, src: &[f64]) -> usize {
        let nw = self.weight.data().len();
        let nb = self.bias.len();
        self.weight.data_mut().copy_from_slice(&src[..nw]);
        self.bias.copy_from_slice(&src[nw..nw + nb]);
        nw + nb
    }

    fn zeros_like(&self) -> Self {
        Linear::zeros(self.input_dim(), self.output_dim())
    }
}

/// Multi-layer perceptron: affine layers with ReLU between them and an
/// identity output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Linear>,
}

/// Activations cached by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTape {
    /// Input to each layer (post-ReLU of the previous one).
    inputs: Vec<Matrix>,
    /// Pre-activation output of each layer.
    pre: Vec<Matrix>,
}

/// Gradients share the parameter layout of the model they belong to.
pub type MlpGrads = Mlp;

impl Mlp {
    pub fn from_layers(layers: Vec<Linear>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero MLP with the given layer widths, e.g. `[3, 64, 4]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect())
    }

    pub(crate) fn init_with(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        check_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|w| Linear::init(w[0], w[1], rng)).collect())
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(Linear::output_dim));
        dims
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpTape)> {
        self.check_input(input)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&x)?;
            let next = if l < last { relu(&z) } else { z.clone() };
            inputs.push(x);
            pre.push(z);
            x = next;
        }
        Ok((x, MlpTape { inputs, pre }))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let last = self.layers.len() - 1;
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            x = layer.apply(&x)?;
            if l < last {
                relu_in_place(&mut x);
            }
        }
        Ok(x)
    }

    pub fn backward(&self, tape: &MlpTape, output_grad: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let mut grads = self.zeros_like();
        let input_grad = self.backward_into(tape, output_grad, &mut grads, true)?;
        Ok((grads, input_grad.expect("input gradient requested")))
    }

    /// Accumulates parameter gradients into `grads`. The input gradient is
    /// only materialized when `want_input_grad` is set.
    pub fn backward_into(
        &self,
        tape: &MlpTape,
        output_grad: &Matrix,
        grads: &mut MlpGrads,
        want_input_grad: bool,
    ) -> Result<Option<Matrix>> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::shape("tape does not belong to this MLP"));
        }
        let batch = tape.inputs[0].rows();
        if output_grad.shape() != (batch, self.output_dim()) {
            return Err(Error::shape(format!(
                "output gradient is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                batch,
                self.output_dim()
            )));
        }
        if grads.dims() != self.dims() {
            return Err(Error::shape("gradient buffer does not match MLP layout"));
        }

        let mut dy = output_grad.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &tape.inputs[l];
            let need_dx = l > 0 || want_input_grad;
            let mut dx = if need_dx {
                Some(Matrix::zeros(batch, layer.input_dim()))
            } else {
                None
            };
            for r in 0..batch {
                layer.backward_row(
                    x.row(r),
                    dy.row(r),
                    &mut grads.layers[l],
                    dx.as_mut().map(|m| m.row_mut(r)),
                );
            }
            match dx {
                Some(mut dx) if l > 0 => {
                    // ReLU subgradient at 0 is 0.
                    let z = &tape.pre[l - 1];
                    for (d, &zv) in dx.data_mut().iter_mut().zip(z.data()) {
                        if zv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    dy = dx;
                }
                dx => return Ok(dx),
            }
        }
        unreachable!("loop returns at layer 0")
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "MLP expects {} input columns, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        Ok(())
    }
}

impl Parameterized for Mlp {
    fn parameter_count(&self) -> usize {
        self.layers.iter().map(Parameterized::parameter_count).sum()
    }

    fn write_parameters(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            layer.write_parameters(out);
        }
    }

    fn read_parameters(&mut self, src: &[f64]) -> usize {
        let mut used = 0;
        for layer in &mut self.layers {
            used += layer.read_parameters(&src[used..]);
        }
        used
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Parameterized::zeros_like).collect(),
        }
    }
}

/// Glorot-uniform initialization of an MLP with widths `dims`; biases zero.
/// Bitwise deterministic per seed.
pub fn init_params(dims: &[usize], seed: u64) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::init_with(dims, &mut rng)
}

pub fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(m: &mut Matrix) {
    for v in m.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("MLP dims need an input and an output width"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("MLP widths must be positive"));
    }
    Ok(())
}
