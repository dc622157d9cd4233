use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Neighborhoods;
use crate::error::{Error, Result};
use crate::nn::{Linear, Matrix, Mlp, Parameterized};

/// Points per work unit in the backward pass. Partial gradients are reduced
/// in chunk order, so results do not depend on the thread count.
const BACKWARD_CHUNK: usize = 64;

/// One (dilated) point convolution.
///
/// For every valid point `i` with aggregation set `A_i`:
///
/// ```text
/// a_i   = 1/|A_i| · Σ_{j ∈ A_i} f_j ⊙ g(p_i − p_j)
/// out_i = ReLU(W a_i + b)
/// ```
///
/// `g` is the kernel MLP mapping a relative position to one weight per input
/// channel. The parameter count depends on the channel widths only, never on
/// `k` or `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConvLayer {
    pub kernel: Mlp,
    pub projection: Linear,
    pub k: usize,
    pub d: usize,
}

/// What [`layer_forward`] keeps for [`layer_backward`]. Kernel values are
/// recomputed during the backward pass instead of being stored.
#[derive(Clone, Debug)]
pub struct LayerTape {
    positions: Arc<Vec<[f64; 3]>>,
    features: Matrix,
    aggregated: Matrix,
    pre_activation: Matrix,
    neighborhoods: Arc<Neighborhoods>,
    valid: Vec<bool>,
}

impl LayerTape {
    pub fn aggregated(&self) -> &Matrix {
        &self.aggregated
    }
}

impl PointConvLayer {
    /// Random layer with kernel widths `3 → kernel_hidden → f_in` and a
    /// projection `f_in → f_out`.
    pub fn init(
        f_in: usize,
        f_out: usize,
        kernel_hidden: usize,
        k: usize,
        d: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let kernel = Mlp::init_with(&[3, kernel_hidden, f_in], rng)?;
        let projection = Linear::init(f_in, f_out, rng);
        Self::new(kernel, projection, k, d)
    }

    pub fn new(kernel: Mlp, projection: Linear, k: usize, d: usize) -> Result<Self> {
        if kernel.input_dim() != 3 {
            return Err(Error::shape("kernel MLP must take 3-vectors"));
        }
        if kernel.output_dim() != projection.input_dim() {
            return Err(Error::shape(format!(
                "kernel emits {} channels but projection expects {}",
                kernel.output_dim(),
                projection.input_dim()
            )));
        }
        if k == 0 || d == 0 {
            return Err(Error::invalid("k and d must be positive"));
        }
        Ok(Self {
            kernel,
            projection,
            k,
            d,
        })
    }

    pub fn in_features(&self) -> usize {
        self.kernel.output_dim()
    }

    pub fn out_features(&self) -> usize {
        self.projection.output_dim()
    }
}

impl Parameterized for PointConvLayer {
    fn parameter_count(&self) -> usize {
        self.kernel.parameter_count() + self.projection.parameter_count()
    }

    fn write_parameters(&self, out: &mut Vec<f64>) {
        self.kernel.write_parameters(out);
        self.projection.write_parameters(out);
    }

    fn read_parameters(&mut self, src: &[f64]) -> usize {
        let used = self.kernel.read_parameters(src);
        used + self.projection.read_parameters(&src[used..])
    }

    fn zeros_like(&self) -> Self {
        Self {
            kernel: self.kernel.zeros_like(),
            projection: self.projection.zeros_like(),
            k: self.k,
            d: self.d,
        }
    }
}

fn relative_positions(positions: &[[f64; 3]], set: &[usize]) -> Matrix {
    let center = positions[set[0]];
    let mut rel = Matrix::zeros(set.len(), 3);
    for (r, &j) in set.iter().enumerate() {
        let p = positions[j];
        rel.row_mut(r)
            .copy_from_slice(&[center[0] - p[0], center[1] - p[1], center[2] - p[2]]);
    }
    rel
}

pub fn layer_forward(
    layer: &PointConvLayer,
    positions: &Arc<Vec<[f64; 3]>>,
    features: &Matrix,
    neighborhoods: &Arc<Neighborhoods>,
    valid: &[bool],
) -> Result<(Matrix, LayerTape)> {
    let n = positions.len();
    let f_in = layer.in_features();
    let f_out = layer.out_features();
    if features.shape() != (n, f_in) {
        return Err(Error::shape(format!(
            "layer expects {n}x{f_in} features, got {}x{}",
            features.rows(),
            features.cols()
        )));
    }
    if valid.len() != n {
        return Err(Error::shape("validity mask length differs from point count"));
    }
    neighborhoods.check_against(valid)?;
    if neighborhoods.k() != layer.k || neighborhoods.d() != layer.d {
        return Err(Error::shape(format!(
            "neighborhoods built for (k={}, d={}) but layer uses (k={}, d={})",
            neighborhoods.k(),
            neighborhoods.d(),
            layer.k,
            layer.d
        )));
    }
    if !features.is_finite() {
        return Err(Error::NonFinite("layer input features".into()));
    }

    let rows: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if !valid[i] {
                return Ok(None);
            }
            let set = neighborhoods.set(i);
            let kernel = layer.kernel.predict(&relative_positions(positions, set))?;
            let norm = 1.0 / set.len() as f64;
            let mut a = vec![0.0; f_in];
            for (r, &j) in set.iter().enumerate() {
                for ((acc, &f), &g) in a.iter_mut().zip(features.row(j)).zip(kernel.row(r)) {
                    *acc += f * g;
                }
            }
            for v in &mut a {
                *v *= norm;
            }
            let mut z = vec![0.0; f_out];
            layer.projection.apply_row(&a, &mut z);
            Ok(Some((a, z)))
        })
        .collect::<Result<_>>()?;

    let mut aggregated = Matrix::zeros(n, f_in);
    let mut pre_activation = Matrix::zeros(n, f_out);
    let mut output = Matrix::zeros(n, f_out);
    for (i, row) in rows.into_iter().enumerate() {
        if let Some((a, z)) = row {
            aggregated.row_mut(i).copy_from_slice(&a);
            for (o, &zv) in output.row_mut(i).iter_mut().zip(&z) {
                *o = zv.max(0.0);
            }
            pre_activation.row_mut(i).copy_from_slice(&z);
        }
    }

    Ok((
        output,
        LayerTape {
            positions: Arc::clone(positions),
            features: features.clone(),
            aggregated,
            pre_activation,
            neighborhoods: Arc::clone(neighborhoods),
            valid: valid.to_vec(),
        },
    ))
}

/// Gradients of one layer: parameter gradients (laid out like the layer) and
/// the gradient with respect to the input features.
pub fn layer_backward(
    layer: &PointConvLayer,
    tape: &LayerTape,
    output_grad: &Matrix,
) -> Result<(PointConvLayer, Matrix)> {
    let n = tape.valid.len();
    let f_in = layer.in_features();
    let f_out = layer.out_features();
    if output_grad.shape() != (n, f_out) {
        return Err(Error::shape(format!(
            "output gradient is {}x{}, expected {n}x{f_out}",
            output_grad.rows(),
            output_grad.cols()
        )));
    }
    if tape.features.cols() != f_in || tape.pre_activation.cols() != f_out {
        return Err(Error::shape("tape does not belong to this layer"));
    }

    type Scatter = Vec<(usize, Vec<f64>)>;
    let chunks: Vec<(PointConvLayer, Scatter)> = (0..n.div_ceil(BACKWARD_CHUNK))
        .into_par_iter()
        .map(|c| -> Result<(PointConvLayer, Scatter)> {
            let mut grads = layer.zeros_like();
            let mut scatter = Vec::new();
            let start = c * BACKWARD_CHUNK;
            for i in start..(start + BACKWARD_CHUNK).min(n) {
                if !tape.valid[i] {
                    continue;
                }
                let dz: Vec<f64> = output_grad
                    .row(i)
                    .iter()
                    .zip(tape.pre_activation.row(i))
                    .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                    .collect();
                if dz.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let mut da = vec![0.0; f_in];
                layer.projection.backward_row(
                    tape.aggregated.row(i),
                    &dz,
                    &mut grads.projection,
                    Some(&mut da),
                );

                let set = tape.neighborhoods.set(i);
                let norm = 1.0 / set.len() as f64;
                let (kernel, kernel_tape) =
                    layer.kernel.forward(&relative_positions(&tape.positions, set))?;
                let mut kernel_grad = Matrix::zeros(set.len(), f_in);
                for (r, &j) in set.iter().enumerate() {
                    let f = tape.features.row(j);
                    let g = kernel.row(r);
                    let dg = kernel_grad.row_mut(r);
                    let mut df = vec![0.0; f_in];
                    for c in 0..f_in {
                        let s = da[c] * norm;
                        dg[c] = s * f[c];
                        df[c] = s * g[c];
                    }
                    scatter.push((j, df));
                }
                layer
                    .kernel
                    .backward_into(&kernel_tape, &kernel_grad, &mut grads.kernel, false)?;
            }
            Ok((grads, scatter))
        })
        .collect::<Result<_>>()?;

    let mut grads = layer.zeros_like();
    let mut input_grad = Matrix::zeros(n, f_in);
    for (partial, scatter) in chunks {
        grads.accumulate(&partial);
        for (j, df) in scatter {
            for (dst, v) in input_grad.row_mut(j).iter_mut().zip(df) {
                *dst += v;
            }
        }
    }
    Ok((grads, input_grad))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::pointcloud::PointCloud;
    use crate::spatial::SpatialIndex;

    fn random_cloud(n: usize, f: usize, seed: u64) -> (Arc<Vec<[f64; 3]>>, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let feats = (0..n * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (Arc::new(positions), Matrix::from_vec(n, f, feats).unwrap())
    }

    fn neighborhoods(positions: &[[f64; 3]], k: usize, d: usize) -> Arc<Neighborhoods> {
        let cloud = PointCloud::from_positions(positions.to_vec()).unwrap();
        let index = SpatialIndex::build(&cloud).unwrap();
        Arc::new(Neighborhoods::dilated(&index, k, d).unwrap())
    }

    #[test]
    fn constant_kernel_averages_features() {
        let (pos, feats) = random_cloud(10, 2, 1);
        let feats = Matrix::from_vec(10, 2, feats.data().iter().map(|v| v.abs()).collect()).unwrap();
        let mut kernel = Mlp::zeros(&[3, 4, 2]).unwrap();
        kernel.layers_mut()[1].bias = vec![1.0, 1.0];
        let projection = Linear {
            weight: Matrix::identity(2),
            bias: vec![0.0; 2],
        };
        let layer = PointConvLayer::new(kernel, projection, 3, 1).unwrap();
        let nb = neighborhoods(&pos, 3, 1);
        let (out, _) = layer_forward(&layer, &pos, &feats, &nb, &[true; 10]).unwrap();
        for i in 0..10 {
            let set = nb.set(i);
            assert_eq!(set[0], i);
            for c in 0..2 {
                let mean = set.iter().map(|&j| feats.get(j, c)).sum::<f64>() / set.len() as f64;
                assert!((out.get(i, c) - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let (pos, feats) = random_cloud(10, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = PointConvLayer::init(2, 3, 8, 3, 1, &mut rng).unwrap();
        let nb = neighborhoods(&pos, 3, 1);
        let (_, tape) = layer_forward(&layer, &pos, &feats, &nb, &[true; 10]).unwrap();
        let (g, dx) = layer_backward(&layer, &tape, &Matrix::zeros(10, 3)).unwrap();
        assert!(g.parameters().iter().all(|&v| v == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_count_by_hand() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = PointConvLayer::init(2, 4, 64, 5, 1, &mut rng).unwrap();
        assert_eq!(
            layer.parameter_count(),
            (3 * 64 + 64) + (64 * 2 + 2) + (2 * 4 + 4)
        );
        assert_eq!(layer.parameter_count(), 398);
    }

    #[test]
    fn rejects_mismatched_neighborhoods() {
        let (pos, feats) = random_cloud(8, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = PointConvLayer::init(2, 2, 4, 3, 1, &mut rng).unwrap();
        let nb = neighborhoods(&pos, 2, 1);
        assert!(layer_forward(&layer, &pos, &feats, &nb, &[true; 8]).is_err());
        let nb = neighborhoods(&pos, 3, 1);
        assert!(layer_forward(&layer, &pos, &Matrix::zeros(8, 3), &nb, &[true; 8]).is_err());
        let mut bad = feats.clone();
        bad.set(0, 0, f64::NAN);
        assert!(matches!(
            layer_forward(&layer, &pos, &bad, &nb, &[true; 8]),
            Err(Error::NonFinite(_))
        ));
    }
}
