//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use dpc_core::dpc::{Network, NetworkConfig, PointConvLayer};
use dpc_core::nn::{Matrix, Mlp};
use dpc_core::pointcloud::PointCloud;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random cloud in the unit cube. With `grid`, coordinates snap to quarters
/// so that distance ties are common. The last `padding` rows are padding.
pub fn random_cloud(
    rng: &mut ChaCha8Rng,
    valid: usize,
    padding: usize,
    features: usize,
    grid: bool,
) -> PointCloud {
    let n = valid + padding;
    let mut positions = Vec::with_capacity(n);
    let mut feats = Matrix::zeros(n, features);
    for i in 0..n {
        if i < valid {
            let mut p = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            if grid {
                p = p.map(|v| (v * 4.0).floor() / 4.0);
            }
            positions.push(p);
            for c in 0..features {
                feats.set(i, c, rng.gen_range(-1.0..1.0));
            }
        } else {
            positions.push([0.0; 3]);
        }
    }
    let mask = (0..n).map(|i| i < valid).collect();
    PointCloud::new(positions, feats, None, mask).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, cloud: &PointCloud, classes: usize) -> Vec<usize> {
    cloud
        .valid()
        .iter()
        .map(|&v| if v { rng.gen_range(0..classes) } else { 0 })
        .collect()
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

/// Every other valid point sorted by (squared distance, index).
pub fn sorted_others(cloud: &PointCloud, q: usize) -> Vec<(f64, usize)> {
    let p = cloud.positions()[q];
    let mut all: Vec<(f64, usize)> = cloud
        .valid_indices()
        .filter(|&j| j != q)
        .map(|j| (dist2(&p, &cloud.positions()[j]), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

/// Dilated neighbors by full sort: ranks d, 2d, ..., kd (1-based), with the
/// dilation shrunk to floor(M/k) when the cloud is too small.
pub fn dilated_oracle(cloud: &PointCloud, q: usize, k: usize, d: usize) -> Vec<usize> {
    let others = sorted_others(cloud, q);
    let m = others.len();
    let d = if k * d <= m { d } else { (m / k).max(1) };
    (1..=k).map(|r| others[r * d - 1].1).collect()
}

pub fn mlp_oracle(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let n = mlp.layers().len();
    let mut h = x.to_vec();
    for (l, layer) in mlp.layers().iter().enumerate() {
        let mut out = vec![0.0; layer.output_dim()];
        for (r, o) in out.iter_mut().enumerate() {
            let mut s = layer.bias[r];
            for (c, &v) in h.iter().enumerate() {
                s += layer.weight.get(r, c) * v;
            }
            *o = if l + 1 < n { s.max(0.0) } else { s };
        }
        h = out;
    }
    h
}

/// Point convolution by nested loops over explicit aggregation sets.
pub fn layer_oracle(
    layer: &PointConvLayer,
    cloud_pos: &[[f64; 3]],
    x: &Matrix,
    sets: &[Vec<usize>],
) -> Matrix {
    let f_in = x.cols();
    let f_out = layer.projection.output_dim();
    let mut out = Matrix::zeros(x.rows(), f_out);
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let mut a = vec![0.0; f_in];
        for &j in set {
            let rel = [
                cloud_pos[i][0] - cloud_pos[j][0],
                cloud_pos[i][1] - cloud_pos[j][1],
                cloud_pos[i][2] - cloud_pos[j][2],
            ];
            let g = mlp_oracle(&layer.kernel, &rel);
            for (c, ac) in a.iter_mut().enumerate() {
                *ac += x.get(j, c) * g[c];
            }
        }
        for v in &mut a {
            *v /= set.len() as f64;
        }
        for r in 0..f_out {
            let mut s = layer.projection.bias[r];
            for (c, &v) in a.iter().enumerate() {
                s += layer.projection.weight.get(r, c) * v;
            }
            out.set(i, r, s.max(0.0));
        }
    }
    out
}

/// Confusion-matrix scores recomputed per class straight from the
/// prediction/label pairs.
pub struct BruteMetrics {
    pub oacc: f64,
    pub miou: f64,
    pub macc: f64,
}

pub fn brute_metrics(pairs: &[(usize, usize)], classes: usize) -> BruteMetrics {
    let correct = pairs.iter().filter(|(g, p)| g == p).count();
    let mut ious = Vec::new();
    let mut accs = Vec::new();
    for c in 0..classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for &(g, p) in pairs {
            match (g == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        if tp + fp + fn_ > 0 {
            ious.push(tp as f64 / (tp + fp + fn_) as f64);
        }
        if tp + fn_ > 0 {
            accs.push(tp as f64 / (tp + fn_) as f64);
        }
    }
    BruteMetrics {
        oacc: correct as f64 / pairs.len() as f64,
        miou: ious.iter().sum::<f64>() / ious.len() as f64,
        macc: accs.iter().sum::<f64>() / accs.len() as f64,
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Central finite differences of `f` at `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Small network for gradient and equivalence checks.
pub fn small_config(in_features: usize, depth: usize, k: usize, d: usize, seed: u64) -> NetworkConfig {
    let mut config = NetworkConfig::uniform(in_features, depth, 4, k, d);
    config.seg_classes = 3;
    config.cls_classes = 3;
    config.kernel_hidden = 5;
    config.head_hidden = vec![6];
    config.seed = seed;
    config
}

pub fn small_network(in_features: usize, depth: usize, k: usize, d: usize, seed: u64) -> Network {
    Network::new(small_config(in_features, depth, k, d, seed)).unwrap()
}
