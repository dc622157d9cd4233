use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{layer_backward, layer_forward, LayerTape, PointConvLayer};
use super::LayerNeighborhoods;
use crate::error::{Error, Result};
use crate::nn::{
    softmax_cross_entropy, Checkpoint, Matrix, Mlp, MlpTape, Parameterized, Section, TensorShape,
};
use crate::pointcloud::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Segmentation,
    Classification,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segmentation" | "seg" => Ok(Mode::Segmentation),
            "classification" | "cls" => Ok(Mode::Classification),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub f_out: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub d: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Input feature channels (F_in of the first layer).
    pub in_features: usize,
    pub layers: Vec<LayerSpec>,
    /// Segmentation classes K.
    pub seg_classes: usize,
    /// Classification classes C.
    pub cls_classes: usize,
    #[serde(default = "default_kernel_hidden")]
    pub kernel_hidden: usize,
    #[serde(default = "default_head_hidden")]
    pub head_hidden: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_kernel_hidden() -> usize {
    64
}

fn default_head_hidden() -> Vec<usize> {
    vec![256]
}

impl NetworkConfig {
    /// Seven layers of 64 channels, all with the same `(k, d)`.
    pub fn uniform(in_features: usize, depth: usize, width: usize, k: usize, d: usize) -> Self {
        Self {
            in_features,
            layers: vec![LayerSpec { f_out: width, k, d }; depth],
            seg_classes: 13,
            cls_classes: 40,
            kernel_hidden: default_kernel_hidden(),
            head_hidden: default_head_hidden(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_features == 0 {
            return Err(Error::invalid("in_features must be positive"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("network needs at least one point convolution"));
        }
        for (l, s) in self.layers.iter().enumerate() {
            if s.f_out == 0 || s.k == 0 || s.d == 0 {
                return Err(Error::invalid(format!(
                    "layer {l}: f_out, k and d must be positive"
                )));
            }
        }
        if self.seg_classes == 0 || self.cls_classes == 0 {
            return Err(Error::invalid("class counts must be positive"));
        }
        if self.kernel_hidden == 0 || self.head_hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn skip_dim(&self) -> usize {
        self.layers.iter().map(|l| l.f_out).sum()
    }

    pub fn neighborhood_specs(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.k, l.d)).collect()
    }
}

/// Stacked point convolutions whose outputs are concatenated per point
/// (skip features) and max-pooled over valid points (global feature).
///
/// * segmentation head: `[skip_i ∥ global] → … → K` for every valid point
/// * classification head: `global → … → C`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    config: NetworkConfig,
    pub layers: Vec<PointConvLayer>,
    pub seg_head: Mlp,
    pub cls_head: Mlp,
}

/// Gradients share the parameter layout of the network.
pub type NetworkGrads = Network;

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut f_in = config.in_features;
        for spec in &config.layers {
            layers.push(PointConvLayer::init(
                f_in,
                spec.f_out,
                config.kernel_hidden,
                spec.k,
                spec.d,
                &mut rng,
            )?);
            f_in = spec.f_out;
        }
        let skip = config.skip_dim();
        let head_dims = |input: usize, output: usize| {
            let mut dims = vec![input];
            dims.extend(&config.head_hidden);
            dims.push(output);
            dims
        };
        let seg_head = Mlp::init_with(&head_dims(2 * skip, config.seg_classes), &mut rng)?;
        let cls_head = Mlp::init_with(&head_dims(skip, config.cls_classes), &mut rng)?;
        Ok(Self {
            config,
            layers,
            seg_head,
            cls_head,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn classes(&self, mode: Mode) -> usize {
        match mode {
            Mode::Segmentation => self.config.seg_classes,
            Mode::Classification => self.config.cls_classes,
        }
    }

    pub fn compute_neighborhoods(&self, cloud: &PointCloud) -> Result<LayerNeighborhoods> {
        LayerNeighborhoods::compute(cloud, &self.config.neighborhood_specs())
    }

    /// Parameter tensors in flattening order.
    pub fn shape_manifest(&self) -> Vec<TensorShape> {
        let mut shapes = Vec::new();
        let mlp = |prefix: String, m: &Mlp, shapes: &mut Vec<TensorShape>| {
            for (i, l) in m.layers().iter().enumerate() {
                shapes.push(TensorShape::new(
                    format!("{prefix}.{i}.weight"),
                    vec![l.output_dim(), l.input_dim()],
                ));
                shapes.push(TensorShape::new(
                    format!("{prefix}.{i}.bias"),
                    vec![l.output_dim()],
                ));
            }
        };
        for (l, layer) in self.layers.iter().enumerate() {
            mlp(format!("conv{l}.kernel"), &layer.kernel, &mut shapes);
            let p = &layer.projection;
            shapes.push(TensorShape::new(
                format!("conv{l}.projection.weight"),
                vec![p.output_dim(), p.input_dim()],
            ));
            shapes.push(TensorShape::new(
                format!("conv{l}.projection.bias"),
                vec![p.output_dim()],
            ));
        }
        mlp("seg_head".into(), &self.seg_head, &mut shapes);
        mlp("cls_head".into(), &self.cls_head, &mut shapes);
        shapes
    }

    /// Checkpoint holding the parameters; the network config is stored under
    /// `metadata.network` and `extra` is merged into the metadata.
    pub fn to_checkpoint(&self, extra: serde_json::Value, sections: Vec<Section>) -> Result<Checkpoint> {
        let mut metadata = serde_json::json!({ "network": self.config });
        if let (Some(dst), serde_json::Value::Object(src)) = (metadata.as_object_mut(), extra) {
            dst.extend(src);
        }
        let mut all = vec![Section {
            name: "params".into(),
            values: self.parameters(),
        }];
        all.extend(sections);
        let ck = Checkpoint {
            shapes: self.shape_manifest(),
            sections: all,
            metadata,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: NetworkConfig = serde_json::from_value(
            ck.metadata
                .get("network")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("metadata lacks `network`".into()))?,
        )?;
        let mut net = Network::new(config)?;
        if ck.shapes != net.shape_manifest() {
            return Err(Error::Checkpoint(
                "shape manifest does not match network config".into(),
            ));
        }
        let params = ck
            .section("params")
            .ok_or_else(|| Error::Checkpoint("missing params section".into()))?;
        net.set_parameters(params)?;
        Ok(net)
    }
}

impl Parameterized for Network {
    fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(Parameterized::parameter_count)
            .sum::<usize>()
            + self.seg_head.parameter_count()
            + self.cls_head.parameter_count()
    }

    fn write_parameters(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.write_parameters(out);
        }
        self.seg_head.write_parameters(out);
        self.cls_head.write_parameters(out);
    }

    fn read_parameters(&mut self, src: &[f64]) -> usize {
        let mut used = 0;
        for l in &mut self.layers {
            used += l.read_parameters(&src[used..]);
        }
        used += self.seg_head.read_parameters(&src[used..]);
        used + self.cls_head.read_parameters(&src[used..])
    }

    fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            layers: self.layers.iter().map(Parameterized::zeros_like).collect(),
            seg_head: self.seg_head.zeros_like(),
            cls_head: self.cls_head.zeros_like(),
        }
    }
}

pub fn parameter_count(net: &Network) -> usize {
    net.parameter_count()
}

/// Per-layer outputs of the convolution stack.
#[derive(Clone, Debug)]
pub struct TrunkOutput {
    pub outputs: Vec<Matrix>,
    tapes: Vec<LayerTape>,
}

#[derive(Clone, Debug)]
pub struct NetworkTape {
    mode: Mode,
    trunk: TrunkOutput,
    valid: Vec<bool>,
    /// Row of the point that attains the global max, per skip channel.
    argmax: Vec<usize>,
    head_tape: MlpTape,
    /// Valid rows fed to the segmentation head, in order.
    head_rows: Vec<usize>,
}

impl NetworkTape {
    pub fn trunk(&self) -> &TrunkOutput {
        &self.trunk
    }
}

pub fn trunk_forward(
    net: &Network,
    cloud: &PointCloud,
    neighborhoods: &LayerNeighborhoods,
) -> Result<TrunkOutput> {
    if cloud.valid_count() == 0 {
        return Err(Error::EmptyInput("cloud has no valid points".into()));
    }
    if cloud.feature_dim() != net.config.in_features {
        return Err(Error::shape(format!(
            "network expects {} input features, cloud has {}",
            net.config.in_features,
            cloud.feature_dim()
        )));
    }
    if neighborhoods.len() != net.depth() {
        return Err(Error::shape(format!(
            "{} neighborhood layers for a {}-layer network",
            neighborhoods.len(),
            net.depth()
        )));
    }
    let positions = Arc::new(cloud.positions().to_vec());
    let mut x = cloud.features().clone();
    let mut outputs = Vec::with_capacity(net.depth());
    let mut tapes = Vec::with_capacity(net.depth());
    for (l, layer) in net.layers.iter().enumerate() {
        let (y, tape) = layer_forward(layer, &positions, &x, neighborhoods.layer(l), cloud.valid())?;
        tapes.push(tape);
        outputs.push(y.clone());
        x = y;
    }
    Ok(TrunkOutput { outputs, tapes })
}

/// Backpropagates per-layer output gradients through the stack. Returns the
/// parameter gradients of the layers and the gradient of the input features.
pub fn trunk_backward(
    net: &Network,
    trunk: &TrunkOutput,
    mut output_grads: Vec<Matrix>,
) -> Result<(Vec<PointConvLayer>, Matrix)> {
    if output_grads.len() != net.depth() {
        return Err(Error::shape("one output gradient per layer is required"));
    }
    let mut layer_grads = Vec::with_capacity(net.depth());
    let mut input_grad = None;
    for l in (0..net.depth()).rev() {
        let (g, dx) = layer_backward(&net.layers[l], &trunk.tapes[l], &output_grads[l])?;
        layer_grads.push(g);
        if l > 0 {
            output_grads[l - 1].add_assign(&dx)?;
        } else {
            input_grad = Some(dx);
        }
    }
    layer_grads.reverse();
    Ok((layer_grads, input_grad.expect("network has at least one layer")))
}

fn skip_features(trunk: &TrunkOutput, n: usize) -> Matrix {
    let dim: usize = trunk.outputs.iter().map(Matrix::cols).sum();
    let mut skip = Matrix::zeros(n, dim);
    for i in 0..n {
        let row = skip.row_mut(i);
        let mut off = 0;
        for out in &trunk.outputs {
            row[off..off + out.cols()].copy_from_slice(out.row(i));
            off += out.cols();
        }
    }
    skip
}

/// Logits (`N×K` for segmentation with zero padding rows, `1×C` for
/// classification) and the tape for [`network_backward`].
pub fn network_forward_with(
    net: &Network,
    cloud: &PointCloud,
    neighborhoods: &LayerNeighborhoods,
    mode: Mode,
) -> Result<(Matrix, NetworkTape)> {
    let trunk = trunk_forward(net, cloud, neighborhoods)?;
    let n = cloud.len();
    let skip = skip_features(&trunk, n);
    let dim = skip.cols();

    let mut global = vec![f64::NEG_INFINITY; dim];
    let mut argmax = vec![0usize; dim];
    for i in cloud.valid_indices() {
        for (c, &v) in skip.row(i).iter().enumerate() {
            if v > global[c] {
                global[c] = v;
                argmax[c] = i;
            }
        }
    }

    match mode {
        Mode::Segmentation => {
            let head_rows: Vec<usize> = cloud.valid_indices().collect();
            let mut input = Matrix::zeros(head_rows.len(), 2 * dim);
            for (r, &i) in head_rows.iter().enumerate() {
                let row = input.row_mut(r);
                row[..dim].copy_from_slice(skip.row(i));
                row[dim..].copy_from_slice(&global);
            }
            let (out, head_tape) = net.seg_head.forward(&input)?;
            let mut logits = Matrix::zeros(n, net.config.seg_classes);
            for (r, &i) in head_rows.iter().enumerate() {
                logits.row_mut(i).copy_from_slice(out.row(r));
            }
            let tape = NetworkTape {
                mode,
                trunk,
                valid: cloud.valid().to_vec(),
                argmax,
                head_tape,
                head_rows,
            };
            Ok((logits, tape))
        }
        Mode::Classification => {
            let input = Matrix::from_vec(1, dim, global)?;
            let (logits, head_tape) = net.cls_head.forward(&input)?;
            let tape = NetworkTape {
                mode,
                trunk,
                valid: cloud.valid().to_vec(),
                argmax,
                head_tape,
                head_rows: Vec::new(),
            };
            Ok((logits, tape))
        }
    }
}

pub fn network_forward(net: &Network, cloud: &PointCloud, mode: Mode) -> Result<(Matrix, NetworkTape)> {
    let neighborhoods = net.compute_neighborhoods(cloud)?;
    network_forward_with(net, cloud, &neighborhoods, mode)
}

/// Parameter gradients and input-feature gradient for a logit gradient.
pub fn network_backward(
    net: &Network,
    tape: &NetworkTape,
    logits_grad: &Matrix,
) -> Result<(NetworkGrads, Matrix)> {
    let n = tape.valid.len();
    let dim = net.config.skip_dim();
    let mut grads = net.zeros_like();
    let mut skip_grad = Matrix::zeros(n, dim);
    let mut global_grad = vec![0.0; dim];

    match tape.mode {
        Mode::Segmentation => {
            if logits_grad.shape() != (n, net.config.seg_classes) {
                return Err(Error::shape("segmentation logit gradient has the wrong shape"));
            }
            let mut head_grad = Matrix::zeros(tape.head_rows.len(), net.config.seg_classes);
            for (r, &i) in tape.head_rows.iter().enumerate() {
                head_grad.row_mut(r).copy_from_slice(logits_grad.row(i));
            }
            let dx = net
                .seg_head
                .backward_into(&tape.head_tape, &head_grad, &mut grads.seg_head, true)?
                .expect("input gradient requested");
            for (r, &i) in tape.head_rows.iter().enumerate() {
                let row = dx.row(r);
                skip_grad.row_mut(i).copy_from_slice(&row[..dim]);
                for (g, v) in global_grad.iter_mut().zip(&row[dim..]) {
                    *g += v;
                }
            }
        }
        Mode::Classification => {
            if logits_grad.shape() != (1, net.config.cls_classes) {
                return Err(Error::shape("classification logit gradient has the wrong shape"));
            }
            let dx = net
                .cls_head
                .backward_into(&tape.head_tape, logits_grad, &mut grads.cls_head, true)?
                .expect("input gradient requested");
            global_grad.copy_from_slice(dx.row(0));
        }
    }

    for (c, &g) in global_grad.iter().enumerate() {
        let i = tape.argmax[c];
        let v = skip_grad.get(i, c);
        skip_grad.set(i, c, v + g);
    }

    let mut output_grads = Vec::with_capacity(net.depth());
    let mut off = 0;
    for layer in &net.layers {
        let w = layer.out_features();
        let mut g = Matrix::zeros(n, w);
        for i in 0..n {
            g.row_mut(i).copy_from_slice(&skip_grad.row(i)[off..off + w]);
        }
        output_grads.push(g);
        off += w;
    }
    let (layer_grads, input_grad) = trunk_backward(net, &tape.trunk, output_grads)?;
    grads.layers = layer_grads;
    Ok((grads, input_grad))
}

/// Cross-entropy targets for `cloud`: per-point labels masked by validity for
/// segmentation, the shared object label for classification.
pub fn loss_targets(cloud: &PointCloud, mode: Mode, classes: usize) -> Result<(Vec<usize>, Vec<bool>)> {
    match mode {
        Mode::Segmentation => {
            cloud.check_labels(classes)?;
            let labels = cloud.labels().expect("checked above").to_vec();
            Ok((labels, cloud.valid().to_vec()))
        }
        Mode::Classification => {
            let label = cloud
                .class_label()
                .ok_or_else(|| Error::invalid("classification needs one shared label per cloud"))?;
            if label >= classes {
                return Err(Error::invalid(format!("class {label} outside [0, {classes})")));
            }
            Ok((vec![label], vec![true]))
        }
    }
}

pub struct LossOutput {
    pub loss: f64,
    pub logits: Matrix,
    pub grads: NetworkGrads,
}

pub fn loss_and_grad(
    net: &Network,
    cloud: &PointCloud,
    neighborhoods: &LayerNeighborhoods,
    mode: Mode,
) -> Result<LossOutput> {
    let (labels, mask) = loss_targets(cloud, mode, net.classes(mode))?;
    let (logits, tape) = network_forward_with(net, cloud, neighborhoods, mode)?;
    let (loss, logits_grad) = softmax_cross_entropy(&logits, &labels, &mask)?;
    let (grads, _) = network_backward(net, &tape, &logits_grad)?;
    Ok(LossOutput { loss, logits, grads })
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    logits
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (c, &v)| if v > best.1 { (c, v) } else { best },
                )
                .0
        })
        .collect()
}
