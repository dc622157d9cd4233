use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax_rows, loss_and_grad, loss_targets, network_forward_with};
use super::{Mode, Network};
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::nn::{adam_step, AdamState, LrSchedule, Parameterized};
use crate::pointcloud::{random_crop_center, sample_crop, CropSpec, PointCloud};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u64,
    pub crops_per_epoch: u64,
    pub crop: CropSpec,
    pub lr: LrSchedule,
    pub mode: Mode,
    pub seed: u64,
}

/// Optimizer state carried across epochs and resumed runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub adam: AdamState,
    pub step: u64,
    pub epoch: u64,
}

impl TrainState {
    pub fn new(net: &Network) -> Self {
        Self {
            adam: AdamState::new(net.parameter_count()),
            step: 0,
            epoch: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Learning rate at the first step of the epoch.
    pub lr: f64,
    /// Mean training loss over the epoch's crops.
    pub loss: f64,
    pub oacc: f64,
    pub miou: f64,
    pub macc: f64,
    pub steps: u64,
}

const CROP_ATTEMPTS: usize = 16;

/// Draws a training crop: a random cloud, a center uniform in its bounding
/// box, and `crop.point_budget` points without replacement. Centers whose
/// crop would be empty are redrawn.
fn draw_crop(dataset: &[PointCloud], crop: &CropSpec, rng: &mut ChaCha8Rng) -> Result<Option<PointCloud>> {
    for _ in 0..CROP_ATTEMPTS {
        let cloud = &dataset[rng.gen_range(0..dataset.len())];
        let center = random_crop_center(cloud, rng)?;
        let spec = CropSpec {
            seed: rng.gen(),
            ..*crop
        };
        let sample = sample_crop(cloud, center, &spec)?;
        if sample.valid_count() > 0 {
            return Ok(Some(sample));
        }
    }
    Ok(None)
}

/// Trains `net` in place with Adam and staircase learning-rate decay, one
/// crop per step. Each epoch's randomness comes from its own stream of the
/// seed, so a resumed run continues exactly where it stopped.
pub fn train(
    net: &mut Network,
    dataset: &[PointCloud],
    config: &TrainConfig,
    state: Option<TrainState>,
) -> Result<(TrainState, Vec<EpochRecord>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    config.crop.validate()?;
    config.lr.validate()?;
    let classes = net.classes(config.mode);
    for cloud in dataset {
        loss_targets(cloud, config.mode, classes)?;
    }
    let mut state = state.unwrap_or_else(|| TrainState::new(net));
    if state.adam.len() != net.parameter_count() {
        return Err(Error::shape("optimizer state does not match the network"));
    }

    let mut history = Vec::with_capacity(config.epochs as usize);
    let first_epoch = state.epoch;
    for epoch in first_epoch..first_epoch + config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch);
        let lr_at_start = config.lr.lr(state.step);
        let mut cm = ConfusionMatrix::new(classes);
        let mut loss_sum = 0.0;
        let mut steps = 0u64;
        for _ in 0..config.crops_per_epoch {
            let Some(crop) = draw_crop(dataset, &config.crop, &mut rng)? else {
                continue;
            };
            let neighborhoods = net.compute_neighborhoods(&crop)?;
            let out = loss_and_grad(net, &crop, &neighborhoods, config.mode)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss is {} at epoch {epoch}, step {}",
                    out.loss, state.step
                )));
            }
            let (labels, mask) = loss_targets(&crop, config.mode, classes)?;
            cm.update(&argmax_rows(&out.logits), &labels, &mask)?;

            let mut params = net.parameters();
            let lr = config.lr.lr(state.step);
            adam_step(&mut params, &out.grads.parameters(), &mut state.adam, lr).map_err(|e| match e {
                Error::Diverged(msg) => {
                    Error::Diverged(format!("{msg} at epoch {epoch}, step {}", state.step))
                }
                other => other,
            })?;
            net.set_parameters(&params)?;
            state.step += 1;
            loss_sum += out.loss;
            steps += 1;
        }
        state.epoch = epoch + 1;
        let (oacc, miou, macc) = if cm.total() > 0 {
            (cm.oacc()?, cm.miou()?, cm.macc()?)
        } else {
            (0.0, 0.0, 0.0)
        };
        history.push(EpochRecord {
            epoch,
            lr: lr_at_start,
            loss: if steps > 0 { loss_sum / steps as f64 } else { 0.0 },
            oacc,
            miou,
            macc,
            steps,
        });
    }
    Ok((state, history))
}

/// Confusion matrix of `net` over whole clouds (no cropping).
pub fn evaluate(net: &Network, clouds: &[PointCloud], mode: Mode) -> Result<ConfusionMatrix> {
    let classes = net.classes(mode);
    let mut cm = ConfusionMatrix::new(classes);
    for cloud in clouds {
        let (labels, mask) = loss_targets(cloud, mode, classes)?;
        let neighborhoods = net.compute_neighborhoods(cloud)?;
        let (logits, _) = network_forward_with(net, cloud, &neighborhoods, mode)?;
        cm.update(&argmax_rows(&logits), &labels, &mask)?;
    }
    Ok(cm)
}
