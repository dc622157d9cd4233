//! Run configuration: one JSON document drives training, evaluation and
//! ablation. Unknown keys are rejected; every field has a default, so `{}` is
//! a complete config.

use std::fs;
use std::path::{Path, PathBuf};

use dpc_core::dpc::{LayerSpec, Mode, NetworkConfig, TrainConfig};
use dpc_core::nn::LrSchedule;
use dpc_core::pointcloud::{CropSpec, ROOM_CLASSES, SHAPE_CLASSES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    /// `network.seed` is ignored; the network is initialized from `seed`.
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    pub seed: u64,
    pub paths: Paths,
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: u64,
    pub crops_per_epoch: u64,
    pub crop: CropSpec,
    pub lr: LrConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrConfig {
    pub lr0: f64,
    pub decay_factor: f64,
    /// Steps between decays; one epoch when absent.
    pub decay_steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// A cloud file or a directory of `.xyz` / `.ply` files.
    pub data: PathBuf,
    /// Evaluation data for `ablate`; the training data when absent.
    pub validation: Option<PathBuf>,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    /// Checkpoint to resume training from.
    pub resume: Option<PathBuf>,
}

/// Sweep grid. Every `depths × ks` cell runs at `d = 1`; the dilation rows
/// run at `dilation_depth × dilation_k` for each entry of `dilations`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub depths: Vec<usize>,
    pub ks: Vec<usize>,
    pub dilation_depth: usize,
    pub dilation_k: usize,
    pub dilations: Vec<usize>,
    /// Forward passes timed per cell; the median is reported.
    pub timing_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut network = NetworkConfig::uniform(3, 7, 64, 20, 8);
        network.seg_classes = ROOM_CLASSES;
        network.cls_classes = SHAPE_CLASSES;
        Self {
            mode: Mode::Segmentation,
            network,
            training: TrainingConfig::default(),
            seed: 0,
            paths: Paths::default(),
            ablation: AblationConfig::default(),
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            crops_per_epoch: 16,
            crop: CropSpec::default(),
            lr: LrConfig::default(),
        }
    }
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay_factor: 0.7,
            decay_steps: None,
        }
    }
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data"),
            validation: None,
            checkpoints: PathBuf::from("checkpoints"),
            reports: PathBuf::from("reports"),
            resume: None,
        }
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            depths: vec![3, 5, 7],
            ks: vec![5, 10, 20],
            dilation_depth: 7,
            dilation_k: 20,
            dilations: vec![1, 2, 8, 16],
            timing_trials: 3,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |e: dpc_core::Error| CliError::Usage(e.to_string());
        self.network_config().validate().map_err(usage)?;
        let train = self.train_config();
        train.crop.validate().map_err(usage)?;
        train.lr.validate().map_err(usage)?;
        if self.training.crops_per_epoch == 0 {
            return Err(CliError::Usage(
                "training.crops_per_epoch must be positive".into(),
            ));
        }
        let a = &self.ablation;
        if a.timing_trials == 0 {
            return Err(CliError::Usage("ablation.timing_trials must be positive".into()));
        }
        let zero = |v: &[usize]| v.contains(&0);
        if zero(&a.depths) || zero(&a.ks) || zero(&a.dilations) || a.dilation_depth == 0 || a.dilation_k == 0
        {
            return Err(CliError::Usage("ablation grid entries must be positive".into()));
        }
        Ok(())
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            seed: self.seed,
            ..self.network.clone()
        }
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            lr0: self.training.lr.lr0,
            decay_factor: self.training.lr.decay_factor,
            decay_steps: self
                .training
                .lr
                .decay_steps
                .unwrap_or(self.training.crops_per_epoch.max(1)),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            crops_per_epoch: self.training.crops_per_epoch,
            crop: self.training.crop,
            lr: self.lr_schedule(),
            mode: self.mode,
            seed: self.seed,
        }
    }

    /// The config minus file locations, which do not change results.
    pub fn identity(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("paths");
            obj.insert("network".into(), serde_json::json!(self.network_config()));
        }
        v
    }

    pub fn hash(&self) -> String {
        hash_json(&self.identity())
    }
}

/// Hex SHA-256 of the compact JSON encoding.
pub fn hash_json(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json value serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A network with the given layer plan and the head/kernel settings of `base`.
pub fn with_layers(base: &NetworkConfig, depth: usize, k: usize, d: usize) -> NetworkConfig {
    let width = base.layers.first().map_or(64, |l| l.f_out);
    NetworkConfig {
        layers: vec![LayerSpec { f_out: width, k, d }; depth],
        ..base.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let config: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, RunConfig::default());
        config.validate().unwrap();
        assert_eq!(config.network.layers.len(), 7);
        assert!(config.network.layers.iter().all(|l| l.k == 20 && l.d == 8));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"epochs": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"training": {"epoch": 3}}"#).is_err());
    }

    #[test]
    fn hash_ignores_paths_and_network_seed() {
        let base = RunConfig::default();
        let mut moved = base.clone();
        moved.paths.data = PathBuf::from("elsewhere");
        moved.paths.reports = PathBuf::from("r2");
        moved.network.seed = 99;
        assert_eq!(base.hash(), moved.hash());
        let mut reseeded = base.clone();
        reseeded.seed = 1;
        assert_ne!(base.hash(), reseeded.hash());
        assert_eq!(base.hash().len(), 64);
    }

    #[test]
    fn decay_defaults_to_one_epoch() {
        let mut config = RunConfig::default();
        config.training.crops_per_epoch = 12;
        assert_eq!(config.lr_schedule().decay_steps, 12);
        config.training.lr.decay_steps = Some(5);
        assert_eq!(config.lr_schedule().decay_steps, 5);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let mut config = RunConfig::default();
        config.ablation.dilations = vec![0];
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);
        let mut config = RunConfig::default();
        config.training.lr.decay_factor = 0.0;
        assert_eq!(config.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn with_layers_keeps_width_and_heads() {
        let base = RunConfig::default().network_config();
        let c = with_layers(&base, 3, 5, 2);
        assert_eq!(
            c.layers,
            vec![
                LayerSpec {
                    f_out: 64,
                    k: 5,
                    d: 2
                };
                3
            ]
        );
        assert_eq!(c.head_hidden, base.head_hidden);
    }
}
