use std::path::{Path, PathBuf};

use dpc_core::dpc::{train, EpochRecord, Mode, Network, TrainState};
use dpc_core::nn::{AdamState, Checkpoint, Section};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ensure_dir, load_dataset, write_json, SCHEMA_VERSION};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub schema_version: u32,
    pub config_hash: String,
    /// Optimizer step the run started from (non-zero when resumed).
    pub start_step: u64,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub history_path: PathBuf,
    pub history: History,
    pub state: TrainState,
}

/// Training progress stored next to the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct StoredState {
    step: u64,
    epoch: u64,
    adam_t: u64,
}

pub fn save_training_checkpoint(
    path: &Path,
    net: &Network,
    state: &TrainState,
    config: &RunConfig,
) -> CliResult<()> {
    let metadata = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.hash(),
        "mode": config.mode,
        "run": config.identity(),
        "state": StoredState { step: state.step, epoch: state.epoch, adam_t: state.adam.t },
    });
    let sections = vec![
        Section {
            name: "adam_m".into(),
            values: state.adam.m.clone(),
        },
        Section {
            name: "adam_v".into(),
            values: state.adam.v.clone(),
        },
    ];
    net.to_checkpoint(metadata, sections)?.save(path)?;
    Ok(())
}

pub struct LoadedCheckpoint {
    pub net: Network,
    pub state: TrainState,
    /// Training mode, when recorded.
    pub mode: Option<Mode>,
    /// Config hash, empty when not recorded.
    pub config_hash: String,
}

/// Network, optimizer state and run info from a checkpoint written by
/// `train`. Checkpoints without optimizer sections yield a fresh state.
pub fn load_training_checkpoint(path: &Path) -> CliResult<LoadedCheckpoint> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    let ck = Checkpoint::load(path)?;
    let net = Network::from_checkpoint(&ck)?;
    let mut state = TrainState::new(&net);
    if let (Some(m), Some(v)) = (ck.section("adam_m"), ck.section("adam_v")) {
        let stored: StoredState = serde_json::from_value(
            ck.metadata
                .get("state")
                .cloned()
                .ok_or_else(|| dpc_core::Error::Checkpoint("optimizer sections without state".into()))?,
        )?;
        state = TrainState {
            adam: AdamState {
                m: m.to_vec(),
                v: v.to_vec(),
                t: stored.adam_t,
                ..AdamState::new(m.len())
            },
            step: stored.step,
            epoch: stored.epoch,
        };
    }
    let mode = ck
        .metadata
        .get("mode")
        .and_then(|m| serde_json::from_value(m.clone()).ok());
    let config_hash = ck
        .metadata
        .get("config_hash")
        .and_then(|h| h.as_str())
        .unwrap_or_default()
        .to_string();
    Ok(LoadedCheckpoint {
        net,
        state,
        mode,
        config_hash,
    })
}

/// Trains per `config` (resuming from `paths.resume` when set) and writes the
/// checkpoint and the per-epoch history. `out` replaces both output
/// directories.
pub fn cmd_train(config: &RunConfig, out: Option<&Path>) -> CliResult<TrainOutcome> {
    config.validate()?;
    let dataset = load_dataset(&config.paths.data)?;
    let ckpt_dir = out.unwrap_or(&config.paths.checkpoints);
    let report_dir = out.unwrap_or(&config.paths.reports);
    ensure_dir(ckpt_dir)?;
    ensure_dir(report_dir)?;

    let (mut net, state) = match &config.paths.resume {
        Some(path) => {
            let LoadedCheckpoint { net, state, .. } = load_training_checkpoint(path)?;
            let mut expected = config.network_config();
            expected.seed = net.config().seed;
            if net.config() != &expected {
                return Err(CliError::Usage(format!(
                    "checkpoint {} was trained with a different network config",
                    path.display()
                )));
            }
            (net, state)
        }
        None => {
            let net = Network::new(config.network_config())?;
            let state = TrainState::new(&net);
            (net, state)
        }
    };
    let start_step = state.step;
    let (state, epochs) = train(&mut net, &dataset, &config.train_config(), Some(state))?;

    let checkpoint = ckpt_dir.join(CHECKPOINT_FILE);
    save_training_checkpoint(&checkpoint, &net, &state, config)?;
    let history = History {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        start_step,
        epochs,
    };
    let history_path = report_dir.join(HISTORY_FILE);
    write_json(&history_path, &history)?;
    Ok(TrainOutcome {
        checkpoint,
        history_path,
        history,
        state,
    })
}
