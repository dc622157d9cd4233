use std::path::PathBuf;

use dpc_core::dpc::{evaluate, Mode};
use serde::{Deserialize, Serialize};

use super::train::load_training_checkpoint;
use crate::artifacts::{load_dataset, write_json, SCHEMA_VERSION};
use crate::error::CliResult;

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    /// Defaults to the mode the checkpoint was trained in.
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub mode: Mode,
    pub clouds: usize,
    /// Scored points (segmentation) or clouds (classification).
    pub scored: u64,
    pub miou: f64,
    pub macc: f64,
    pub oacc: f64,
    pub per_class_iou: Vec<Option<f64>>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

pub const METRICS_FILE: &str = "metrics.json";

pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalReport> {
    let loaded = load_training_checkpoint(&args.checkpoint)?;
    let net = loaded.net;
    let mode = args.mode.or(loaded.mode).unwrap_or(Mode::Segmentation);
    let clouds = load_dataset(&args.data)?;
    let cm = evaluate(&net, &clouds, mode)?;
    let metrics = cm.report()?;
    let k = cm.classes();
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        config_hash: loaded.config_hash,
        mode,
        clouds: clouds.len(),
        scored: cm.total(),
        miou: metrics.miou,
        macc: metrics.macc,
        oacc: metrics.oacc,
        per_class_iou: metrics.per_class_iou,
        confusion: (0..k).map(|g| (0..k).map(|p| cm.get(g, p)).collect()).collect(),
    };
    if let Some(out) = &args.out {
        write_json(&out.join(METRICS_FILE), &report)?;
    }
    Ok(report)
}
