use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dpc_core::dpc::{evaluate, train, Network, NetworkConfig};
use dpc_core::nn::Parameterized;
use dpc_core::pointcloud::PointCloud;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bench::{median, time_forward};
use crate::artifacts::{ensure_dir, load_dataset, write_json, SCHEMA_VERSION};
use crate::config::{with_layers, RunConfig};
use crate::error::{CliError, CliResult};

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TEXT: &str = "ablation.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    /// Depth × k sweep at `d = 1`.
    DepthK,
    /// Dilation sweep at fixed depth and k.
    Dilation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: Group,
    pub layers: usize,
    pub k: usize,
    pub d: usize,
    pub forward_ms: Option<f64>,
    pub parameters: Option<usize>,
    pub miou: Option<f64>,
    pub macc: Option<f64>,
    /// Why the cell failed; the other rows are unaffected.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub rows: Vec<AblationRow>,
}

/// `(group, layers, k, d)` of every row in report order.
pub fn grid(config: &RunConfig) -> Vec<(Group, usize, usize, usize)> {
    let a = &config.ablation;
    let mut cells = Vec::new();
    for &layers in &a.depths {
        for &k in &a.ks {
            cells.push((Group::DepthK, layers, k, 1));
        }
    }
    for &d in &a.dilations {
        cells.push((Group::Dilation, a.dilation_depth, a.dilation_k, d));
    }
    cells
}

struct CellResult {
    forward_ms: f64,
    parameters: usize,
    miou: f64,
    macc: f64,
}

fn run_cell(
    config: &RunConfig,
    net_config: NetworkConfig,
    train_set: &[PointCloud],
    eval_set: &[PointCloud],
) -> CliResult<CellResult> {
    net_config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut net = Network::new(net_config)?;
    train(&mut net, train_set, &config.train_config(), None)?;
    let cm = evaluate(&net, eval_set, config.mode)?;
    let samples = time_forward(&net, &eval_set[0], config.ablation.timing_trials)?;
    Ok(CellResult {
        forward_ms: median(&samples),
        parameters: net.parameter_count(),
        miou: cm.miou()?,
        macc: cm.macc()?,
    })
}

/// Trains and evaluates one network per grid cell. Cells run in parallel
/// unless `sequential`; a failing cell is reported in its row.
pub fn cmd_ablate(config: &RunConfig, out: Option<&Path>, sequential: bool) -> CliResult<AblationReport> {
    config.validate()?;
    let train_set = load_dataset(&config.paths.data)?;
    let eval_set = match &config.paths.validation {
        Some(path) => load_dataset(path)?,
        None => train_set.clone(),
    };
    let cells = grid(config);

    let mut unique: Vec<(usize, usize, usize)> = Vec::new();
    for &(_, layers, k, d) in &cells {
        if !unique.contains(&(layers, k, d)) {
            unique.push((layers, k, d));
        }
    }
    let run = |&(layers, k, d): &(usize, usize, usize)| {
        run_cell(
            config,
            with_layers(&config.network_config(), layers, k, d),
            &train_set,
            &eval_set,
        )
        .map_err(|e| e.to_string())
    };
    let results: Vec<Result<CellResult, String>> = if sequential {
        unique.iter().map(run).collect()
    } else {
        unique.par_iter().map(run).collect()
    };

    let rows = cells
        .iter()
        .map(|&(group, layers, k, d)| {
            let at = unique
                .iter()
                .position(|&c| c == (layers, k, d))
                .expect("cell listed");
            match &results[at] {
                Ok(r) => AblationRow {
                    group,
                    layers,
                    k,
                    d,
                    forward_ms: Some(r.forward_ms),
                    parameters: Some(r.parameters),
                    miou: Some(r.miou),
                    macc: Some(r.macc),
                    error: None,
                },
                Err(e) => AblationRow {
                    group,
                    layers,
                    k,
                    d,
                    forward_ms: None,
                    parameters: None,
                    miou: None,
                    macc: None,
                    error: Some(e.clone()),
                },
            }
        })
        .collect();
    let report = AblationReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        rows,
    };
    let dir = out.unwrap_or(&config.paths.reports);
    ensure_dir(dir)?;
    write_json(&dir.join(ABLATION_JSON), &report)?;
    let text_path = dir.join(ABLATION_TEXT);
    fs::write(&text_path, format_table(&report))
        .map_err(CliError::io(format!("cannot write {}", text_path.display())))?;
    Ok(report)
}

/// Fixed-width table of the report rows.
pub fn format_table(report: &AblationReport) -> String {
    let header = [
        "group",
        "layers",
        "k",
        "d",
        "forward_ms",
        "parameters",
        "mIoU",
        "mAcc",
        "error",
    ];
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let body: Vec<[String; 9]> = report
        .rows
        .iter()
        .map(|r| {
            [
                match r.group {
                    Group::DepthK => "depth-k".into(),
                    Group::Dilation => "dilation".into(),
                },
                r.layers.to_string(),
                r.k.to_string(),
                r.d.to_string(),
                opt(r.forward_ms.map(|v| format!("{v:.2}"))),
                opt(r.parameters.map(|v| v.to_string())),
                opt(r.miou.map(|v| format!("{v:.4}"))),
                opt(r.macc.map(|v| format!("{v:.4}"))),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut text = format!("# config_hash {}\n", report.config_hash);
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 || i == 8 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(text, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    text
}
