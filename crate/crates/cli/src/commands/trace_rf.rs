use std::path::{Path, PathBuf};

use dpc_core::dpc::{LayerNeighborhoods, Network};
use dpc_core::pointcloud::{
    gen_synthetic_scene_with, load_cloud, CloudFormat, PointCloud, SceneKind, SceneOptions,
};
use dpc_core::receptive::{rf_compute, rf_empirical_with, rf_export, rf_stats, ReceptiveField, RfStats};
use serde::{Deserialize, Serialize};

use super::train::load_training_checkpoint;
use crate::artifacts::{ensure_dir, write_json, SCHEMA_VERSION};
use crate::config::{hash_json, RunConfig};
use crate::error::{CliError, CliResult};

/// Where the traced cloud comes from.
#[derive(Clone, Debug)]
pub enum CloudSource {
    File(PathBuf),
    Scene {
        kind: SceneKind,
        seed: u64,
        options: SceneOptions,
    },
}

impl CloudSource {
    pub fn load(&self) -> CliResult<PointCloud> {
        Ok(match self {
            CloudSource::File(path) => load_cloud(path, CloudFormat::from_path(path))?,
            CloudSource::Scene { kind, seed, options } => gen_synthetic_scene_with(*seed, *kind, options)?,
        })
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            CloudSource::File(path) => serde_json::json!({ "file": path }),
            CloudSource::Scene { kind, seed, options } => {
                serde_json::json!({ "scene": kind, "seed": seed, "options": options })
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceRfArgs {
    /// Trained network; the config's untrained network otherwise.
    pub checkpoint: Option<PathBuf>,
    pub config: RunConfig,
    pub cloud: CloudSource,
    pub target: usize,
    /// Layers to trace; all layers when absent.
    pub depth: Option<usize>,
    /// Also compute the gradient-based field of the full network.
    pub empirical: bool,
    pub out_ply: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub size: usize,
    pub within_graph: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub target: usize,
    pub depth: usize,
    /// `(k, d)` of each traced layer, bottom first.
    pub layers: Vec<(usize, usize)>,
    pub stats: RfStats,
    pub empirical: Option<EmpiricalReport>,
    pub ply: PathBuf,
}

/// Stats file written next to a PLY export.
pub fn stats_path(ply: &Path) -> PathBuf {
    ply.with_extension("json")
}

fn check_target(cloud: &PointCloud, target: usize) -> CliResult<()> {
    if target >= cloud.len() || !cloud.valid()[target] {
        return Err(CliError::Usage(format!(
            "target {target} is not a valid point of a {}-point cloud",
            cloud.len()
        )));
    }
    Ok(())
}

pub fn cmd_trace_rf(args: &TraceRfArgs) -> CliResult<TraceReport> {
    let (net, config_hash) = match &args.checkpoint {
        Some(path) => {
            let loaded = load_training_checkpoint(path)?;
            (loaded.net, loaded.config_hash)
        }
        None => {
            args.config.validate()?;
            (Network::new(args.config.network_config())?, args.config.hash())
        }
    };
    let cloud = args.cloud.load()?;
    check_target(&cloud, args.target)?;
    let depth = args.depth.unwrap_or(net.depth());
    if depth > net.depth() {
        return Err(CliError::Usage(format!(
            "depth {depth} exceeds the network's {} layers",
            net.depth()
        )));
    }
    let neighborhoods = net.compute_neighborhoods(&cloud)?;
    let rf = rf_compute(&neighborhoods, args.target, depth)?;
    let stats = rf_stats(&rf, &cloud)?;
    let empirical = if args.empirical {
        let set = rf_empirical_with(&net, &cloud, &neighborhoods, args.target)?;
        let full = rf_compute(&neighborhoods, args.target, net.depth())?;
        Some(EmpiricalReport {
            size: set.len(),
            within_graph: set.is_subset(&full.members),
        })
    } else {
        None
    };

    if let Some(parent) = args.out_ply.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    rf_export(&cloud, &rf, &args.out_ply)?;
    let report = TraceReport {
        schema_version: SCHEMA_VERSION,
        config_hash,
        target: args.target,
        depth,
        layers: rf.layers.clone(),
        stats,
        empirical,
        ply: args.out_ply.clone(),
    };
    write_json(&stats_path(&args.out_ply), &report)?;
    Ok(report)
}

/// Depths of the grid columns.
pub const GRID_DEPTHS: [usize; 5] = [1, 2, 3, 5, 7];
/// `(k, d)` of the grid rows.
pub const GRID_ROWS: [(usize, usize); 6] = [(5, 1), (10, 1), (20, 1), (20, 2), (20, 8), (20, 16)];
pub const GRID_FILE: &str = "grid.json";

#[derive(Clone, Debug)]
pub struct TraceGridArgs {
    pub cloud: CloudSource,
    pub target: usize,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub layers: usize,
    pub k: usize,
    pub d: usize,
    pub stats: RfStats,
    pub ply: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub target: usize,
    /// Row-major: every depth of the first `(k, d)` row, then the next row.
    pub cells: Vec<GridCell>,
}

/// Graph receptive fields of `target` for every `(k, d)` row and depth of the
/// grid, one PLY per cell plus `grid.json`.
pub fn cmd_trace_rf_grid(args: &TraceGridArgs) -> CliResult<GridReport> {
    let cloud = args.cloud.load()?;
    check_target(&cloud, args.target)?;
    let config_hash = hash_json(&serde_json::json!({
        "command": "trace-rf-grid",
        "cloud": args.cloud.describe(),
        "target": args.target,
        "depths": GRID_DEPTHS,
        "rows": GRID_ROWS,
    }));
    ensure_dir(&args.out_dir)?;
    let max_depth = GRID_DEPTHS.iter().copied().max().unwrap_or(0);
    let mut cells = Vec::with_capacity(GRID_DEPTHS.len() * GRID_ROWS.len());
    for &(k, d) in &GRID_ROWS {
        let neighborhoods = LayerNeighborhoods::compute(&cloud, &vec![(k, d); max_depth])?;
        for &layers in &GRID_DEPTHS {
            let rf: ReceptiveField = rf_compute(&neighborhoods, args.target, layers)?;
            let ply = format!("rf_L{layers}_k{k}_d{d}.ply");
            rf_export(&cloud, &rf, args.out_dir.join(&ply))?;
            cells.push(GridCell {
                layers,
                k,
                d,
                stats: rf_stats(&rf, &cloud)?,
                ply,
            });
        }
    }
    let report = GridReport {
        schema_version: SCHEMA_VERSION,
        config_hash,
        target: args.target,
        cells,
    };
    write_json(&args.out_dir.join(GRID_FILE), &report)?;
    Ok(report)
}
