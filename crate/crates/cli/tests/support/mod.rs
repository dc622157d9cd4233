#![allow(dead_code)]

use std::path::Path;

use dpc_cli::commands::{cmd_gen_data, GenDataArgs, Manifest};
use dpc_cli::config::RunConfig;
use dpc_core::dpc::{LayerSpec, NetworkConfig};
use dpc_core::pointcloud::{CropSpec, SceneKind, SceneOptions};

/// Writes `count` room scenes of `points` points into `dir`.
pub fn rooms(dir: &Path, count: usize, points: usize, seed: u64) -> Manifest {
    cmd_gen_data(&GenDataArgs {
        kind: SceneKind::Rooms,
        seed,
        count,
        out_dir: dir.to_path_buf(),
        options: SceneOptions {
            points,
            ..SceneOptions::for_kind(SceneKind::Rooms)
        },
    })
    .unwrap()
}

/// A two-layer network and short training schedule reading data from
/// `root/data` and writing under `root`.
pub fn tiny_config(root: &Path) -> RunConfig {
    let mut config = RunConfig::default();
    config.network = NetworkConfig {
        layers: vec![LayerSpec { f_out: 8, k: 5, d: 2 }; 2],
        kernel_hidden: 8,
        head_hidden: vec![16],
        ..config.network
    };
    config.training.epochs = 3;
    config.training.crops_per_epoch = 4;
    config.training.crop = CropSpec {
        side_length: 2.0,
        point_budget: 256,
        seed: 0,
    };
    config.training.lr.lr0 = 3e-3;
    config.seed = 7;
    config.paths.data = root.join("data");
    config.paths.checkpoints = root.join("checkpoints");
    config.paths.reports = root.join("reports");
    config
}
