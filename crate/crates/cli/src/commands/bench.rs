use std::path::Path;
use std::time::Instant;

use dpc_core::dpc::{network_forward_with, Mode, Network, NetworkConfig};
use dpc_core::nn::Parameterized;
use dpc_core::pointcloud::{gen_synthetic_scene_with, PointCloud, SceneKind, SceneOptions, ROOM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_json, SCHEMA_VERSION};
use crate::config::hash_json;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchArgs {
    pub points: usize,
    pub k: usize,
    pub d: usize,
    pub layers: usize,
    pub width: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            points: 4092,
            k: 20,
            d: 8,
            layers: 7,
            width: 64,
            trials: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub args: BenchArgs,
    pub parameters: usize,
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
}

pub const BENCH_FILE: &str = "bench.json";

pub fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => s[n / 2],
        _ => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

/// Wall time in milliseconds of `trials` segmentation forward passes, each
/// including the neighborhood search.
pub fn time_forward(net: &Network, cloud: &PointCloud, trials: usize) -> CliResult<Vec<f64>> {
    (0..trials)
        .map(|_| {
            let start = Instant::now();
            let neighborhoods = net.compute_neighborhoods(cloud)?;
            let (logits, _) = network_forward_with(net, cloud, &neighborhoods, Mode::Segmentation)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(logits);
            Ok(ms)
        })
        .collect()
}

/// Times the forward pass of a `layers × width` network with uniform `(k, d)`
/// on a generated room scene of `points` points.
pub fn cmd_bench(args: &BenchArgs, out: Option<&Path>) -> CliResult<BenchReport> {
    if args.trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let mut config = NetworkConfig::uniform(3, args.layers, args.width, args.k, args.d);
    config.seg_classes = ROOM_CLASSES;
    config.seed = args.seed;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let net = Network::new(config)?;
    let options = SceneOptions {
        points: args.points,
        ..SceneOptions::for_kind(SceneKind::Rooms)
    };
    let cloud = gen_synthetic_scene_with(args.seed, SceneKind::Rooms, &options)?;
    let samples_ms = time_forward(&net, &cloud, args.trials)?;
    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        config_hash: hash_json(&serde_json::json!({ "command": "bench", "args": args })),
        args: args.clone(),
        parameters: net.parameter_count(),
        median_ms: median(&samples_ms),
        samples_ms,
    };
    if let Some(dir) = out {
        write_json(&dir.join(BENCH_FILE), &report)?;
    }
    Ok(report)
}
