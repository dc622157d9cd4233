use std::fs;
use std::path::PathBuf;

use dpc_core::pointcloud::{format_xyz, gen_synthetic_scene_with, SceneKind, SceneOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{ensure_dir, write_json, SCHEMA_VERSION};
use crate::config::hash_json;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct GenDataArgs {
    pub kind: SceneKind,
    pub seed: u64,
    pub count: usize,
    pub out_dir: PathBuf,
    pub options: SceneOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub kind: SceneKind,
    pub seed: u64,
    pub options: SceneOptions,
    pub files: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub scene_seed: u64,
    pub points: usize,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `count` scenes as `<kind>_NNNN.xyz` plus `manifest.json`. Scene
/// seeds are drawn from a generator seeded with `seed`.
pub fn cmd_gen_data(args: &GenDataArgs) -> CliResult<Manifest> {
    if args.count == 0 {
        return Err(CliError::Usage("count must be at least 1".into()));
    }
    let hash = hash_json(&serde_json::json!({
        "command": "gen-data",
        "kind": args.kind,
        "seed": args.seed,
        "count": args.count,
        "options": args.options,
    }));
    ensure_dir(&args.out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut files = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let scene_seed: u64 = rng.gen();
        let cloud = gen_synthetic_scene_with(scene_seed, args.kind, &args.options)?;
        let name = format!("{}_{i:04}.xyz", args.kind.name());
        let path = args.out_dir.join(&name);
        let text = format!("# config_hash {hash}\n{}", format_xyz(&cloud)?);
        fs::write(&path, text).map_err(CliError::io(format!("cannot write {}", path.display())))?;
        files.push(ManifestEntry {
            file: name,
            scene_seed,
            points: cloud.valid_count(),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        kind: args.kind,
        seed: args.seed,
        options: args.options,
        files,
    };
    write_json(&args.out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
