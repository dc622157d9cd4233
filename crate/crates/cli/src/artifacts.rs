use std::fs;
use std::path::{Path, PathBuf};

use dpc_core::pointcloud::{load_cloud, CloudFormat, PointCloud};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Version of every JSON document the CLI writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("cannot create {}", dir.display())))
}

/// Pretty JSON with a trailing newline; parent directories are created.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
}

fn is_cloud_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("xyz" | "txt" | "ply")
    )
}

/// Cloud files at `path`: the file itself, or the `.xyz`, `.txt` and `.ply`
/// files of a directory in name order.
pub fn cloud_files(path: &Path) -> CliResult<Vec<PathBuf>> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "data path {} does not exist",
            path.display()
        )));
    }
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(CliError::io(format!("cannot list {}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_cloud_file(p))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no cloud files in {}", path.display())));
    }
    Ok(files)
}

pub fn load_dataset(path: &Path) -> CliResult<Vec<PointCloud>> {
    cloud_files(path)?
        .iter()
        .map(|f| Ok(load_cloud(f, CloudFormat::from_path(f))?))
        .collect()
}
