//! Run settings resolved as: command-line flag, then `--config` JSON file,
//! then built-in default.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

pub const OUT_DIR_ENV: &str = "FREESHAP_OUT_DIR";

/// Keys accepted in a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub method: Option<String>,
    pub iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub target: Option<String>,
    pub empty_policy: Option<String>,
    pub out: Option<PathBuf>,
    pub step: Option<f64>,
    pub steps: Option<Vec<f64>>,
    pub direction: Option<String>,
    pub flip: Option<f64>,
    pub resamples: Option<usize>,
    pub pool: Option<usize>,
    pub n: Option<usize>,
    pub test_size: Option<usize>,
    pub bandwidth: Option<f64>,
    pub kind: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("config {}: {e}", p.display()))
            }
        }
    }
}

/// `flag`, else `file`, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Output directory: flag, then the environment override, then the config
/// file, then the working directory.
pub fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or(file)
        .unwrap_or_else(|| PathBuf::from("."))
}
