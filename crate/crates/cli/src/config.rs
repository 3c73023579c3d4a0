//! Declarative run files (TOML, strictly validated).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use unigan::data::LabeledDataset;
use unigan::gan::GanConfig;
use unigan::scm::ScmBenchConfig;

/// Dataset description inside a training run file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum DataSection {
    Ring {
        modes: usize,
        radius: f64,
        sigma: f64,
        n_per_mode: usize,
        seed: u64,
    },
    Grid {
        side: usize,
        spacing: f64,
        sigma: f64,
        n_per_mode: usize,
        seed: u64,
    },
}

impl DataSection {
    pub fn build(&self) -> unigan::Result<LabeledDataset> {
        match *self {
            DataSection::Ring {
                modes,
                radius,
                sigma,
                n_per_mode,
                seed,
            } => unigan::data::make_ring(modes, radius, sigma, n_per_mode, seed),
            DataSection::Grid {
                side,
                spacing,
                sigma,
                n_per_mode,
                seed,
            } => unigan::data::make_grid(side, spacing, sigma, n_per_mode, seed),
        }
    }
}

/// `train-gan` run file: dataset, model, output directory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainRunFile {
    pub out_dir: Option<PathBuf>,
    pub data: DataSection,
    #[serde(default)]
    pub gan: GanConfig,
}

/// `scm-bench` run file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScmRunFile {
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub bench: ScmBenchConfig,
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

/// Pick the output directory: command line wins over the config file.
pub fn resolve_out_dir(cli: Option<&Path>, file: Option<&Path>) -> Result<PathBuf> {
    match (cli, file) {
        (Some(p), _) => Ok(p.to_path_buf()),
        (None, Some(p)) => Ok(p.to_path_buf()),
        (None, None) => bail!("no output directory: pass --out or set out_dir in the config"),
    }
}

/// Echo the fully resolved configuration and a version stamp into the run
/// directory so the run can be reproduced exactly.
pub fn write_run_stamp<T: Serialize>(dir: &Path, resolved: &T) -> Result<()> {
    fs::create_dir_all(dir)?;
    let toml_text = toml::to_string_pretty(resolved).context("serializing resolved config")?;
    fs::write(dir.join("config.toml"), toml_text)?;
    fs::write(
        dir.join("version.txt"),
        format!("unigan {}\n", env!("CARGO_PKG_VERSION")),
    )?;
    Ok(())
}
