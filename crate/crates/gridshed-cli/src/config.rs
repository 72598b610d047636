//! Experiment configuration file and its provenance hash.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use gridshed_core::util::sha256_hex;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SacOverrides {
    pub actor_lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub alpha: Option<f64>,
    pub start_steps: Option<usize>,
    pub batch_size: Option<usize>,
}

impl Default for SacOverrides {
    fn default() -> Self {
        SacOverrides { actor_lr: None, critic_lr: None, alpha: None, start_steps: None, batch_size: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: PathBuf,
    pub contingencies: PathBuf,
    pub seeds: Vec<u64>,
    pub dataset_size: usize,
    pub classifiers: Vec<String>,
    pub lambda_grid: Vec<f64>,
    pub episodes: usize,
    pub out_dir: PathBuf,
    /// Number of shed buses (7 on the 68-bus system; smaller cases use fewer).
    #[serde(default = "default_shed_buses")]
    pub shed_buses: usize,
    /// Size of the fixed unsafe evaluation set.
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
    /// Backend comparison (Table-III style) settings.
    #[serde(default = "default_table3_backends")]
    pub table3_backends: Vec<String>,
    #[serde(default = "default_table3_lambda")]
    pub table3_lambda: f64,
    /// Episode budget for the backend comparison (the TDS row is expensive).
    #[serde(default)]
    pub table3_episodes: Option<usize>,
    /// Missing-data fraction for the robustness comparison.
    #[serde(default = "default_mask_fraction")]
    pub mask_fraction: f64,
    /// Desk-scale SAC overrides; paper defaults apply when absent.
    #[serde(default)]
    pub sac: SacOverrides,
}

fn default_shed_buses() -> usize {
    7
}

fn default_eval_points() -> usize {
    100
}

fn default_table3_backends() -> Vec<String> {
    ["tds", "dt", "svm", "mlp", "cnn", "gnn"].iter().map(|s| s.to_string()).collect()
}

fn default_table3_lambda() -> f64 {
    10.0
}

fn default_mask_fraction() -> f64 {
    0.25
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing config JSON")?;
        anyhow::ensure!(!cfg.seeds.is_empty(), "config needs at least one seed");
        anyhow::ensure!(cfg.case.exists(), "case file {} not found", cfg.case.display());
        anyhow::ensure!(
            cfg.contingencies.exists(),
            "contingency file {} not found",
            cfg.contingencies.display()
        );
        let hash = sha256_hex(text.as_bytes());
        Ok((cfg, hash))
    }

    /// Short hash used in CSV provenance columns.
    pub fn short_hash(hash: &str) -> &str {
        &hash[..12.min(hash.len())]
    }
}
