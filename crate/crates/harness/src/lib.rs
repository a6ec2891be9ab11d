//! Datasets, training loops, evaluation reports and the experiments built on
//! the voting models, plus the configuration the `deepvote` tool reads.

pub mod config;
pub mod crossval;
pub mod dataset;
mod error;
pub mod eval;
pub mod experiments;
pub mod report;
pub mod similarity;
pub mod train;

use std::path::Path;

pub use config::{Config, ExperimentConfig, ExperimentKind};
pub use dataset::{augment_anonymity, augment_neutrality, generate_dataset, Augmentation, Dataset, Pair};
pub use error::{HarnessError, Result};
pub use eval::EvalReport;

/// Writes `manifest.txt`: the command followed by the fully resolved
/// configuration, which can be passed back with `--config`.
pub fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let text = format!("# deepvote {command}\n{}", cfg.to_config());
    std::fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}
