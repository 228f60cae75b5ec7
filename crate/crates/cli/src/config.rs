use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use unlearn_core::{PipelineConfig, Schema};

use crate::CliError;

/// Contents of a `--config` file: pipeline settings plus an optional schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub schema: Schema,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Seed for weight init, shuffling and random removal.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden layer widths, e.g. `16,8`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long = "matched-fraction")]
    pub matched_fraction: Option<f64>,
    #[arg(long = "random-fraction")]
    pub random_fraction: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long = "kde-grid")]
    pub kde_grid: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
            cfg.random_seed = seed;
        }
        if let Some(h) = &self.hidden {
            cfg.train.hidden_sizes = h.clone();
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.matched_fraction {
            cfg.matched_fraction = v;
        }
        if let Some(v) = self.random_fraction {
            cfg.random_fraction = v;
        }
        if let Some(v) = self.bins {
            cfg.histogram_bins = v;
        }
        if let Some(v) = self.kde_grid {
            cfg.kde_grid_size = v;
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    unlearn_core::json::read_file(path).map_err(|e| CliError::from_core(e).context(format!("reading {}", path.display())))
}

/// Defaults, then the config file, then flag overrides.
pub fn resolve(config: Option<&PathBuf>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(path) => read_json::<RunConfig>(path)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg.pipeline);
    cfg.pipeline.validate().map_err(CliError::from_core)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"train": {"epochs": 7, "learning_rate": 0.01}, "random_fraction": 0.2,
                "schema": {"treatment": "t"}}"#,
        )
        .unwrap();
        let flags = Overrides {
            epochs: Some(3),
            seed: Some(9),
            hidden: Some(vec![4]),
            ..Overrides::default()
        };
        let cfg = resolve(Some(&path), &flags).unwrap();
        assert_eq!(cfg.pipeline.train.epochs, 3);
        assert_eq!(cfg.pipeline.train.learning_rate, 0.01);
        assert_eq!(cfg.pipeline.random_fraction, 0.2);
        assert_eq!(cfg.pipeline.matched_fraction, 0.1);
        assert_eq!(cfg.pipeline.train.seed, 9);
        assert_eq!(cfg.pipeline.random_seed, 9);
        assert_eq!(cfg.pipeline.train.hidden_sizes, vec![4]);
        assert_eq!(cfg.schema.treatment, "t");
        assert_eq!(cfg.schema.outcome, "re78");
    }

    #[test]
    fn invalid_override_is_rejected() {
        let flags = Overrides {
            random_fraction: Some(1.5),
            ..Overrides::default()
        };
        let err = resolve(None, &flags).unwrap_err();
        assert_eq!(err.code, 2);
    }
}
