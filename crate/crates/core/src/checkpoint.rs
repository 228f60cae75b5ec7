//! Model checkpoint files.
//!
//! A checkpoint stores the architecture, per-layer weights (row-major) and
//! biases, the training configuration and final loss, plus the standardizer
//! and covariate names needed to score raw data later.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::json;
use crate::model::{ArchitectureSpec, Layer, ModelParams, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub architecture: ArchitectureSpec,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub train_config: TrainConfig,
    pub final_loss: f64,
    /// Standardizer applied to raw covariates before scoring.
    pub standardizer: Standardizer,
    pub covariate_names: Vec<String>,
}

impl Checkpoint {
    pub fn new(
        params: &ModelParams,
        train_config: &TrainConfig,
        final_loss: f64,
        standardizer: &Standardizer,
        covariate_names: &[String],
    ) -> Self {
        Self {
            architecture: params.architecture(),
            weights: params.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: params.layers.iter().map(|l| l.bias.clone()).collect(),
            train_config: train_config.clone(),
            final_loss,
            standardizer: standardizer.clone(),
            covariate_names: covariate_names.to_vec(),
        }
    }

    /// Rebuilds validated parameters.
    pub fn params(&self) -> Result<ModelParams> {
        self.architecture.validate()?;
        let dims = self.architecture.layer_dims();
        if dims.len() != self.weights.len() || dims.len() != self.biases.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                actual: self.weights.len(),
            });
        }
        let layers = dims
            .into_iter()
            .zip(self.weights.iter().zip(&self.biases))
            .map(|((fan_in, fan_out), (w, b))| Layer {
                fan_in,
                fan_out,
                weights: w.clone(),
                bias: b.clone(),
            })
            .collect();
        let params = ModelParams { layers };
        params.validate()?;
        if self.standardizer.dim() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                actual: self.standardizer.dim(),
            });
        }
        Ok(params)
    }

    /// Standardizes `data` with the stored standardizer and scores every row.
    pub fn score(&self, data: &Dataset) -> Result<Vec<f64>> {
        let params = self.params()?;
        if data.dim() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                actual: data.dim(),
            });
        }
        let x = self.standardizer.transform(&data.covariates)?;
        params.predict(&x)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        json::write_file(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt: Self = json::read_file(path)?;
        ckpt.params()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::model::init_params;

    #[test]
    fn save_load_round_trip_preserves_scores() {
        let arch = ArchitectureSpec::new(2, vec![4, 3]).unwrap();
        let params = init_params(&arch, 9).unwrap();
        let x = Matrix::from_rows(2, &[[1.0, 10.0], [2.0, 30.0], [4.0, 20.0]]).unwrap();
        let scaler = Standardizer::fit(&x).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let data = Dataset::new(names.clone(), x.clone(), vec![1, 0, 1], vec![0.0; 3]).unwrap();
        let ckpt = Checkpoint::new(&params, &TrainConfig::default(), 0.25, &scaler, &names);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.params().unwrap(), params);
        let expected = params.predict(&scaler.transform(&x).unwrap()).unwrap();
        assert_eq!(back.score(&data).unwrap(), expected);

        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["architecture", "weights", "biases", "train_config", "final_loss"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let arch = ArchitectureSpec::new(2, vec![3]).unwrap();
        let params = init_params(&arch, 1).unwrap();
        let scaler = Standardizer {
            means: vec![0.0; 2],
            stds: vec![1.0; 2],
        };
        let mut ckpt = Checkpoint::new(&params, &TrainConfig::default(), 0.1, &scaler, &[]);
        ckpt.weights[0].pop();
        assert!(ckpt.params().is_err());

        let ckpt = Checkpoint::new(&params, &TrainConfig::default(), 0.1, &scaler, &[]);
        let wide = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::zeros(2, 3),
            vec![0, 1],
            vec![0.0; 2],
        )
        .unwrap();
        assert!(matches!(ckpt.score(&wide), Err(Error::DimensionMismatch { .. })));
    }
}
