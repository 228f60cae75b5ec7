//! The three-model unlearning experiment.
//!
//! Model 1 is trained on every row. Model 2 is retrained from scratch on the
//! retain set left after matched pair-wise removal, Model 3 on the retain set
//! left after stratified random removal. Retrained models see a standardizer
//! fitted on their own retain rows; all three are then scored on the full
//! dataset through the full-data standardizer so their RMSEs are comparable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::evaluation::{build_report, EvalReport, ReportInputs};
use crate::matching::{
    build_matched_forget, build_random_forget, extract_retain_dataset, nearest_neighbor_pairs,
    MatchedPair, Partition,
};
use crate::model::{train, ModelParams, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub matched_fraction: f64,
    pub random_fraction: f64,
    pub random_seed: u64,
    pub histogram_bins: usize,
    pub kde_grid_size: usize,
    /// Covariates left out of standardization.
    pub unscaled_covariates: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            matched_fraction: 0.1,
            random_fraction: 0.1,
            random_seed: 42,
            histogram_bins: 20,
            kde_grid_size: 512,
            unscaled_covariates: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.matched_fraction > 0.0 && self.matched_fraction <= 1.0) {
            return bad(format!("matched_fraction {} outside (0, 1]", self.matched_fraction));
        }
        if !(self.random_fraction > 0.0 && self.random_fraction < 1.0) {
            return bad(format!("random_fraction {} outside (0, 1)", self.random_fraction));
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins must be >= 2".into());
        }
        if self.kde_grid_size < 16 {
            return bad("kde_grid_size must be >= 16".into());
        }
        Ok(())
    }
}

/// A trained network together with what it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub loss_history: Vec<f64>,
    /// Row ids of the training rows.
    pub training_rows: Vec<usize>,
    /// Standardizer fitted on the training rows.
    pub train_standardizer: Standardizer,
}

impl TrainedModel {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub model1: TrainedModel,
    pub model2: TrainedModel,
    pub model3: TrainedModel,
    /// Full-data standardizer used to score all three models.
    pub standardizer: Standardizer,
    /// Scores of each model on the full dataset, in row order.
    pub scores: [Vec<f64>; 3],
    pub partition_matched: Partition,
    pub partition_random: Partition,
    pub report: EvalReport,
    pub att_full: f64,
    pub att_retain_matched: f64,
}

/// Mean of `outcome[treated] - outcome[control]` over the pairs. Pair
/// members are row ids of `data`.
pub fn estimate_att(data: &Dataset, pairs: &[MatchedPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair list"));
    }
    let pos: HashMap<usize, usize> = data.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let lookup = |id: usize| {
        pos.get(&id).copied().ok_or(Error::IndexOutOfRange {
            index: id,
            len: data.len(),
        })
    };
    let mut total = 0.0;
    for p in pairs {
        total += data.outcome[lookup(p.treated_idx)?] - data.outcome[lookup(p.control_idx)?];
    }
    Ok(total / pairs.len() as f64)
}

fn fit_scaler(data: &Dataset, cfg: &PipelineConfig) -> Result<Standardizer> {
    let excluded = data.covariate_indices(&cfg.unscaled_covariates)?;
    Standardizer::fit_excluding(&data.covariates, &excluded)
}

fn retrain(data: &Dataset, partition: &Partition, cfg: &PipelineConfig) -> Result<TrainedModel> {
    let retain = extract_retain_dataset(data, partition)?;
    let scaler = fit_scaler(&retain, cfg)?;
    let x = scaler.transform(&retain.covariates)?;
    let out = train(&x, &retain.treatment, &cfg.train)?;
    Ok(TrainedModel {
        params: out.params,
        loss_history: out.loss_history,
        training_rows: retain.row_ids,
        train_standardizer: scaler,
    })
}

/// ATT over the matched retain set: every retained treated unit is paired
/// (nearest neighbour on Model 1 scores, without replacement) with a
/// retained control, up to the size of the smaller group.
fn retain_att(data: &Dataset, partition: &Partition, scores: &[f64]) -> Result<f64> {
    let retain = extract_retain_dataset(data, partition)?;
    let pos: HashMap<usize, usize> = data.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let retain_scores: Vec<f64> = retain.row_ids.iter().map(|id| scores[pos[id]]).collect();
    let k = retain.treated_count().min(retain.control_count());
    let pairs: Vec<MatchedPair> = nearest_neighbor_pairs(&retain_scores, &retain.treatment, k)?
        .into_iter()
        .map(|p| MatchedPair {
            treated_idx: retain.row_ids[p.treated_idx],
            control_idx: retain.row_ids[p.control_idx],
            distance: p.distance,
        })
        .collect();
    estimate_att(data, &pairs)
}

pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    data.require_both_groups()?;

    let standardizer = fit_scaler(data, cfg)?;
    let x_full = standardizer.transform(&data.covariates)?;
    let out1 = train(&x_full, &data.treatment, &cfg.train)?;
    let model1 = TrainedModel {
        params: out1.params,
        loss_history: out1.loss_history,
        training_rows: data.row_ids.clone(),
        train_standardizer: standardizer.clone(),
    };
    let scores1 = model1.params.predict(&x_full)?;

    let partition_matched = build_matched_forget(data, &scores1, cfg.matched_fraction)?;
    let partition_random = build_random_forget(data, cfg.random_fraction, cfg.random_seed)?;

    // Training is a pure function of its inputs, so running the two
    // retrains side by side gives the same result as running them in turn.
    let (model2, model3) = std::thread::scope(|s| {
        let h2 = s.spawn(|| retrain(data, &partition_matched, cfg));
        let h3 = s.spawn(|| retrain(data, &partition_random, cfg));
        (
            h2.join().expect("retrain thread panicked"),
            h3.join().expect("retrain thread panicked"),
        )
    });
    let (model2, model3) = (model2?, model3?);

    let scores2 = model2.params.predict(&x_full)?;
    let scores3 = model3.params.predict(&x_full)?;

    let att_full = estimate_att(data, &partition_matched.pairs)?;
    let att_retain_matched = retain_att(data, &partition_matched, &scores1)?;

    let report = build_report(&ReportInputs {
        row_ids: &data.row_ids,
        treatment: &data.treatment,
        scores_model1: &scores1,
        scores_model2: &scores2,
        scores_model3: &scores3,
        partition_matched: &partition_matched,
        partition_random: &partition_random,
        att_full,
        att_retain_matched,
        histogram_bins: cfg.histogram_bins,
        kde_grid_size: cfg.kde_grid_size,
    })?;

    Ok(PipelineResult {
        model1,
        model2,
        model3,
        standardizer,
        scores: [scores1, scores2, scores3],
        partition_matched,
        partition_random,
        report,
        att_full,
        att_retain_matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn outcome_data(outcomes: &[f64], treatment: &[u8]) -> Dataset {
        let n = outcomes.len();
        Dataset::new(
            vec!["x".into()],
            Matrix::zeros(n, 1),
            treatment.to_vec(),
            outcomes.to_vec(),
        )
        .unwrap()
    }

    fn pair(t: usize, c: usize) -> MatchedPair {
        MatchedPair {
            treated_idx: t,
            control_idx: c,
            distance: 0.0,
        }
    }

    #[test]
    fn att_examples() {
        let data = outcome_data(&[10.0, 10.0, 7.0, 7.0], &[1, 0, 1, 0]);
        assert_eq!(estimate_att(&data, &[pair(0, 1), pair(2, 3)]).unwrap(), 0.0);

        let data = outcome_data(&[2000.0, 1000.0, 300.0, 500.0], &[1, 0, 1, 0]);
        assert_eq!(estimate_att(&data, &[pair(0, 1), pair(2, 3)]).unwrap(), 400.0);

        let data = outcome_data(&[5000.0, 3000.0], &[1, 0]);
        assert_eq!(estimate_att(&data, &[pair(0, 1)]).unwrap(), 2000.0);

        assert!(estimate_att(&data, &[]).is_err());
        assert!(estimate_att(&data, &[pair(0, 7)]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        cfg.random_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            histogram_bins: 1,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            kde_grid_size: 8,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_fills_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"matched_fraction": 0.2, "train": {"epochs": 5}}"#).unwrap();
        assert_eq!(cfg.matched_fraction, 0.2);
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.hidden_sizes, vec![16, 8]);
        assert_eq!(cfg.kde_grid_size, 512);
    }
}
