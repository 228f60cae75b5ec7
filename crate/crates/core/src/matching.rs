//! Forget/retain partitions.
//!
//! Two strategies build a forget set from a scored dataset:
//!
//! - matched pair-wise removal: greedy 1:1 nearest-neighbour matching on the
//!   propensity score, without replacement. Treated units are visited in
//!   ascending row order; each takes the closest unmatched control, ties going
//!   to the smaller control id.
//! - random removal: a stratified sample of `floor(fraction * group size)`
//!   rows from each treatment group.
//!
//! Indices stored in a [`Partition`] are row ids of the dataset it was built
//! from.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MatchedPairwise,
    Random,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::MatchedPairwise => "matched_pairwise",
            Strategy::Random => "random",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub treated_idx: usize,
    pub control_idx: usize,
    /// `|score(treated) - score(control)|` at selection time.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub strategy: Strategy,
    pub requested_fraction: f64,
    /// Sampling seed; `None` for the matched strategy.
    pub seed: Option<u64>,
    pub forget_indices: BTreeSet<usize>,
    pub retain_indices: BTreeSet<usize>,
    pub pairs: Vec<MatchedPair>,
}

impl Partition {
    /// Verifies disjointness, totality over `data.row_ids` and, for matched
    /// partitions, that the pairs are vertex-disjoint, cross groups and cover
    /// exactly the forget set.
    pub fn check(&self, data: &Dataset) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidConfig(format!("partition: {msg}")));
        if !self.forget_indices.is_disjoint(&self.retain_indices) {
            return invalid("forget and retain overlap");
        }
        let all: BTreeSet<usize> = data.row_ids.iter().copied().collect();
        let union: BTreeSet<usize> = self.forget_indices.union(&self.retain_indices).copied().collect();
        if union != all {
            return invalid("forget and retain do not cover every row");
        }
        let pos = positions(data);
        let label = |id: usize| pos.get(&id).map(|&i| data.treatment[i]);
        match self.strategy {
            Strategy::MatchedPairwise => {
                let mut members = BTreeSet::new();
                for p in &self.pairs {
                    if label(p.treated_idx) != Some(1) || label(p.control_idx) != Some(0) {
                        return invalid("pair does not cross treatment groups");
                    }
                    if !members.insert(p.treated_idx) || !members.insert(p.control_idx) {
                        return invalid("row appears in two pairs");
                    }
                }
                if members != self.forget_indices {
                    return invalid("forget set differs from pair members");
                }
            }
            Strategy::Random => {
                if !self.pairs.is_empty() {
                    return invalid("random partition carries pairs");
                }
            }
        }
        Ok(())
    }
}

fn positions(data: &Dataset) -> HashMap<usize, usize> {
    data.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
}

/// Model scores for every row, in row order.
pub fn score_all(params: &ModelParams, x: &Matrix) -> Result<Vec<f64>> {
    params.predict(x)
}

/// Greedy nearest-neighbour matching without replacement.
///
/// Returned indices are positions into `scores`/`treatment`.
pub fn nearest_neighbor_pairs(
    scores: &[f64],
    treatment: &[u8],
    num_pairs: usize,
) -> Result<Vec<MatchedPair>> {
    if scores.len() != treatment.len() {
        return Err(Error::DimensionMismatch {
            expected: treatment.len(),
            actual: scores.len(),
        });
    }
    if num_pairs == 0 {
        return Err(Error::InvalidConfig("num_pairs must be positive".into()));
    }
    let treated: Vec<usize> = (0..treatment.len()).filter(|&i| treatment[i] == 1).collect();
    let controls: Vec<usize> = (0..treatment.len()).filter(|&i| treatment[i] == 0).collect();
    if treated.is_empty() {
        return Err(Error::EmptyGroup("treated"));
    }
    if controls.is_empty() {
        return Err(Error::EmptyGroup("control"));
    }
    let available = treated.len().min(controls.len());
    if num_pairs > available {
        return Err(Error::NotEnoughCandidates {
            requested: num_pairs,
            available,
        });
    }

    let mut used = vec![false; controls.len()];
    let mut pairs = Vec::with_capacity(num_pairs);
    for &t in treated.iter().take(num_pairs) {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &c) in controls.iter().enumerate() {
            if used[slot] {
                continue;
            }
            let d = (scores[t] - scores[c]).abs();
            // strict comparison keeps the lowest control id on ties
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((slot, d));
            }
        }
        let (slot, distance) = best.expect("at least num_pairs controls remain");
        used[slot] = true;
        pairs.push(MatchedPair {
            treated_idx: t,
            control_idx: controls[slot],
            distance,
        });
    }
    Ok(pairs)
}

fn finish(
    data: &Dataset,
    strategy: Strategy,
    requested_fraction: f64,
    seed: Option<u64>,
    forget: BTreeSet<usize>,
    pairs: Vec<MatchedPair>,
) -> Result<Partition> {
    let retain: BTreeSet<usize> = data
        .row_ids
        .iter()
        .copied()
        .filter(|id| !forget.contains(id))
        .collect();
    let pos = positions(data);
    let mut has = [false; 2];
    for id in &retain {
        has[data.treatment[pos[id]] as usize] = true;
    }
    if !(has[0] && has[1]) {
        return Err(Error::DegenerateRetain {
            strategy: strategy.as_str(),
        });
    }
    Ok(Partition {
        strategy,
        requested_fraction,
        seed,
        forget_indices: forget,
        retain_indices: retain,
        pairs,
    })
}

/// Forget set made of `max(1, floor(fraction * min(#treated, #control)))`
/// matched pairs.
pub fn build_matched_forget(data: &Dataset, scores: &[f64], fraction: f64) -> Result<Partition> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "matched fraction {fraction} outside (0, 1]"
        )));
    }
    data.require_both_groups()?;
    let smaller = data.treated_count().min(data.control_count());
    let num_pairs = ((fraction * smaller as f64).floor() as usize).max(1);
    let pairs: Vec<MatchedPair> = nearest_neighbor_pairs(scores, &data.treatment, num_pairs)?
        .into_iter()
        .map(|p| MatchedPair {
            treated_idx: data.row_ids[p.treated_idx],
            control_idx: data.row_ids[p.control_idx],
            distance: p.distance,
        })
        .collect();
    let forget = pairs
        .iter()
        .flat_map(|p| [p.treated_idx, p.control_idx])
        .collect();
    finish(data, Strategy::MatchedPairwise, fraction, None, forget, pairs)
}

/// Stratified random forget set: `floor(fraction * n_g)` rows from each group
/// `g`, sampled without replacement.
pub fn build_random_forget(data: &Dataset, fraction: f64, seed: u64) -> Result<Partition> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "random fraction {fraction} outside (0, 1)"
        )));
    }
    data.require_both_groups()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forget = BTreeSet::new();
    for group in [1u8, 0u8] {
        let members: Vec<usize> = (0..data.len())
            .filter(|&i| data.treatment[i] == group)
            .collect();
        let k = (fraction * members.len() as f64).floor() as usize;
        for slot in rand::seq::index::sample(&mut rng, members.len(), k) {
            forget.insert(data.row_ids[members[slot]]);
        }
    }
    if forget.is_empty() {
        return Err(Error::EmptyForgetSet);
    }
    finish(data, Strategy::Random, fraction, Some(seed), forget, Vec::new())
}

/// Rows of `data` whose id is in the retain set, in ascending id order.
pub fn extract_retain_dataset(data: &Dataset, p: &Partition) -> Result<Dataset> {
    if p.retain_indices.is_empty() {
        return Err(Error::Empty("retain set"));
    }
    let pos = positions(data);
    let mut rows = Vec::with_capacity(p.retain_indices.len());
    for &id in &p.retain_indices {
        match pos.get(&id) {
            Some(&i) => rows.push(i),
            None => {
                return Err(Error::IndexOutOfRange {
                    index: id,
                    len: data.len(),
                })
            }
        }
    }
    rows.sort_by_key(|&i| data.row_ids[i]);
    data.select(&rows)
}
