//! Model quality and distribution-shift metrics.
//!
//! Score distributions are compared per treatment group with equal-width
//! histograms and Gaussian KDEs on `[0, 1]`. The overlap coefficient is the
//! trapezoidal integral of `min(f, g)` over the shared KDE grid.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::Partition;

/// Lower bound on the KDE bandwidth.
pub const MIN_BANDWIDTH: f64 = 1e-3;

pub fn rmse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("rmse input"));
    }
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalized: Vec<f64>,
}

/// Equal-width histogram over `[0, 1]`; `1.0` lands in the last bin.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::InvalidConfig("histogram needs at least 2 bins".into()));
    }
    let mut counts = vec![0u64; bins];
    for &s in samples {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::OutOfUnitInterval { value: s });
        }
        let b = ((s * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let total = samples.len() as f64;
    let normalized = counts
        .iter()
        .map(|&c| if total > 0.0 { c as f64 / total } else { 0.0 })
        .collect();
    Ok(Histogram {
        edges,
        counts,
        normalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, floored at
/// [`MIN_BANDWIDTH`]. `sd` uses the `n - 1` divisor.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Empty("kde needs at least 2 samples"));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = sd.min(iqr / 1.34);
    Ok((0.9 * spread * nf.powf(-0.2)).max(MIN_BANDWIDTH))
}

/// `grid_size` evenly spaced points on `[0, 1]`, endpoints included.
pub fn unit_grid(grid_size: usize) -> Vec<f64> {
    let last = (grid_size - 1) as f64;
    (0..grid_size).map(|i| i as f64 / last).collect()
}

/// Gaussian KDE on a uniform grid over `[0, 1]`. No boundary correction.
pub fn kde(samples: &[f64], grid_size: usize) -> Result<KdeCurve> {
    if grid_size < 16 {
        return Err(Error::InvalidConfig("kde grid needs at least 16 points".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericFailure("kde samples"));
    }
    let h = silverman_bandwidth(samples)?;
    let grid = unit_grid(grid_size);
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&g| {
            norm * samples
                .iter()
                .map(|&x| {
                    let u = (g - x) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `∫ min(a, b)` over the shared grid, clipped to `[0, 1]`.
pub fn overlap_coefficient(a: &KdeCurve, b: &KdeCurve) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let mins: Vec<f64> = a
        .density
        .iter()
        .zip(&b.density)
        .map(|(x, y)| x.min(*y))
        .collect();
    Ok(trapezoid(&a.grid, &mins).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Treated,
    Control,
}

impl Group {
    pub fn label(self) -> u8 {
        match self {
            Group::Treated => 1,
            Group::Control => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Treated => "treated",
            Group::Control => "control",
        }
    }
}

/// Distribution analysis of one treatment group within one row subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAnalysis {
    pub name: String,
    pub group: Group,
    pub count: usize,
    pub histogram: Option<Histogram>,
    /// `None` when the group has fewer than 2 members.
    pub kde: Option<KdeCurve>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseSet {
    pub model1: f64,
    pub model2: f64,
    pub model3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSet {
    pub original: Option<f64>,
    pub forget_matched: Option<f64>,
    pub forget_random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: RmseSet,
    pub overlap: OverlapSet,
    pub att_full: f64,
    pub att_retain_matched: f64,
    pub contexts: Vec<ContextAnalysis>,
}

pub const CONTEXT_ORIGINAL: &str = "original";
pub const CONTEXT_FORGET_MATCHED: &str = "forget_matched";
pub const CONTEXT_FORGET_RANDOM: &str = "forget_random";

/// Everything [`build_report`] consumes. All score vectors are over the
/// original rows, aligned with `row_ids`.
#[derive(Debug, Clone, Copy)]
pub struct ReportInputs<'a> {
    pub row_ids: &'a [usize],
    pub treatment: &'a [u8],
    pub scores_model1: &'a [f64],
    pub scores_model2: &'a [f64],
    pub scores_model3: &'a [f64],
    pub partition_matched: &'a Partition,
    pub partition_random: &'a Partition,
    pub att_full: f64,
    pub att_retain_matched: f64,
    pub histogram_bins: usize,
    pub kde_grid_size: usize,
}

/// Treated and control analyses for one subset of Model 1 scores, plus the
/// overlap between the two KDEs when both exist.
pub fn analyze_context(
    name: &str,
    scores: &[f64],
    treatment: &[u8],
    bins: usize,
    grid_size: usize,
) -> Result<(Vec<ContextAnalysis>, Option<f64>)> {
    let mut out = Vec::with_capacity(2);
    for group in [Group::Treated, Group::Control] {
        let samples: Vec<f64> = scores
            .iter()
            .zip(treatment)
            .filter(|(_, &t)| t == group.label())
            .map(|(&s, _)| s)
            .collect();
        let histogram = if samples.is_empty() {
            None
        } else {
            Some(histogram(&samples, bins)?)
        };
        let (kde, note) = if samples.len() >= 2 {
            (Some(kde(&samples, grid_size)?), None)
        } else {
            (None, Some("kde skipped: fewer than 2 samples".to_string()))
        };
        out.push(ContextAnalysis {
            name: name.to_string(),
            group,
            count: samples.len(),
            histogram,
            kde,
            note,
        });
    }
    let overlap = match (&out[0].kde, &out[1].kde) {
        (Some(a), Some(b)) => Some(overlap_coefficient(a, b)?),
        _ => None,
    };
    Ok((out, overlap))
}

fn restrict(ids: &BTreeSet<usize>, row_ids: &[usize], values: &[f64], treatment: &[u8]) -> (Vec<f64>, Vec<u8>) {
    row_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| ids.contains(id))
        .map(|(i, _)| (values[i], treatment[i]))
        .unzip()
}

pub fn build_report(inp: &ReportInputs<'_>) -> Result<EvalReport> {
    let target: Vec<f64> = inp.treatment.iter().map(|&t| t as f64).collect();
    let rmse = RmseSet {
        model1: rmse(inp.scores_model1, &target)?,
        model2: rmse(inp.scores_model2, &target)?,
        model3: rmse(inp.scores_model3, &target)?,
    };

    let mut contexts = Vec::with_capacity(6);
    let (mut ctx, original) = analyze_context(
        CONTEXT_ORIGINAL,
        inp.scores_model1,
        inp.treatment,
        inp.histogram_bins,
        inp.kde_grid_size,
    )?;
    contexts.append(&mut ctx);

    let mut subset = |name: &str, p: &Partition| -> Result<Option<f64>> {
        let (s, t) = restrict(&p.forget_indices, inp.row_ids, inp.scores_model1, inp.treatment);
        let (mut ctx, ov) = analyze_context(name, &s, &t, inp.histogram_bins, inp.kde_grid_size)?;
        contexts.append(&mut ctx);
        Ok(ov)
    };
    let forget_matched = subset(CONTEXT_FORGET_MATCHED, inp.partition_matched)?;
    let forget_random = subset(CONTEXT_FORGET_RANDOM, inp.partition_random)?;

    Ok(EvalReport {
        rmse,
        overlap: OverlapSet {
            original,
            forget_matched,
            forget_random,
        },
        att_full: inp.att_full,
        att_retain_matched: inp.att_retain_matched,
        contexts,
    })
}
