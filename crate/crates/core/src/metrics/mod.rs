//! Group utility disparity metrics.
//!
//! A sensitive attribute partitions the evaluation set into `K` groups with
//! per-group utilities `u_k`. From those:
//!
//! - WU, the worst group utility (min for accuracy/F1, max for error-type
//!   utilities),
//! - MUD, `max u - min u`,
//! - TUD, `sum_k |u_k - u_bar|`,
//! - VAR, the population variance of per-example prediction errors.
//!
//! Predictions passed to the utility functions are point predictions: hard
//! labels or positive-class probabilities for classification, values for
//! regression.

mod rank;
mod significance;
mod similarity;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use rank::{random_partition_rank, random_partitions, rank_with_ties, MethodPredictions, RankTable, RANKED_METRICS};
pub use significance::{significance_test, welch_t_test, WelchTest};
pub use similarity::{model_similarity, prediction_similarity};

/// Assignment of evaluation examples to `k` non-empty groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    group_of: Vec<usize>,
    k: usize,
    label: String,
}

impl GroupPartition {
    pub fn new(group_of: Vec<usize>, k: usize, label: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("a partition needs at least one group".into()));
        }
        let mut sizes = vec![0usize; k];
        for &g in &group_of {
            if g >= k {
                return Err(Error::Data(format!("group index {g} out of range for k = {k}")));
            }
            sizes[g] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Data(format!("group {empty} of {k} is empty")));
        }
        Ok(GroupPartition {
            group_of,
            k,
            label: label.into(),
        })
    }

    /// Groups from raw attribute values, one group per distinct value in
    /// sorted order.
    pub fn from_values<S: AsRef<str>>(values: &[S], label: impl Into<String>) -> Result<(Self, Vec<String>)> {
        let mut levels: Vec<String> = values.iter().map(|v| v.as_ref().to_owned()).collect();
        levels.sort();
        levels.dedup();
        let group_of = values
            .iter()
            .map(|v| levels.binary_search_by(|l| l.as_str().cmp(v.as_ref())).expect("level present"))
            .collect();
        Ok((GroupPartition::new(group_of, levels.len(), label)?, levels))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    /// Example indices of each group.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &g) in self.group_of.iter().enumerate() {
            groups[g].push(i);
        }
        groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Accuracy,
    F1,
    Mse,
    /// Mean absolute difference between prediction and label.
    PredictionError,
}

impl UtilityKind {
    pub fn higher_is_better(self) -> bool {
        matches!(self, UtilityKind::Accuracy | UtilityKind::F1)
    }

    /// Picks the worse of two utilities.
    pub fn worse(self, a: f64, b: f64) -> f64 {
        if self.higher_is_better() {
            a.min(b)
        } else {
            a.max(b)
        }
    }
}

/// Reference value `u_bar` of TUD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TudCenter {
    /// Utility of the whole evaluation set.
    #[default]
    Global,
    /// Unweighted mean of the group utilities.
    GroupMean,
}

fn check_lengths(predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.len() != targets.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Data("utility of an empty set".into()));
    }
    Ok(())
}

/// `2 P R / (P + R)` with label 1 as the positive class; 0 when undefined.
pub fn f1_utility(predictions: &[f64], targets: &[f64]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(targets) {
        match (p >= 0.5, t >= 0.5) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    // 2PR/(P+R) == 2TP / (2TP + FP + FN)
    let denom = 2 * tp + fp + fn_;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Utility of a set of predictions.
pub fn utility(predictions: &[f64], targets: &[f64], kind: UtilityKind) -> Result<f64> {
    check_lengths(predictions, targets)?;
    let n = predictions.len() as f64;
    let pairs = predictions.iter().zip(targets);
    Ok(match kind {
        UtilityKind::Accuracy => pairs.filter(|(p, t)| (*p - *t).abs() < 0.5).count() as f64 / n,
        UtilityKind::F1 => f1_utility(predictions, targets),
        UtilityKind::Mse => pairs.map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n,
        UtilityKind::PredictionError => pairs.map(|(p, t)| (p - t).abs()).sum::<f64>() / n,
    })
}

/// `u_k` for every group of the partition.
pub fn group_utilities(
    predictions: &[f64],
    targets: &[f64],
    partition: &GroupPartition,
    kind: UtilityKind,
) -> Result<Vec<f64>> {
    check_lengths(predictions, targets)?;
    if partition.len() != predictions.len() {
        return Err(Error::Data(format!(
            "partition covers {} examples, predictions {}",
            partition.len(),
            predictions.len()
        )));
    }
    partition
        .members()
        .iter()
        .map(|idx| {
            let p: Vec<f64> = idx.iter().map(|&i| predictions[i]).collect();
            let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            utility(&p, &t, kind)
        })
        .collect()
}

/// `max u - min u`
pub fn mud(utilities: &[f64]) -> f64 {
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = utilities.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `sum_k |u_k - mean(u)|`
pub fn tud(utilities: &[f64]) -> f64 {
    let mean = utilities.iter().sum::<f64>() / utilities.len() as f64;
    tud_about(utilities, mean)
}

/// `sum_k |u_k - center|`
pub fn tud_about(utilities: &[f64], center: f64) -> f64 {
    utilities.iter().map(|u| (u - center).abs()).sum()
}

/// Population variance of per-example errors.
pub fn var_pred_error(errors: &[f64]) -> f64 {
    crate::vfair::population_variance(errors)
}

pub fn worst_utility(utilities: &[f64], kind: UtilityKind) -> f64 {
    let start = if kind.higher_is_better() {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    utilities.iter().fold(start, |acc, &u| kind.worse(acc, u))
}

/// Evaluation metrics of one model under one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub utility_kind: UtilityKind,
    pub utility: f64,
    pub per_group_utility: Vec<f64>,
    pub wu: f64,
    pub mud: f64,
    pub tud: f64,
    pub var: f64,
}

impl MetricsReport {
    /// `errors` are the per-example task losses used for VAR.
    pub fn evaluate(
        predictions: &[f64],
        targets: &[f64],
        errors: &[f64],
        partition: &GroupPartition,
        kind: UtilityKind,
        center: TudCenter,
    ) -> Result<Self> {
        if errors.len() != predictions.len() {
            return Err(Error::Data("one error per prediction expected".into()));
        }
        let overall = utility(predictions, targets, kind)?;
        let per_group = group_utilities(predictions, targets, partition, kind)?;
        let tud = match center {
            TudCenter::Global => tud_about(&per_group, overall),
            TudCenter::GroupMean => tud(&per_group),
        };
        Ok(MetricsReport {
            utility_kind: kind,
            utility: overall,
            wu: worst_utility(&per_group, kind),
            mud: mud(&per_group),
            tud,
            var: var_pred_error(errors),
            per_group_utility: per_group,
        })
    }

    pub fn csv_header(k: usize) -> Vec<String> {
        let mut h: Vec<String> = ["utility_kind", "utility", "wu", "mud", "tud", "var"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((0..k).map(|i| format!("u_{i}")));
        h
    }

    /// Wide CSV row matching [`MetricsReport::csv_header`].
    pub fn csv_row(&self) -> Vec<String> {
        let kind = serde_json::to_value(self.utility_kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let mut row = vec![kind];
        row.extend([self.utility, self.wu, self.mud, self.tud, self.var].iter().map(f64::to_string));
        row.extend(self.per_group_utility.iter().map(f64::to_string));
        row
    }

    /// Value of a named metric (`utility`, `wu`, `mud`, `tud`, `var`).
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "utility" => Some(self.utility),
            "wu" => Some(self.wu),
            "mud" => Some(self.mud),
            "tud" => Some(self.tud),
            "var" => Some(self.var),
            _ => None,
        }
    }
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 5] = ["utility", "wu", "mud", "tud", "var"];

/// Whether larger values of the named metric are better.
pub fn metric_higher_is_better(name: &str, kind: UtilityKind) -> bool {
    match name {
        "utility" | "wu" => kind.higher_is_better(),
        _ => false,
    }
}

#[cfg(test)]
mod tests;
