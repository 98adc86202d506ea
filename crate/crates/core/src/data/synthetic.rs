use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, Dataset, EncodedColumn};
use crate::nnet::Task;
use crate::{Error, Result};

/// Name of the generated sensitive column; `"1"` marks the minority group.
pub const GROUP_COLUMN: &str = "group";

/// Two-group data whose minority follows a shifted labelling rule.
///
/// Features are i.i.d. standard normal in both groups and `w*` has entries
/// `N(0, 1/d)`. Regression labels are `w*.x + noise` for the majority and
/// `w*.x + minority_shift + noise` for the minority. Binary labels threshold
/// the logit `w*.x` (majority) or `(1 - minority_shift) w*.x` (minority)
/// plus noise at 0, so a shift of 2 mirrors the minority's rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Minority fraction.
    pub group_ratio: f64,
    pub feature_dim: usize,
    pub minority_shift: f64,
    pub noise_std: f64,
    pub task: Task,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.feature_dim == 0 {
            return Err(Error::Config("synthetic data needs n > 0 and feature_dim > 0".into()));
        }
        if !(self.group_ratio > 0.0 && self.group_ratio < 1.0) {
            return Err(Error::Config(format!("group_ratio must be in (0, 1), got {}", self.group_ratio)));
        }
        if !self.minority_shift.is_finite() || !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("minority_shift must be finite and noise_std >= 0".into()));
        }
        if self.task == Task::MulticlassCe {
            return Err(Error::Config("synthetic data supports regression and binary tasks only".into()));
        }
        Ok(())
    }

    /// `round(n * group_ratio)`.
    pub fn minority_size(&self) -> usize {
        (self.n as f64 * self.group_ratio).round() as usize
    }
}

pub fn synthesize(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.feature_dim;
    let scale = 1.0 / (d as f64).sqrt();
    let w: Vec<f64> = (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();

    let m = spec.minority_size();
    let mut minority: Vec<bool> = (0..spec.n).map(|i| i < m).collect();
    minority.shuffle(&mut rng);

    let mut raw = Array2::zeros((spec.n, d));
    let mut targets = Vec::with_capacity(spec.n);
    for (i, &is_minority) in minority.iter().enumerate() {
        let mut signal = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let x: f64 = StandardNormal.sample(&mut rng);
            raw[[i, j]] = x;
            signal += wj * x;
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let noise = spec.noise_std * z;
        let y = match spec.task {
            Task::RegressionMse if is_minority => signal + spec.minority_shift + noise,
            Task::RegressionMse => signal + noise,
            _ => {
                let logit = if is_minority {
                    (1.0 - spec.minority_shift) * signal
                } else {
                    signal
                };
                if logit + noise > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        targets.push(y);
    }

    let encoding = (0..d)
        .map(|j| EncodedColumn {
            name: format!("x{j}"),
            kind: ColumnKind::Numeric,
            offset: j,
            levels: Vec::new(),
        })
        .collect();
    let groups = minority.iter().map(|&g| if g { "1" } else { "0" }.to_owned()).collect();
    Dataset::from_encoded(raw, targets, spec.task, encoding, vec![GROUP_COLUMN.to_owned()], vec![groups])
}
