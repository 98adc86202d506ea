//! Method ranking over random partitions of the evaluation set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{group_utilities, mud, tud, tud_about, utility, worst_utility, GroupPartition, TudCenter, UtilityKind};
use crate::{Error, Result};

/// Metrics ranked per partition, in column order of [`RankTable::avg_rank`].
pub const RANKED_METRICS: [&str; 4] = ["utility", "wu", "mud", "tud"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPredictions {
    pub name: String,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub method_names: Vec<String>,
    /// `avg_rank[m][j]`: mean rank of method `m` on `RANKED_METRICS[j]`.
    pub avg_rank: Vec<[f64; 4]>,
    pub trials: usize,
    pub k: usize,
}

impl RankTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["method".to_string()];
        header.extend(RANKED_METRICS.iter().map(|m| m.to_string()));
        w.write_record(&header)?;
        for (name, ranks) in self.method_names.iter().zip(&self.avg_rank) {
            let mut row = vec![name.clone()];
            row.extend(ranks.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("rank table", e))?;
        Ok(())
    }
}

/// 1-based ranks, best first; tied values share the mean of their positions.
pub fn rank_with_ties(values: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// `trials` uniform assignments of `n` examples to `k` groups, each redrawn
/// until no group is empty.
pub fn random_partitions(n: usize, k: usize, trials: usize, seed: u64) -> Result<Vec<GroupPartition>> {
    if trials == 0 {
        return Err(Error::Config("trials must be > 0".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot split {n} examples into {k} non-empty groups")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        loop {
            let group_of: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            if let Ok(p) = GroupPartition::new(group_of, k, format!("random-k{k}-trial{t}")) {
                out.push(p);
                break;
            }
        }
    }
    Ok(out)
}

/// Ranks methods on Utility, WU, MUD and TUD under the same random
/// partitions and averages the ranks over trials.
pub fn random_partition_rank(
    methods: &[MethodPredictions],
    targets: &[f64],
    k: usize,
    trials: usize,
    seed: u64,
    kind: UtilityKind,
    center: TudCenter,
) -> Result<RankTable> {
    if methods.is_empty() {
        return Err(Error::Config("no methods to rank".into()));
    }
    let partitions = random_partitions(targets.len(), k, trials, seed)?;
    let overall = methods
        .iter()
        .map(|m| utility(&m.predictions, targets, kind))
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![[0.0; 4]; methods.len()];
    for partition in &partitions {
        let mut columns = [vec![], vec![], vec![], vec![]];
        for (m, &u) in methods.iter().zip(&overall) {
            let groups = group_utilities(&m.predictions, targets, partition, kind)?;
            let t = match center {
                TudCenter::Global => tud_about(&groups, u),
                TudCenter::GroupMean => tud(&groups),
            };
            columns[0].push(u);
            columns[1].push(worst_utility(&groups, kind));
            columns[2].push(mud(&groups));
            columns[3].push(t);
        }
        for (j, col) in columns.iter().enumerate() {
            let higher = j < 2 && kind.higher_is_better();
            for (m, r) in rank_with_ties(col, higher).into_iter().enumerate() {
                totals[m][j] += r;
            }
        }
    }
    let avg_rank = totals
        .into_iter()
        .map(|row| row.map(|v| v / trials as f64))
        .collect();
    Ok(RankTable {
        method_names: methods.iter().map(|m| m.name.clone()).collect(),
        avg_rank,
        trials,
        k,
    })
}
