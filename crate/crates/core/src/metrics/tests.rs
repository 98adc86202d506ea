use proptest::prelude::*;

use super::*;
use crate::nnet::{ParameterVector, Task};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn mud_of_three_groups() {
    assert!(close(mud(&[0.8, 0.6, 0.7]), 0.2, 1e-15));
    assert_eq!(mud(&[0.4, 0.4, 0.4]), 0.0);
}

#[test]
fn law_school_erm_disparity() {
    // group MSEs (x100) of the ERM regressor: worst 19.75, best 12.42
    let groups = [0.1975, 0.1242];
    assert!(close(mud(&groups), 0.0733, 1e-12));
    assert_eq!(worst_utility(&groups, UtilityKind::Mse), 0.1975);
}

#[test]
fn tud_hand_values() {
    assert!(close(tud(&[0.8, 0.6]), 0.2, 1e-15));
    assert!(close(tud(&[1.0, 0.0, 0.5]), 1.0, 1e-15));
    assert_eq!(tud(&[0.3, 0.3]), 0.0);
}

#[test]
fn tud_equals_mud_for_two_groups() {
    for u in [[0.8, 0.6], [0.1, 0.95], [3.0, -2.0]] {
        assert!(close(tud(&u), mud(&u), 1e-14));
    }
}

#[test]
fn var_hand_values() {
    assert_eq!(var_pred_error(&[0.0, 2.0]), 1.0);
    assert_eq!(var_pred_error(&[0.7; 5]), 0.0);
    let uniform: Vec<f64> = (0..100).map(|i| 0.25 + 1e-6 * (i % 3) as f64).collect();
    assert!(var_pred_error(&uniform) < 1e-11);
}

#[test]
fn f1_hand_values() {
    // TP = 1, FP = 1, FN = 0
    assert!(close(f1_utility(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]), 2.0 / 3.0, 1e-15));
    assert_eq!(f1_utility(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]), 1.0);
    assert_eq!(f1_utility(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    // probabilities are thresholded at 0.5
    assert_eq!(f1_utility(&[0.9, 0.2], &[1.0, 0.0]), 1.0);
}

#[test]
fn group_utilities_hand_values() {
    let p = GroupPartition::new(vec![0, 1, 0, 1], 2, "g").unwrap();
    let acc = group_utilities(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 0.0, 1.0], &p, UtilityKind::Accuracy).unwrap();
    assert_eq!(acc, vec![1.0, 1.0]);

    // residuals 1, 2 in group 0 and 3 in group 1
    let mse = group_utilities(&[1.0, 2.0, 3.0, 0.0], &[0.0, 0.0, 0.0, 0.0], &p, UtilityKind::Mse).unwrap();
    assert!(close(mse[0], (1.0 + 9.0) / 2.0, 1e-15));
    assert!(close(mse[1], (4.0 + 0.0) / 2.0, 1e-15));

    let one = GroupPartition::new(vec![0; 4], 1, "all").unwrap();
    let preds = [0.2, 0.9, 0.6, 0.1];
    let targets = [0.0, 1.0, 0.0, 1.0];
    let u = group_utilities(&preds, &targets, &one, UtilityKind::Accuracy).unwrap();
    assert_eq!(u, vec![utility(&preds, &targets, UtilityKind::Accuracy).unwrap()]);
}

#[test]
fn empty_group_is_rejected() {
    assert!(matches!(GroupPartition::new(vec![0, 0, 2], 3, "g"), Err(Error::Data(_))));
    assert!(matches!(GroupPartition::new(vec![0, 3], 3, "g"), Err(Error::Data(_))));
    assert!(matches!(GroupPartition::new(vec![], 0, "g"), Err(Error::Config(_))));
}

#[test]
fn partition_from_values_sorts_levels() {
    let (p, levels) = GroupPartition::from_values(&["m", "f", "m", "x"], "sex").unwrap();
    assert_eq!(levels, vec!["f", "m", "x"]);
    assert_eq!(p.group_of(), &[1, 0, 1, 2]);
    assert_eq!(p.label(), "sex");
}

#[test]
fn report_orients_worst_group() {
    let p = GroupPartition::new(vec![0, 0, 1, 1], 2, "g").unwrap();
    let targets = [0.0; 4];
    let preds = [1.0, 1.0, 0.0, 2.0];
    let errors: Vec<f64> = preds.iter().map(|x| x * x).collect();
    let r = MetricsReport::evaluate(&preds, &targets, &errors, &p, UtilityKind::Mse, TudCenter::GroupMean).unwrap();
    assert_eq!(r.per_group_utility, vec![1.0, 2.0]);
    assert_eq!(r.wu, 2.0);
    assert_eq!(r.mud, 1.0);
    assert_eq!(r.tud, 1.0);
    assert_eq!(r.utility, 1.5);
    assert!(close(r.var, var_pred_error(&[1.0, 1.0, 0.0, 4.0]), 1e-15));

    let global = MetricsReport::evaluate(&preds, &targets, &errors, &p, UtilityKind::Mse, TudCenter::Global).unwrap();
    assert_eq!(global.tud, 1.0);
    assert_eq!(MetricsReport::csv_header(2).len(), global.csv_row().len());
    assert_eq!(global.csv_row()[0], "mse");
}

#[test]
fn global_center_uses_example_weighted_utility() {
    // group 0 has three examples, group 1 one
    let p = GroupPartition::new(vec![0, 0, 0, 1], 2, "g").unwrap();
    let preds = [1.0, 1.0, 1.0, 0.0];
    let targets = [1.0, 1.0, 1.0, 1.0];
    let r = MetricsReport::evaluate(&preds, &targets, &[0.0; 4], &p, UtilityKind::Accuracy, TudCenter::Global).unwrap();
    assert_eq!(r.utility, 0.75);
    assert!(close(r.tud, 0.25 + 0.75, 1e-15));
    assert_eq!(r.wu, 0.0);
}

#[test]
fn ranks_share_ties() {
    assert_eq!(rank_with_ties(&[0.3, 0.1, 0.2], false), vec![3.0, 1.0, 2.0]);
    assert_eq!(rank_with_ties(&[0.3, 0.1, 0.2], true), vec![1.0, 3.0, 2.0]);
    assert_eq!(rank_with_ties(&[0.5, 0.5, 0.1], false), vec![2.5, 2.5, 1.0]);
    assert_eq!(rank_with_ties(&[1.0; 4], true), vec![2.5; 4]);
}

fn method(name: &str, predictions: Vec<f64>) -> MethodPredictions {
    MethodPredictions {
        name: name.into(),
        predictions,
    }
}

#[test]
fn identical_methods_tie() {
    let targets: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
    let preds: Vec<f64> = targets.iter().enumerate().map(|(i, t)| t + (i % 3) as f64 * 0.1).collect();
    let table = random_partition_rank(
        &[method("a", preds.clone()), method("b", preds)],
        &targets,
        4,
        20,
        7,
        UtilityKind::Mse,
        TudCenter::Global,
    )
    .unwrap();
    for row in &table.avg_rank {
        assert_eq!(row, &[1.5; 4]);
    }
}

#[test]
fn uniformly_scaled_errors_rank_in_order() {
    // residuals r, 2r, 3r: every group MSE, and every spread of MSEs, is ordered
    let targets = vec![0.0; 40];
    let base: Vec<f64> = (0..40).map(|i| 0.1 + (i * 37 % 11) as f64 / 10.0).collect();
    let methods: Vec<MethodPredictions> = (1..=3)
        .map(|s| method(&format!("m{s}"), base.iter().map(|r| r * s as f64).collect()))
        .collect();
    let table = random_partition_rank(&methods, &targets, 5, 50, 3, UtilityKind::Mse, TudCenter::GroupMean).unwrap();
    for (m, row) in table.avg_rank.iter().enumerate() {
        assert_eq!(row, &[(m + 1) as f64; 4]);
    }
}

#[test]
fn single_group_ties_on_disparity() {
    let targets = vec![0.0, 1.0, 0.0, 1.0];
    let methods = vec![method("good", vec![0.0, 1.0, 0.0, 1.0]), method("bad", vec![1.0, 1.0, 0.0, 0.0])];
    let table =
        random_partition_rank(&methods, &targets, 1, 5, 1, UtilityKind::Accuracy, TudCenter::Global).unwrap();
    assert_eq!(table.avg_rank[0], [1.0, 1.0, 1.5, 1.5]);
    assert_eq!(table.avg_rank[1], [2.0, 2.0, 1.5, 1.5]);
}

#[test]
fn single_method_ranks_first() {
    let table = random_partition_rank(
        &[method("only", vec![0.1, 0.4, 0.2])],
        &[0.0, 0.0, 1.0],
        2,
        10,
        0,
        UtilityKind::Mse,
        TudCenter::Global,
    )
    .unwrap();
    assert_eq!(table.avg_rank, vec![[1.0; 4]]);
}

#[test]
fn rank_config_errors() {
    let m = [method("a", vec![0.0, 1.0])];
    let t = [0.0, 1.0];
    for (k, trials) in [(2, 0), (3, 5), (0, 5)] {
        let r = random_partition_rank(&m, &t, k, trials, 0, UtilityKind::Mse, TudCenter::Global);
        assert!(matches!(r, Err(Error::Config(_))), "k={k} trials={trials}");
    }
}

#[test]
fn random_partitions_are_seeded_and_surjective() {
    let a = random_partitions(12, 4, 30, 9).unwrap();
    let b = random_partitions(12, 4, 30, 9).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, random_partitions(12, 4, 30, 10).unwrap());
    for p in &a {
        assert!(p.members().iter().all(|g| !g.is_empty()));
        assert!(p.label().starts_with("random-k4-trial"));
    }
}

#[test]
fn rank_table_csv_has_one_row_per_method() {
    let table = RankTable {
        method_names: vec!["erm".into(), "vfair".into()],
        avg_rank: vec![[1.5, 1.5, 2.0, 2.0], [1.5, 1.5, 1.0, 1.0]],
        trials: 10,
        k: 3,
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,utility,wu,mud,tud");
    assert_eq!(lines[2], "vfair,1.5,1.5,1,1");
    assert_eq!(lines.len(), 3);
}

/// All set partitions of `0..n` into exactly `k` blocks (restricted growth strings).
fn set_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, k: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
        // not enough examples left to open the remaining blocks
        if k - used > n - i {
            return;
        }
        for g in 0..=used.min(k - 1) {
            cur.push(g);
            go(i + 1, n, k, used.max(g + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, 0, &mut Vec::new(), &mut out);
    out
}

#[test]
fn set_partition_counts_are_stirling_numbers() {
    assert_eq!(set_partitions(4, 2).len(), 7);
    assert_eq!(set_partitions(5, 3).len(), 25);
    assert_eq!(set_partitions(10, 3).len(), 9330);
}

#[test]
fn sampled_mud_matches_enumeration() {
    let n = 10;
    let k = 3;
    let targets = vec![0.0; n];
    let preds: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 10) as f64 / 10.0).collect();
    let mud_of = |p: &GroupPartition| mud(&group_utilities(&preds, &targets, p, UtilityKind::Mse).unwrap());

    let all = set_partitions(n, k);
    let values: Vec<f64> = all
        .iter()
        .map(|g| mud_of(&GroupPartition::new(g.clone(), k, "enum").unwrap()))
        .collect();
    let exact = values.iter().sum::<f64>() / values.len() as f64;
    let sd = var_pred_error(&values).sqrt();

    let trials = 4000;
    let sampled = random_partitions(n, k, trials, 11).unwrap();
    let estimate = sampled.iter().map(mud_of).sum::<f64>() / trials as f64;
    // five standard errors
    assert!((estimate - exact).abs() < 5.0 * sd / (trials as f64).sqrt(), "{estimate} vs {exact}");
}

#[test]
fn welch_hand_cases() {
    let a = [1.0, 2.0, 3.0];
    assert_eq!(significance_test(&a, &a).unwrap(), 1.0);
    assert_eq!(significance_test(&[2.0; 4], &[2.0; 3]).unwrap(), 1.0);
    assert_eq!(significance_test(&[2.0; 4], &[3.0; 3]).unwrap(), 0.0);

    let zeros = [0.0, 1e-9, 0.0, -1e-9, 0.0];
    let ones = [1.0, 1.0 + 1e-9, 1.0, 1.0 - 1e-9, 1.0];
    assert!(significance_test(&zeros, &ones).unwrap() < 1e-6);

    let x = [0.2, 0.5, 0.1, 0.9, 0.4];
    let y = [0.6, 0.8, 0.7, 1.1];
    let w = welch_t_test(&x, &y).unwrap();
    assert_eq!(w.p_value, welch_t_test(&y, &x).unwrap().p_value);
    assert!(w.t < 0.0 && w.p_value > 0.0 && w.p_value < 1.0);
    assert!(matches!(significance_test(&[1.0], &y), Err(Error::Config(_))));
}

#[test]
fn welch_matches_reference_values() {
    // mean 3 vs 6, sample variances 2.5 and 2.5, n = 5 each:
    // t = -3 / sqrt(1) = -3, df = 8
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b = [4.0, 5.0, 6.0, 7.0, 8.0];
    let w = welch_t_test(&a, &b).unwrap();
    assert!(close(w.t, -3.0, 1e-12));
    assert!(close(w.df, 8.0, 1e-12));
    // two-sided p of |t| = 3 with 8 degrees of freedom
    assert!(close(w.p_value, 0.017071681233782, 1e-9), "{}", w.p_value);
}

#[test]
fn similarity_cases() {
    let a = ParameterVector::from_vec(vec![1.0, 2.0, -1.0]);
    assert!(close(model_similarity(&a, &a).unwrap(), 1.0, 1e-15));
    let x = ParameterVector::from_vec(vec![1.0, 0.0]);
    let y = ParameterVector::from_vec(vec![0.0, 3.0]);
    assert_eq!(model_similarity(&x, &y).unwrap(), 0.0);
    assert!(matches!(
        model_similarity(&x, &ParameterVector::zeros(2)),
        Err(Error::Numeric(_))
    ));
    assert!(model_similarity(&x, &a).is_err());

    let p = [0.9, 0.2, 0.6, 0.4];
    assert_eq!(prediction_similarity(&p, &p, Task::BinaryBce).unwrap(), 1.0);
    assert_eq!(prediction_similarity(&p, &[0.8, 0.3, 0.1, 0.45], Task::LogisticRegressionMse).unwrap(), 0.75);
    assert_eq!(prediction_similarity(&[0.0, 2.0], &[0.0, 1.0], Task::MulticlassCe).unwrap(), 0.5);
    assert!(prediction_similarity(&p, &p, Task::RegressionMse).is_err());
}

fn utilities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..12)
}

proptest! {
    #[test]
    fn disparity_is_permutation_invariant(u in utilities(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut v = u.clone();
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(mud(&u), mud(&v));
        prop_assert!((tud(&u) - tud(&v)).abs() < 1e-12);
    }

    #[test]
    fn disparity_is_shift_invariant(u in utilities(), c in -5.0f64..5.0) {
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        prop_assert!((mud(&u) - mud(&shifted)).abs() < 1e-12);
        prop_assert!((tud(&u) - tud(&shifted)).abs() < 1e-11);
        prop_assert!(mud(&u) >= 0.0 && tud(&u) >= 0.0);
    }

    #[test]
    fn var_is_idempotent_under_duplication(e in prop::collection::vec(0.0f64..5.0, 1..20)) {
        let doubled: Vec<f64> = e.iter().chain(e.iter()).copied().collect();
        prop_assert!((var_pred_error(&e) - var_pred_error(&doubled)).abs() < 1e-12);
    }
}
