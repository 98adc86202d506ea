//! Dispersion measures of a loss vector and the chain of inequalities that
//! ties the spread of losses to the worst group-mean gap:
//!
//! ```text
//! max l - min l <= sum_k |l_k - l_(k+1)| <= sum_{i<j} |l_i - l_j|
//!               <= sqrt(C(N,2) sum_{i<j} (l_i - l_j)^2) = N sqrt(C(N,2) Var)
//! ```

/// `(1/N) sum (l_i - mean)^2`
pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// `(1/N^2) sum_{i<j} (l_i - l_j)^2`, equal to the population variance.
pub fn pairwise_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mut total = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            total += (a - b).powi(2);
        }
    }
    total / (n * n)
}

/// `sum_k |v_k - v_(k+1)|` in the given order.
pub fn consecutive_abs_diff_sum(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[0] - w[1]).abs()).sum()
}

pub fn all_pairs_abs_diff_sum(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            total += (a - b).abs();
        }
    }
    total
}

/// `N * sqrt(C(N,2) * Var)`, an upper bound on `max - min` and hence on any
/// group-mean disparity.
pub fn std_bound_on_range(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let pairs = n * (n - 1.0) / 2.0;
    n * (pairs * population_variance(values)).sqrt()
}
