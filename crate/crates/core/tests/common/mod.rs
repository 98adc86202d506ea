#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vfair::nnet::{Activation, Batch, ModelSpec, ParameterVector, Task};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// A random small model with at most `max_params` parameters and a batch of
/// 2..=16 examples with valid targets for its task.
pub struct Instance {
    pub spec: ModelSpec,
    pub params: ParameterVector,
    pub batch: Batch,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_params: usize) -> Instance {
    let tasks = [
        Task::RegressionMse,
        Task::BinaryBce,
        Task::LogisticRegressionMse,
        Task::MulticlassCe,
    ];
    let activations = [Activation::Relu, Activation::Sigmoid, Activation::Identity];
    let spec = loop {
        let task = tasks[rng.random_range(0..tasks.len())];
        let input_dim = rng.random_range(1..=4);
        let depth = rng.random_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=4)).collect();
        let output_dim = if task == Task::MulticlassCe { rng.random_range(2..=3) } else { 1 };
        let activation = activations[rng.random_range(0..activations.len())];
        let spec = ModelSpec::new(input_dim, hidden, activation, output_dim, task).unwrap();
        if spec.param_count() <= max_params {
            break spec;
        }
    };
    // wider than the default init so losses spread out
    let params = ParameterVector::from_vec((0..spec.param_count()).map(|_| normal(rng)).collect());
    let b = rng.random_range(2..=16);
    let rows: Vec<Vec<f64>> = (0..b).map(|_| (0..spec.input_dim).map(|_| normal(rng)).collect()).collect();
    let targets = (0..b)
        .map(|_| match spec.task {
            Task::RegressionMse => 2.0 * normal(rng),
            Task::BinaryBce | Task::LogisticRegressionMse => f64::from(rng.random_range(0..2u8)),
            Task::MulticlassCe => rng.random_range(0..spec.output_dim) as f64,
        })
        .collect();
    let batch = Batch::from_rows(&rows, targets).unwrap();
    Instance { spec, params, batch }
}

pub fn random_direction(rng: &mut ChaCha8Rng, len: usize) -> ParameterVector {
    let v = ParameterVector::from_vec((0..len).map(|_| normal(rng)).collect());
    let n = v.norm();
    v.scaled(1.0 / n)
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &ParameterVector, b: &ParameterVector) -> f64 {
    let diff = a.plus_scaled(-1.0, b).norm();
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// All partitions of `0..n` into exactly `k` non-empty blocks, as group
/// index vectors in restricted growth form.
pub fn set_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, k: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
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

/// Prints the verdict line of one acceptance criterion.
pub fn report(name: &str, pass: bool, detail: &str) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

/// Experiment over the ProPublica two-year recidivism CSV
/// (`compas-scores-two-years.csv`) as a logistic regression with MSE loss.
pub fn compas_config(csv_path: &str, seeds: &[u64], epochs: usize) -> vfair::harness::ExperimentConfig {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let text = format!(
        r#"
[data]
source = "csv"
path = "{csv_path}"
test_fraction = 0.3

[data.schema]
label_column = "two_year_recid"
sensitive_columns = ["sex", "race"]
task = "logistic_regression_mse"
feature_columns = [
  {{ name = "age", kind = "numeric" }},
  {{ name = "juv_fel_count", kind = "numeric" }},
  {{ name = "juv_misd_count", kind = "numeric" }},
  {{ name = "juv_other_count", kind = "numeric" }},
  {{ name = "priors_count", kind = "numeric" }},
  {{ name = "c_charge_degree", kind = "categorical" }},
]

[model]
hidden_dims = [32]
activation = "relu"

[train]
methods = ["erm", "vfair_std"]
step_size = 0.01
batch_size = 128
epochs = {epochs}
seeds = [{}]
epoch_selection = "harmless"

[eval]
utility = "mse"
"#,
        seeds.join(", ")
    );
    vfair::harness::ExperimentConfig::from_toml_str(&text).unwrap()
}
