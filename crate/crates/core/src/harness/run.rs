use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EpochSelection, ExperimentConfig, Method};
use crate::baselines::{dro_gradient, DroConfig, DroStepReport};
use crate::data::{split, Dataset};
use crate::metrics::{GroupPartition, MetricsReport, UtilityKind};
use crate::nnet::{
    forward_pass, grad_mean, point_predictions, ModelSpec, Optimizer, ParameterVector,
};
use crate::vfair::{vfair_direction, StepReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

/// Per-step diagnostics kept in memory until written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StepTrace {
    #[default]
    None,
    Vfair(Vec<StepReport>),
    Dro(Vec<DroStepReport>),
}

/// Test metrics recorded every `eval_every_steps` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub epoch: usize,
    pub test_mean_loss: f64,
    pub metrics: BTreeMap<String, MetricsReport>,
}

/// Outcome of one (method, seed) training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    #[serde(flatten)]
    pub status: RunStatus,
    pub model: Option<ModelSpec>,
    /// Mean training loss after each epoch.
    pub epoch_losses: Vec<f64>,
    /// 1-based epoch whose parameters are evaluated.
    pub selected_epoch: Option<usize>,
    /// Loss the harmless selection aimed for.
    pub reference_loss: Option<f64>,
    /// Parameters of the selected epoch.
    pub params: Option<ParameterVector>,
    pub utility_kind: UtilityKind,
    /// Test metrics per sensitive attribute.
    pub metrics: BTreeMap<String, MetricsReport>,
    pub test_predictions: Vec<f64>,
    pub test_targets: Vec<f64>,
    /// Per-example test losses.
    pub test_errors: Vec<f64>,
    pub train_size: usize,
    pub test_size: usize,
    pub dropped_rows: usize,
    pub eval_trace: Vec<EvalPoint>,
    pub trace_path: Option<String>,
    #[serde(skip)]
    pub trace: StepTrace,
}

impl RunRecord {
    fn failed(method: Method, seed: u64, kind: UtilityKind, reason: String) -> RunRecord {
        RunRecord {
            method,
            seed,
            status: RunStatus::Failed(reason),
            model: None,
            epoch_losses: Vec::new(),
            selected_epoch: None,
            reference_loss: None,
            params: None,
            utility_kind: kind,
            metrics: BTreeMap::new(),
            test_predictions: Vec::new(),
            test_targets: Vec::new(),
            test_errors: Vec::new(),
            train_size: 0,
            test_size: 0,
            dropped_rows: 0,
            eval_trace: Vec::new(),
            trace_path: None,
            trace: StepTrace::None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// Epoch (1-based) whose loss is nearest `reference`; ties go to the later
/// epoch.
pub fn select_harmless_epoch(epoch_losses: &[f64], reference: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (e, &loss) in epoch_losses.iter().enumerate() {
        let d = (loss - reference).abs();
        if best.is_none_or(|(_, bd)| d <= bd) {
            best = Some((e + 1, d));
        }
    }
    best.map(|(e, _)| e)
}

/// Mean loss of the model over a dataset.
pub fn mean_loss(spec: &ModelSpec, params: &ParameterVector, data: &Dataset) -> Result<f64> {
    let batch = data.full_batch()?;
    Ok(forward_pass(spec, params, &batch)?.losses().mean())
}

struct Evaluation {
    predictions: Vec<f64>,
    errors: Vec<f64>,
    metrics: BTreeMap<String, MetricsReport>,
}

fn evaluate(cfg: &ExperimentConfig, spec: &ModelSpec, params: &ParameterVector, test: &Dataset) -> Result<Evaluation> {
    let batch = test.full_batch()?;
    let pass = forward_pass(spec, params, &batch)?;
    let predictions = point_predictions(spec.task, pass.outputs());
    let errors = pass.losses().as_slice().to_vec();
    let kind = cfg.utility_kind();
    let mut metrics = BTreeMap::new();
    for name in test.sensitive_names() {
        let values = test.sensitive_values(name).expect("listed attribute");
        let (partition, _) = GroupPartition::from_values(values, name.clone())?;
        let report = MetricsReport::evaluate(
            &predictions,
            test.targets(),
            &errors,
            &partition,
            kind,
            cfg.eval.tud_center,
        )?;
        metrics.insert(name.clone(), report);
    }
    Ok(Evaluation {
        predictions,
        errors,
        metrics,
    })
}

struct Trained {
    epoch_losses: Vec<f64>,
    snapshots: Vec<ParameterVector>,
    trace: StepTrace,
    eval_trace: Vec<EvalPoint>,
}

enum Stepper {
    Erm,
    Vfair(crate::vfair::UpdateState, crate::vfair::FairObjectiveKind, Vec<StepReport>),
    Dro(DroConfig, Vec<DroStepReport>),
}

fn train(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    spec: &ModelSpec,
    train_set: &Dataset,
    test_set: &Dataset,
) -> Result<Trained> {
    let t = &cfg.train;
    // same initialization and batch order for every method of a seed
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = spec.init_params(&mut init_rng);
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    order_rng.set_stream(1);

    let mut optimizer = Optimizer::new(t.optimizer, t.step_size, params.len());
    let mut stepper = match method {
        Method::Erm => Stepper::Erm,
        Method::Dro => Stepper::Dro(cfg.dro_config()?, Vec::new()),
        m => Stepper::Vfair(cfg.update_state()?, m.fair_objective().expect("vfair method"), Vec::new()),
    };

    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(t.epochs);
    let mut snapshots = Vec::with_capacity(t.epochs);
    let mut eval_trace = Vec::new();
    let mut step: u64 = 0;
    for epoch in 1..=t.epochs {
        order.shuffle(&mut order_rng);
        for rows in order.chunks(t.batch_size) {
            let batch = train_set.batch(rows)?;
            let direction = match &mut stepper {
                Stepper::Erm => grad_mean(spec, &params, &batch)?,
                Stepper::Vfair(state, kind, reports) => {
                    let (d, r) = vfair_direction(state, spec, &params, &batch, *kind)?;
                    reports.push(r);
                    d
                }
                Stepper::Dro(dro, reports) => {
                    let (d, mut r) = dro_gradient(spec, &params, &batch, dro)?;
                    r.step = step + 1;
                    reports.push(r);
                    d
                }
            };
            optimizer.apply(&mut params, &direction);
            if !params.is_finite() {
                return Err(Error::Numeric(format!("parameters diverged at step {}", step + 1)));
            }
            step += 1;
            if t.eval_every_steps.is_some_and(|k| step % k == 0) {
                let eval = evaluate(cfg, spec, &params, test_set)?;
                eval_trace.push(EvalPoint {
                    step,
                    epoch,
                    test_mean_loss: eval.errors.iter().sum::<f64>() / eval.errors.len() as f64,
                    metrics: eval.metrics,
                });
            }
        }
        let loss = mean_loss(spec, &params, train_set)?;
        log::debug!("{} seed {seed} epoch {epoch}: train loss {loss:.6}", method.name());
        epoch_losses.push(loss);
        snapshots.push(params.clone());
    }
    let trace = match stepper {
        Stepper::Erm => StepTrace::None,
        Stepper::Vfair(_, _, r) => StepTrace::Vfair(r),
        Stepper::Dro(_, r) => StepTrace::Dro(r),
    };
    Ok(Trained {
        epoch_losses,
        snapshots,
        trace,
        eval_trace,
    })
}

fn run_one(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    spec: &ModelSpec,
    train_set: &Dataset,
    test_set: &Dataset,
    reference: Option<f64>,
) -> Result<RunRecord> {
    let trained = train(cfg, method, seed, spec, train_set, test_set)?;
    let final_epoch = trained.epoch_losses.len();
    let (selected, reference_loss) = match cfg.train.epoch_selection {
        EpochSelection::Final => (final_epoch, None),
        EpochSelection::Harmless => {
            let reference = if method == Method::Erm {
                cfg.train.reference_loss.unwrap_or(trained.epoch_losses[final_epoch - 1])
            } else {
                reference.ok_or_else(|| Error::Config("no ERM reference loss for harmless selection".into()))?
            };
            let e = select_harmless_epoch(&trained.epoch_losses, reference).expect("at least one epoch");
            (e, Some(reference))
        }
    };
    let params = trained.snapshots[selected - 1].clone();
    let eval = evaluate(cfg, spec, &params, test_set)?;
    Ok(RunRecord {
        method,
        seed,
        status: RunStatus::Ok,
        model: Some(spec.clone()),
        epoch_losses: trained.epoch_losses,
        selected_epoch: Some(selected),
        reference_loss,
        params: Some(params),
        utility_kind: cfg.utility_kind(),
        metrics: eval.metrics,
        test_predictions: eval.predictions,
        test_targets: test_set.targets().to_vec(),
        test_errors: eval.errors,
        train_size: train_set.len(),
        test_size: test_set.len(),
        dropped_rows: train_set.dropped_rows(),
        eval_trace: trained.eval_trace,
        trace_path: None,
        trace: trained.trace,
    })
}

fn run_seed(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<Vec<RunRecord>> {
    let (train_set, test_set) = split(dataset, cfg.data.test_fraction, seed)?;
    let spec = cfg.model_spec(train_set.feature_dim())?;
    let kind = cfg.utility_kind();
    if cfg.train.methods.contains(&Method::Dro) {
        let c = cfg.dro_config()?.constant();
        let b = cfg.train.batch_size.min(train_set.len()) as f64;
        if c * c >= b {
            log::warn!("DRO constant {c:.2} >= sqrt(batch size); DRO steps will stall at eta = max loss");
        }
    }
    // ERM first so its final loss can anchor harmless selection
    let mut methods = cfg.train.methods.clone();
    methods.sort_by_key(|&m| m != Method::Erm);
    let mut reference = cfg.train.reference_loss;
    let mut records = Vec::with_capacity(methods.len());
    for method in methods {
        let record = match run_one(cfg, method, seed, &spec, &train_set, &test_set, reference) {
            Ok(r) => r,
            Err(e) => {
                log::error!("{} seed {seed} failed: {e}", method.name());
                RunRecord::failed(method, seed, kind, e.to_string())
            }
        };
        if method == Method::Erm && reference.is_none() {
            reference = record.epoch_losses.last().copied().filter(|_| record.is_ok());
        }
        records.push(record);
    }
    Ok(records)
}

/// Trains every configured method for every seed. Seeds run in parallel;
/// records come back ordered by method (config order) then seed. A run
/// that diverges is recorded as failed and the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let dataset = cfg.load_dataset()?;
    run_experiment_on(cfg, &dataset)
}

/// Like [`run_experiment`] with an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let per_seed: Vec<Vec<RunRecord>> = cfg
        .train
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, dataset, seed))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for method in &cfg.train.methods {
        for seed_records in &per_seed {
            records.extend(seed_records.iter().filter(|r| r.method == *method).cloned());
        }
    }
    Ok(records)
}

/// Training split of `seed`, as used by [`run_experiment`].
pub fn training_split(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    split(dataset, cfg.data.test_fraction, seed)
}
