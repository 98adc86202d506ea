use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Method;
use super::run::{RunRecord, StepTrace};
use crate::data::Dataset;
use crate::metrics::{metric_higher_is_better, significance_test, METRIC_NAMES};
use crate::nnet::{forward_pass, ModelSpec, ParameterVector};
use crate::{Error, Result};

/// Summary of one metric of one method on one sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub attribute: String,
    pub metric: String,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    /// Signed so that a positive value is an improvement over ERM.
    pub improvement: Option<f64>,
    /// Welch's test against ERM.
    pub p_value: Option<f64>,
    pub note: String,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per method, sensitive attribute and metric: mean, sample std, improvement
/// over ERM and Welch p-value. Failed runs are skipped.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.is_ok()).collect();
    let mut methods: Vec<Method> = Vec::new();
    for r in &ok {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let attributes: BTreeSet<&String> = ok.iter().flat_map(|r| r.metrics.keys()).collect();
    let values = |method: Method, attr: &str, metric: &str| -> Vec<f64> {
        ok.iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.metrics.get(attr).and_then(|m| m.metric(metric)))
            .collect()
    };

    let mut rows = Vec::new();
    for attr in &attributes {
        for &method in &methods {
            for metric in METRIC_NAMES {
                let v = values(method, attr, metric);
                if v.is_empty() {
                    continue;
                }
                let kind = ok
                    .iter()
                    .find(|r| r.method == method)
                    .map(|r| r.utility_kind)
                    .expect("method has runs");
                let (mean, std) = mean_std(&v);
                let erm = values(Method::Erm, attr, metric);
                let mut note = String::new();
                let (improvement, p_value) = if method == Method::Erm || erm.is_empty() {
                    (None, None)
                } else {
                    let (erm_mean, _) = mean_std(&erm);
                    let delta = if metric_higher_is_better(metric, kind) {
                        mean - erm_mean
                    } else {
                        erm_mean - mean
                    };
                    let p = significance_test(&v, &erm).ok();
                    if p.is_none() {
                        note = "fewer than 2 runs; significance undefined".into();
                    }
                    (Some(delta), p)
                };
                if v.len() < 2 && note.is_empty() {
                    note = "single run".into();
                }
                rows.push(AggregateRow {
                    method,
                    attribute: attr.to_string(),
                    metric: metric.to_string(),
                    runs: v.len(),
                    mean,
                    std,
                    improvement,
                    p_value,
                    note,
                });
            }
        }
    }
    rows
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map(|x| (x * scale).to_string()).unwrap_or_default()
}

/// Aggregate CSV; `scale` multiplies means, stds and improvements (100 for
/// percentages).
pub fn write_aggregate_csv<W: std::io::Write>(rows: &[AggregateRow], scale: f64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "attribute", "metric", "runs", "mean", "std", "improvement", "p_value", "note"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.attribute.clone(),
            r.metric.clone(),
            r.runs.to_string(),
            (r.mean * scale).to_string(),
            (r.std * scale).to_string(),
            opt(r.improvement, scale),
            opt(r.p_value, 1.0),
            r.note.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("aggregate csv", e))?;
    Ok(())
}

pub fn write_trace_csv<W: std::io::Write>(trace: &StepTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match trace {
        StepTrace::None => {}
        StepTrace::Vfair(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        StepTrace::Dro(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
    }
    w.flush().map_err(|e| Error::io("trace csv", e))?;
    Ok(())
}

fn run_stem(r: &RunRecord) -> String {
    format!("{}_seed{}", r.method.name(), r.seed)
}

/// Writes `<method>_seed<seed>.json` and step-trace CSVs for every record
/// and `aggregate.csv` into `dir`. Sets each record's `trace_path`.
pub fn write_outputs(records: &mut [RunRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in records.iter_mut() {
        if r.trace != StepTrace::None {
            let name = format!("{}_trace.csv", run_stem(r));
            let path = dir.join(&name);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_trace_csv(&r.trace, file)?;
            r.trace_path = Some(name);
        }
        let path = dir.join(format!("{}.json", run_stem(r)));
        let json = serde_json::to_string_pretty(r)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("aggregate.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_aggregate_csv(&aggregate(records), 1.0, file)
}

/// Loads run records from JSON files and from every `*.json` file of the
/// given directories.
pub fn load_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
            serde_json::from_str(&text).map_err(Error::from)
        })
        .collect()
}

/// Per-example losses over the dataset, sorted ascending.
pub fn loss_curve(spec: &ModelSpec, params: &ParameterVector, dataset: &Dataset) -> Result<Vec<f64>> {
    let batch = dataset.full_batch()?;
    let mut losses = forward_pass(spec, params, &batch)?.losses().as_slice().to_vec();
    losses.sort_by(f64::total_cmp);
    Ok(losses)
}

/// CSV of `(rank, loss)` with 1-based ranks, then a `mean` summary row.
pub fn emit_loss_curve<W: std::io::Write>(
    spec: &ModelSpec,
    params: &ParameterVector,
    dataset: &Dataset,
    out: W,
) -> Result<Vec<f64>> {
    let curve = loss_curve(spec, params, dataset)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "loss"])?;
    for (i, l) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    w.write_record(["mean".to_string(), mean.to_string()])?;
    w.flush().map_err(|e| Error::io("curve csv", e))?;
    Ok(curve)
}
