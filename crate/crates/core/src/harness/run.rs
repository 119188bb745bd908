use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::Partition;
use crate::error::{KwsError, Result};
use crate::tm::{load_model, save_model, EpochReport, KwsModel, LabeledLiterals, OpCounters, TsetlinMachine};

use super::cache::{self, write_json, CacheMeta};
use super::config::{ExperimentConfig, SweepParam};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub config: ExperimentConfig,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub val_acc: Option<f64>,
    /// `train_acc - test_acc`.
    pub overfit_gap: Option<f64>,
    pub trace: Vec<EpochReport>,
    /// Operations spent on training feedback.
    pub op_counters: OpCounters,
    /// Operations spent on accuracy measurement.
    pub inference_counters: OpCounters,
    pub wall_time_s: f64,
    /// Raw MFCC features per clip.
    pub feature_count: usize,
    pub total_booleans: usize,
}

pub fn model_path(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.join("model.json")
}

fn load_split(cache_dir: &Path, part: Partition) -> Result<LabeledLiterals> {
    Ok(cache::read_bool(&cache::bool_path(cache_dir, part))?.to_literals())
}

fn gap(train: Option<f64>, test: Option<f64>) -> Option<f64> {
    Some(train? - test?)
}

/// Trains on the prepared cache and writes `model.json`, `metrics.json` and `trace.csv`.
pub fn cmd_train(config: &ExperimentConfig) -> Result<MetricsRecord> {
    config.validate()?;
    let cache_dir = config.cache_dir();
    let meta = CacheMeta::load(&cache_dir)?;
    meta.check_matches(config)?;

    let train = load_split(&cache_dir, Partition::Train)?;
    let test = load_split(&cache_dir, Partition::Test)?;
    let validation = load_split(&cache_dir, Partition::Validation)?;
    let encoder = cache::load_encoder(&cache_dir)?;
    if encoder.total_booleans() != meta.total_booleans {
        return Err(KwsError::StaleCache(
            "encoder width disagrees with cache metadata".into(),
        ));
    }

    fs::create_dir_all(&config.output_dir).map_err(|e| KwsError::io(&config.output_dir, e))?;
    let start = Instant::now();
    let mut machine = TsetlinMachine::new(config.keywords.len(), meta.total_booleans, config.hyperparams)?;
    let outcome = machine.fit(&train, Some(&test), Some(&validation), |_| {})?;

    let mut inference = outcome.inference;
    let (train_acc, test_acc, val_acc) = match outcome.trace.last() {
        Some(r) => (r.train_acc, r.test_acc, r.val_acc),
        None => (
            machine.accuracy(&train, &mut inference),
            machine.accuracy(&test, &mut inference),
            machine.accuracy(&validation, &mut inference),
        ),
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let record = MetricsRecord {
        config: config.clone(),
        train_acc,
        test_acc,
        val_acc,
        overfit_gap: gap(train_acc, test_acc),
        trace: outcome.trace,
        op_counters: outcome.training,
        inference_counters: inference,
        wall_time_s,
        feature_count: meta.n_features,
        total_booleans: meta.total_booleans,
    };

    let model = KwsModel {
        keywords: config.keywords.clone(),
        machine,
        encoder: Some(encoder),
    };
    save_model(&model, model_path(config))?;
    write_json(&config.output_dir.join("metrics.json"), &record)?;
    write_trace(&config.output_dir.join("trace.csv"), &record.trace)?;
    Ok(record)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> KwsError + '_ {
    move |e| KwsError::Parse(format!("{}: {e}", path.display()))
}

fn write_trace(path: &Path, trace: &[EpochReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "epoch",
        "train_acc",
        "test_acc",
        "val_acc",
        "clause_evaluations",
        "ta_updates",
        "feedback_events",
        "type_i_feedbacks",
        "type_ii_feedbacks",
    ])
    .map_err(csv_err(path))?;
    for r in trace {
        w.write_record([
            r.epoch.to_string(),
            opt(r.train_acc),
            opt(r.test_acc),
            opt(r.val_acc),
            r.counters.clause_evaluations.to_string(),
            r.counters.ta_updates.to_string(),
            r.counters.feedback_events.to_string(),
            r.counters.type_i_feedbacks.to_string(),
            r.counters.type_ii_feedbacks.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| KwsError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub keyword: String,
    pub support: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Partition,
    pub samples: u64,
    pub accuracy: Option<f64>,
    pub per_class: Vec<ClassReport>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    pub fn from_confusion(split: Partition, keywords: &[String], confusion: Vec<Vec<u64>>) -> Self {
        let k = keywords.len();
        let samples: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let per_class = (0..k)
            .map(|i| {
                let support: u64 = confusion[i].iter().sum();
                let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
                let tp = confusion[i][i] as f64;
                ClassReport {
                    keyword: keywords[i].clone(),
                    support,
                    precision: (predicted > 0).then(|| 100.0 * tp / predicted as f64),
                    recall: (support > 0).then(|| 100.0 * tp / support as f64),
                }
            })
            .collect();
        EvalReport {
            split,
            samples,
            accuracy: (samples > 0).then(|| 100.0 * correct as f64 / samples as f64),
            per_class,
            confusion,
        }
    }
}

/// Evaluates `model_file` on one cached split, writing `eval_<split>.json` and
/// `confusion_<split>.csv` into the config's output directory.
pub fn cmd_eval(config: &ExperimentConfig, model_file: &Path, split: Partition) -> Result<EvalReport> {
    let model = load_model(model_file)?;
    let cache_dir = config.cache_dir();
    let meta = CacheMeta::load(&cache_dir)?;
    if model.keywords != config.keywords || model.keywords != meta.keywords {
        return Err(KwsError::ModelDataMismatch(format!(
            "model keywords {:?}, requested {:?}, cache {:?}",
            model.keywords, config.keywords, meta.keywords
        )));
    }
    if model.machine.n_features() != meta.total_booleans {
        return Err(KwsError::ModelDataMismatch(format!(
            "model expects {} Boolean features, cache holds {}",
            model.machine.n_features(),
            meta.total_booleans
        )));
    }
    let data = load_split(&cache_dir, split)?;
    let report = EvalReport::from_confusion(split, &model.keywords, model.machine.confusion(&data));

    fs::create_dir_all(&config.output_dir).map_err(|e| KwsError::io(&config.output_dir, e))?;
    write_json(
        &config.output_dir.join(format!("eval_{}.json", split.as_str())),
        &report,
    )?;
    let path = config.output_dir.join(format!("confusion_{}.csv", split.as_str()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(model.keywords.iter().cloned());
    w.write_record(&header).map_err(csv_err(&path))?;
    for (kw, row) in model.keywords.iter().zip(&report.confusion) {
        let mut rec = vec![kw.clone()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| KwsError::io(&path, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub feature: usize,
    pub frame: usize,
    pub coeff: usize,
    pub mean: f64,
    pub variance: f64,
    pub zero_variance: bool,
}

/// Per-feature mean and population variance over a row-major matrix (Welford).
pub fn column_stats(rows: usize, cols: usize, values: &[f64]) -> Vec<(f64, f64)> {
    let mut mean = vec![0.0; cols];
    let mut m2 = vec![0.0; cols];
    for i in 0..rows {
        let n = (i + 1) as f64;
        for (f, &x) in values[i * cols..(i + 1) * cols].iter().enumerate() {
            let delta = x - mean[f];
            mean[f] += delta / n;
            m2[f] += delta * (x - mean[f]);
        }
    }
    mean.into_iter()
        .zip(m2)
        .map(|(m, s)| (m, if rows > 0 { s / rows as f64 } else { 0.0 }))
        .collect()
}

/// Writes `feature_stats.csv` for the raw training features in the cache.
pub fn cmd_feature_stats(config: &ExperimentConfig) -> Result<Vec<FeatureStat>> {
    let cache_dir = config.cache_dir();
    let meta = CacheMeta::load(&cache_dir)?;
    let raw = cache::read_raw(&cache::raw_path(&cache_dir, Partition::Train))?;
    let coeffs = meta.coeffs_per_frame.max(1);
    let stats: Vec<FeatureStat> = column_stats(raw.rows(), raw.cols, &raw.values)
        .into_iter()
        .enumerate()
        .map(|(feature, (mean, variance))| FeatureStat {
            feature,
            frame: feature / coeffs,
            coeff: feature % coeffs,
            mean,
            variance,
            zero_variance: variance <= 0.0,
        })
        .collect();

    fs::create_dir_all(&config.output_dir).map_err(|e| KwsError::io(&config.output_dir, e))?;
    let path = config.output_dir.join("feature_stats.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for s in &stats {
        w.serialize(s).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| KwsError::io(&path, e))?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub status: String,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub overfit_gap: Option<f64>,
    pub feature_count: Option<usize>,
    pub total_booleans: Option<usize>,
    pub clause_evaluations: Option<u64>,
    pub ta_updates: Option<u64>,
    pub feedback_events: Option<u64>,
    pub type_i_feedbacks: Option<u64>,
    pub type_ii_feedbacks: Option<u64>,
    pub inference_clause_evaluations: Option<u64>,
    pub wall_time_s: Option<f64>,
}

impl SweepRow {
    fn failed(param: SweepParam, value: &str, err: &KwsError) -> Self {
        SweepRow {
            parameter: param.name().into(),
            value: value.into(),
            status: format!("error: {err}"),
            train_acc: None,
            test_acc: None,
            val_acc: None,
            overfit_gap: None,
            feature_count: None,
            total_booleans: None,
            clause_evaluations: None,
            ta_updates: None,
            feedback_events: None,
            type_i_feedbacks: None,
            type_ii_feedbacks: None,
            inference_clause_evaluations: None,
            wall_time_s: None,
        }
    }

    fn from_metrics(param: SweepParam, value: &str, m: &MetricsRecord) -> Self {
        SweepRow {
            parameter: param.name().into(),
            value: value.into(),
            status: "ok".into(),
            train_acc: m.train_acc,
            test_acc: m.test_acc,
            val_acc: m.val_acc,
            overfit_gap: m.overfit_gap,
            feature_count: Some(m.feature_count),
            total_booleans: Some(m.total_booleans),
            clause_evaluations: Some(m.op_counters.clause_evaluations),
            ta_updates: Some(m.op_counters.ta_updates),
            feedback_events: Some(m.op_counters.feedback_events),
            type_i_feedbacks: Some(m.op_counters.type_i_feedbacks),
            type_ii_feedbacks: Some(m.op_counters.type_ii_feedbacks),
            inference_clause_evaluations: Some(m.inference_counters.clause_evaluations),
            wall_time_s: Some(m.wall_time_s),
        }
    }
}

fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Config for one sweep point. Points that keep the features fixed share the base cache.
pub fn sweep_point_config(base: &ExperimentConfig, param: SweepParam, value: &str) -> Result<ExperimentConfig> {
    let mut cfg = base.with_sweep_value(param, value)?;
    cfg.output_dir = base
        .output_dir
        .join("sweep")
        .join(format!("{}_{}", param.name(), sanitize(value)));
    cfg.cache_dir = if param.affects_features() {
        None
    } else {
        Some(base.cache_dir())
    };
    Ok(cfg)
}

fn run_point(base: &ExperimentConfig, param: SweepParam, value: &str) -> Result<MetricsRecord> {
    let cfg = sweep_point_config(base, param, value)?;
    cfg.validate()?;
    super::cmd_prepare(&cfg)?;
    let metrics = cmd_train(&cfg)?;
    cmd_eval(&cfg, &model_path(&cfg), Partition::Test)?;
    Ok(metrics)
}

/// Sorts numerically when every value parses as a number, otherwise lexicographically.
fn sorted_values(values: &[String]) -> Vec<String> {
    let mut v = values.to_vec();
    if v.iter().all(|x| x.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    } else {
        v.sort();
    }
    v
}

/// Runs prepare/train/eval for every sweep value and writes `sweep.csv`.
/// A failing point becomes a row with an `error:` status; the sweep continues.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| KwsError::InvalidConfig("no sweep configured".into()))?;
    if sweep.values.is_empty() {
        return Err(KwsError::InvalidConfig("sweep has no values".into()));
    }
    let param = sweep.parameter;
    let values = sorted_values(&sweep.values);

    if !param.affects_features() {
        // shared cache, built once up front
        let mut base = config.clone();
        base.sweep = None;
        super::cmd_prepare(&base)?;
    }

    let point = |v: &String| match run_point(config, param, v) {
        Ok(m) => SweepRow::from_metrics(param, v, &m),
        Err(e) => SweepRow::failed(param, v, &e),
    };
    let rows: Vec<SweepRow> = if config.parallel {
        values.par_iter().map(point).collect()
    } else {
        values.iter().map(point).collect()
    };

    fs::create_dir_all(&config.output_dir).map_err(|e| KwsError::io(&config.output_dir, e))?;
    let path = config.output_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for r in &rows {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| KwsError::io(&path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_values_sort_numerically() {
        let v: Vec<String> = ["240", "30", "100"].iter().map(|s| s.to_string()).collect();
        assert_eq!(sorted_values(&v), ["30", "100", "240"]);
        let w: Vec<String> = ["similar4", "baseline4"].iter().map(|s| s.to_string()).collect();
        assert_eq!(sorted_values(&w), ["baseline4", "similar4"]);
    }

    #[test]
    fn confusion_report_counts() {
        let kws = vec!["a".to_string(), "b".to_string()];
        let r = EvalReport::from_confusion(Partition::Test, &kws, vec![vec![3, 1], vec![0, 4]]);
        assert_eq!(r.samples, 8);
        assert_eq!(r.accuracy, Some(87.5));
        assert_eq!(r.per_class[0].recall, Some(75.0));
        assert_eq!(r.per_class[1].precision, Some(80.0));
        assert_eq!(r.per_class[0].support, 4);
    }

    #[test]
    fn welford_constant_column_is_exactly_zero() {
        let stats = column_stats(4, 2, &[1.5, 0.0, 1.5, 1.0, 1.5, 2.0, 1.5, 3.0]);
        assert_eq!(stats[0], (1.5, 0.0));
        assert!((stats[1].0 - 1.5).abs() < 1e-12);
        assert!((stats[1].1 - 1.25).abs() < 1e-12);
    }
}
