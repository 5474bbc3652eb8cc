//! Experiment orchestration: config loading, the per-stage commands and
//! the end-to-end experiment run.

mod config;
mod output;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{
    CategoryMode, CustomModel, DatasetConfig, ExperimentConfig, ModelChoice, PostSource, ScalerFit, SentimentMode,
    TrainOverrides,
};
pub use output::{emit_plot_series, write_history, Manifest, ModelRecord, PlotSeries, VariantRecord, VariantStatus};
pub use pipeline::{
    build_frame, frame_from_scored, load_bars, prepare, score_posts, select_posts, summarize, train_model, train_seed,
    IngestSummary, Prepared, SelectedPosts,
};

use crate::error::{Error, Result};
use crate::eval::{compute_metrics, predict_prices, write_reports, EvalReport};
use crate::features::DateRange;
use crate::ingest::DailyBar;
use crate::io_util::write_atomic;
use crate::nn::{Checkpoint, Network};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads and validates a config, then applies overrides. `--out` is taken
/// relative to the working directory, not the config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Per-variant errors collected while a command ran to completion.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<(String, Error)>,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    fn record<T>(&mut self, label: &str, result: Result<T>) -> Option<T> {
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                log::error!("variant {label} failed: {e}");
                self.failures.push((label.to_string(), e));
                None
            }
        }
    }
}

/// Validates inputs, then creates the output directory and loads prices.
fn start(cfg: &ExperimentConfig, extra_inputs: &[PathBuf]) -> Result<Vec<DailyBar>> {
    cfg.check_inputs()?;
    for p in extra_inputs {
        if !p.is_file() {
            return Err(Error::MissingFile(p.clone()));
        }
    }
    let bars = load_bars(cfg)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(bars)
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn checkpoint_path(cfg: &ExperimentConfig, dataset: &str, model: &str) -> PathBuf {
    cfg.output_dir.join(format!("model_{dataset}_{model}.json"))
}

fn scaler_path(cfg: &ExperimentConfig, dataset: &str) -> PathBuf {
    cfg.output_dir.join(format!("scaler_{dataset}.json"))
}

/// Reads and filters posts; writes `ingest.json` and `posts_<label>.jsonl`.
pub fn run_ingest(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bars = start(cfg, &[])?;
    let mut outcome = Outcome::default();
    let mut summaries = Vec::new();
    for ds in &cfg.datasets {
        let res = select_posts(ds, cfg.seed).and_then(|sel| {
            write_atomic(&cfg.output_dir.join(format!("posts_{}.jsonl", ds.label)), &jsonl(&sel.posts)?)?;
            Ok(summarize(ds, &sel))
        });
        if let Some(s) = outcome.record(&ds.label, res) {
            summaries.push(s);
        }
    }
    let summary = serde_json::json!({
        "name": cfg.name,
        "bars": bars.len(),
        "ohlcv_range": bar_range(&bars),
        "datasets": summaries,
    });
    write_atomic(&cfg.output_dir.join("ingest.json"), &pretty(&summary)?)?;
    Ok(outcome)
}

/// Scores each sentiment dataset; writes `scored_<label>.jsonl`.
pub fn run_score(cfg: &ExperimentConfig) -> Result<Outcome> {
    start(cfg, &[])?;
    let mut outcome = Outcome::default();
    for ds in cfg.datasets.iter().filter(|d| !d.post_sources.is_empty()) {
        let res = select_posts(ds, cfg.seed)
            .and_then(|sel| score_posts(ds, &sel))
            .and_then(|scored| write_atomic(&cfg.output_dir.join(format!("scored_{}.jsonl", ds.label)), &jsonl(&scored)?));
        outcome.record(&ds.label, res);
    }
    Ok(outcome)
}

/// Writes the unscaled feature frame of each dataset as `frame_<label>.csv`.
pub fn run_featurize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bars = start(cfg, &[])?;
    let mut outcome = Outcome::default();
    for ds in &cfg.datasets {
        let res = build_frame(cfg, ds, &bars).and_then(|f| f.save(&cfg.output_dir.join(format!("frame_{}.csv", ds.label))));
        outcome.record(&ds.label, res);
    }
    Ok(outcome)
}

struct Fitted {
    record: VariantRecord,
    prepared: Prepared,
    networks: Vec<(String, Network)>,
}

fn fit_variant(cfg: &ExperimentConfig, ds: &DatasetConfig, bars: &[DailyBar], save: bool) -> Result<Fitted> {
    let frame = build_frame(cfg, ds, bars)?;
    let prepared = prepare(cfg, &frame)?;
    if save {
        write_atomic(&scaler_path(cfg, &ds.label), &pretty(&prepared.scaler)?)?;
    }
    let mut record = VariantRecord {
        label: ds.label.clone(),
        status: VariantStatus::Ok,
        error: None,
        frame_rows: Some(frame.len()),
        feature_columns: Some(frame.width()),
        train_range: Some(prepared.train_range),
        test_range: Some(prepared.test_range),
        models: Vec::new(),
    };
    let mut networks = Vec::new();
    for model in &cfg.models {
        let label = model.label();
        let (net, history) = train_model(cfg, &ds.label, model, &prepared.train)?;
        write_history(&history, &cfg.output_dir.join(format!("history_{}_{label}.csv", ds.label)))?;
        let seed = train_seed(cfg, &ds.label, &label);
        if save {
            Checkpoint::from_network(&net, seed).save(&checkpoint_path(cfg, &ds.label, &label))?;
        }
        record.models.push(ModelRecord {
            label: label.clone(),
            seed,
            best_epoch: history.best_epoch,
            stopped_epoch: history.stopped_epoch,
        });
        networks.push((label, net));
    }
    Ok(Fitted { record, prepared, networks })
}

fn score_variant(
    cfg: &ExperimentConfig,
    label: &str,
    prepared: &Prepared,
    networks: &[(String, Network)],
) -> Result<(Vec<EvalReport>, PlotSeries)> {
    let p = cfg.p_for(prepared.width);
    let mut reports = Vec::new();
    let mut actual = Vec::new();
    let mut predictions = Vec::new();
    for (model, net) in networks {
        let (truth, pred) = predict_prices(net, &prepared.test, &prepared.scaler)?;
        let mut report = compute_metrics(&truth, &pred, p)?;
        report.dataset = label.to_string();
        report.model = model.clone();
        reports.push(report);
        actual = truth;
        predictions.push((model.clone(), pred));
    }
    let plot = PlotSeries { dates: prepared.test.dates.clone(), actual, predictions };
    plot.write(&cfg.output_dir.join(format!("plot_{label}.csv")))?;
    Ok((reports, plot))
}

/// Trains every model on every dataset; writes checkpoints, scalers and
/// histories.
pub fn run_train(cfg: &ExperimentConfig) -> Result<Outcome> {
    let bars = start(cfg, &[])?;
    let mut outcome = Outcome::default();
    for ds in &cfg.datasets {
        outcome.record(&ds.label, fit_variant(cfg, ds, &bars, true));
    }
    Ok(outcome)
}

/// Scores saved checkpoints on the test split; writes reports and plots.
pub fn run_evaluate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let checkpoints: Vec<PathBuf> = cfg
        .datasets
        .iter()
        .flat_map(|d| cfg.models.iter().map(move |m| checkpoint_path(cfg, &d.label, &m.label())))
        .collect();
    let bars = start(cfg, &checkpoints)?;
    let mut outcome = Outcome::default();
    let mut reports = Vec::new();
    for ds in &cfg.datasets {
        let res = (|| {
            let frame = build_frame(cfg, ds, &bars)?;
            let prepared = prepare(cfg, &frame)?;
            let networks = cfg
                .models
                .iter()
                .map(|m| {
                    let net = Checkpoint::load(&checkpoint_path(cfg, &ds.label, &m.label()))?.into_network()?;
                    Ok((m.label(), net))
                })
                .collect::<Result<Vec<_>>>()?;
            score_variant(cfg, &ds.label, &prepared, &networks)
        })();
        if let Some((r, _)) = outcome.record(&ds.label, res) {
            reports.extend(r);
        }
    }
    write_reports(&reports, &cfg.output_dir)?;
    Ok(outcome)
}

/// Summary of a full experiment run.
#[derive(Debug)]
pub struct ExperimentResult {
    pub reports: Vec<EvalReport>,
    pub plots: Vec<(String, PlotSeries)>,
    pub manifest: Manifest,
    pub outcome: Outcome,
}

/// Runs every stage for every dataset. A failing variant is recorded in
/// the manifest and the remaining variants still run.
pub fn run_experiment(cfg: &ExperimentConfig, config_digest: &str) -> Result<ExperimentResult> {
    let bars = start(cfg, &[])?;
    let mut outcome = Outcome::default();
    let mut reports = Vec::new();
    let mut plots = Vec::new();
    let mut variants = Vec::new();
    for ds in &cfg.datasets {
        let res = fit_variant(cfg, ds, &bars, false).and_then(|fitted| {
            let (r, plot) = score_variant(cfg, &ds.label, &fitted.prepared, &fitted.networks)?;
            Ok((fitted.record, r, plot))
        });
        match res {
            Ok((record, r, plot)) => {
                variants.push(record);
                reports.extend(r);
                plots.push((ds.label.clone(), plot));
            }
            Err(e) => {
                variants.push(VariantRecord::failed(&ds.label, &e));
                outcome.record::<()>(&ds.label, Err(e));
            }
        }
    }
    write_reports(&reports, &cfg.output_dir)?;
    let manifest = Manifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        config_sha256: config_digest.to_string(),
        ohlcv_range: bar_range(&bars),
        variants,
        created_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    manifest.write(&cfg.output_dir.join("manifest.json"))?;
    Ok(ExperimentResult { reports, plots, manifest, outcome })
}

fn bar_range(bars: &[DailyBar]) -> Option<DateRange> {
    Some(DateRange { start: bars.first()?.date, end: bars.last()?.date })
}
