//! Per-variant stage functions shared by the CLI subcommands and the
//! experiment driver.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::Serialize;

use super::config::{CategoryMode, DatasetConfig, ExperimentConfig, ScalerFit, SentimentMode};
use crate::error::{validation, Result};
use crate::features::{
    aggregate_daily, align_to_trading_days, apply_scaler, assemble_feature_frame, assemble_price_frame, bars_on_dates,
    equalize_coverage, fit_scaler, impute_spline, split_index, split_windows, DateRange, FeatureFrame, ScalerParams,
    WindowedSet,
};
use crate::ingest::{dedup_posts, parse_ohlcv, parse_posts, partition_posts, Category, DailyBar, HandleList, PostRecord};
use crate::nn::{train, Network, TrainHistory};
use crate::seed::derive_seed;
use crate::sentiment::{attach_external_scores, read_external_scores, score_with_lexicon, Lexicon, ScoredPost};

use super::config::ModelChoice;

/// Posts selected for a dataset, with the dates carrying executive posts.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPosts {
    pub posts: Vec<PostRecord>,
    pub executive_dates: BTreeSet<NaiveDate>,
}

pub fn load_bars(config: &ExperimentConfig) -> Result<Vec<DailyBar>> {
    parse_ohlcv(&config.ohlcv_path)
}

/// Reads, deduplicates, partitions and samples every post source of a
/// dataset.
pub fn select_posts(dataset: &DatasetConfig, seed: u64) -> Result<SelectedPosts> {
    let mut posts = Vec::new();
    let mut executive_dates = BTreeSet::new();
    for (i, source) in dataset.post_sources.iter().enumerate() {
        let raw = dedup_posts(&parse_posts(&source.path)?);
        let Some(handles_path) = &source.handles_path else {
            posts.extend(raw);
            continue;
        };
        let handles = HandleList::load(handles_path)?;
        let sample_seed = derive_seed(seed, &format!("sample/{}/{i}", dataset.label));
        let (exec, general) = partition_posts(&raw, &handles, source.sample_size, sample_seed)?;
        executive_dates.extend(exec.iter().map(|p| p.date));
        match source.category {
            CategoryMode::Executive => posts.extend(exec),
            CategoryMode::General => posts.extend(general),
            CategoryMode::All => {
                let mut both: Vec<PostRecord> = exec.into_iter().chain(general).collect();
                both.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
                posts.extend(both);
            }
        }
    }
    if !dataset.post_sources.is_empty() && posts.is_empty() {
        return Err(validation(format!("dataset {:?} selected no posts", dataset.label)));
    }
    Ok(SelectedPosts { posts, executive_dates })
}

/// Scores posts with the dataset's sentiment mode and applies coverage
/// equalization when requested.
pub fn score_posts(dataset: &DatasetConfig, selected: &SelectedPosts) -> Result<Vec<ScoredPost>> {
    let scored = match &dataset.sentiment {
        None => return Err(validation(format!("dataset {:?} has no sentiment mode", dataset.label))),
        Some(SentimentMode::Lexicon { lexicon_path }) => {
            let lexicon = match lexicon_path {
                Some(p) => Lexicon::load(p)?,
                None => Lexicon::builtin(),
            };
            score_with_lexicon(&selected.posts, &lexicon)?
        }
        Some(SentimentMode::External { scores_path }) => {
            let scores = read_external_scores(scores_path)?;
            attach_external_scores(&selected.posts, &scores)?.0
        }
    };
    if !dataset.equalize_coverage {
        return Ok(scored);
    }
    let (general, executive): (Vec<ScoredPost>, Vec<ScoredPost>) =
        scored.into_iter().partition(|p| p.post.category == Category::General);
    let kept = equalize_coverage(&general, &selected.executive_dates);
    let mut out: Vec<ScoredPost> = executive.into_iter().chain(kept).collect();
    out.sort_by(|a, b| a.post.date.cmp(&b.post.date).then_with(|| a.post.id.cmp(&b.post.id)));
    if out.is_empty() {
        return Err(validation(format!("dataset {:?}: no posts left after equalization", dataset.label)));
    }
    Ok(out)
}

/// Builds the dataset's feature frame: 24 columns with sentiment, 9
/// without.
pub fn build_frame(config: &ExperimentConfig, dataset: &DatasetConfig, bars: &[DailyBar]) -> Result<FeatureFrame> {
    if dataset.post_sources.is_empty() {
        return assemble_price_frame(bars, config.ewma_mode);
    }
    let selected = select_posts(dataset, config.seed)?;
    let scored = score_posts(dataset, &selected)?;
    frame_from_scored(config, bars, &scored)
}

pub fn frame_from_scored(config: &ExperimentConfig, bars: &[DailyBar], scored: &[ScoredPost]) -> Result<FeatureFrame> {
    let daily = aggregate_daily(scored)?;
    let aligned = align_to_trading_days(&daily, bars)?;
    let imputed = impute_spline(&aligned)?;
    let dates: Vec<NaiveDate> = imputed.iter().map(|s| s.date).collect();
    let bars = bars_on_dates(bars, &dates)?;
    assemble_feature_frame(&bars, &imputed, config.ewma_mode)
}

/// Scaled train/test windows for one frame.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scaler: ScalerParams,
    pub train: WindowedSet,
    pub test: WindowedSet,
    pub train_range: DateRange,
    pub test_range: DateRange,
    pub width: usize,
}

pub fn prepare(config: &ExperimentConfig, frame: &FeatureFrame) -> Result<Prepared> {
    let cut = split_index(frame.len(), config.split_ratio)?;
    let train_range = DateRange { start: frame.dates[0], end: frame.dates[cut - 1] };
    let test_range = DateRange { start: frame.dates[cut], end: frame.dates[frame.len() - 1] };
    let fit_range = match config.scaler_fit {
        ScalerFit::Train => train_range,
        ScalerFit::All => DateRange { start: frame.dates[0], end: test_range.end },
    };
    let scaler = fit_scaler(frame, fit_range)?;
    let scaled = apply_scaler(frame, &scaler)?;
    let (train, test) = split_windows(&scaled, cut, config.window)?;
    Ok(Prepared { scaler, train, test, train_range, test_range, width: frame.width() })
}

/// Seed used to train `model` on `dataset`.
pub fn train_seed(config: &ExperimentConfig, dataset: &str, model: &str) -> u64 {
    derive_seed(config.seed, &format!("train/{dataset}/{model}"))
}

pub fn train_model(
    config: &ExperimentConfig,
    dataset: &str,
    model: &ModelChoice,
    windows: &WindowedSet,
) -> Result<(Network, TrainHistory)> {
    let spec = model.spec()?;
    let train_cfg = config.train.resolve(train_seed(config, dataset, &model.label()));
    log::info!("training {} on {} ({} windows)", model.label(), dataset, windows.len());
    train(&spec, windows, &train_cfg)
}

/// Per-dataset summary written by the ingest stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub label: String,
    pub posts: usize,
    pub post_days: usize,
    pub executive_days: usize,
}

pub fn summarize(dataset: &DatasetConfig, selected: &SelectedPosts) -> IngestSummary {
    let days: BTreeSet<NaiveDate> = selected.posts.iter().map(|p| p.date).collect();
    IngestSummary {
        label: dataset.label.clone(),
        posts: selected.posts.len(),
        post_days: days.len(),
        executive_days: selected.executive_dates.len(),
    }
}
