mod common;

use std::collections::{BTreeSet, HashSet};

use chrono::{Days, NaiveDate};
use proptest::prelude::*;
use sentiment_forecast::eval::compute_metrics;
use sentiment_forecast::features::{
    aggregate_daily, align_to_trading_days, apply_scaler, assemble_feature_frame, chrono_split, equalize_coverage, ewma,
    fit_scaler, impute_spline, inverse_scale, DailySentiment, EwmaMode, NaturalSpline, TARGET_COLUMN,
};
use sentiment_forecast::ingest::{Category, Platform, PostRecord};
use sentiment_forecast::sentiment::{attach_external_scores, ScoreSource, ScoredPost, SentimentScore};
use sentiment_forecast::synthetic::{generate, SyntheticConfig};

fn day(i: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + Days::new(i)
}

/// Strictly increasing knots with values.
fn knots() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((0.1f64..5.0, -3.0f64..3.0), 2..40).prop_map(|steps| {
        let mut x = 0.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (dx, y) in steps {
            xs.push(x);
            ys.push(y);
            x += dx;
        }
        (xs, ys)
    })
}

fn synthetic_frame(seed: u64, days: usize) -> sentiment_forecast::features::FeatureFrame {
    let cfg = SyntheticConfig { trading_days: days, seed, executive_day_fraction: 0.5, ..SyntheticConfig::default() };
    let data = generate(&cfg).unwrap();
    // keep posts on every third day to force imputation
    let posts: Vec<PostRecord> = data
        .posts
        .iter()
        .filter(|p| (p.date - data.bars[0].date).num_days() % 3 == 0)
        .cloned()
        .collect();
    let (scored, _) = attach_external_scores(&posts, &data.logits.iter().cloned().collect()).unwrap();
    let aligned = align_to_trading_days(&aggregate_daily(&scored).unwrap(), &data.bars).unwrap();
    let imputed = impute_spline(&aligned).unwrap();
    let first = data.bars.iter().position(|b| b.date == imputed[0].date).unwrap();
    assemble_feature_frame(&data.bars[first..first + imputed.len()], &imputed, EwmaMode::Adjusted).unwrap()
}

fn general_post(id: usize, d: u64) -> ScoredPost {
    ScoredPost {
        post: PostRecord {
            id: format!("g{id}"),
            date: day(d),
            author: format!("user{id}"),
            text: "text".into(),
            platform: Platform::Reddit,
            category: Category::General,
            upvotes: None,
        },
        score: SentimentScore { positive: 0.2, negative: 0.3, neutral: 0.5, compound: None, source: ScoreSource::External },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spline_matches_dense_oracle((xs, ys) in knots(), probes in prop::collection::vec(0.0f64..1.0, 1..20)) {
        let s = NaturalSpline::fit(&xs, &ys).unwrap();
        let span = xs[xs.len() - 1];
        let at: Vec<f64> = probes.iter().map(|p| p * span).chain(xs.iter().copied()).collect();
        let oracle = common::dense_spline(&xs, &ys, &at);
        for (x, want) in at.iter().zip(oracle) {
            prop_assert!((s.eval(*x) - want).abs() <= 1e-9, "at {}: {} vs {}", x, s.eval(*x), want);
        }
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((s.eval(*x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_reproduces_linear_data((xs, _) in knots(), a in -2.0f64..2.0, b in -2.0f64..2.0, p in 0.0f64..1.0) {
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let s = NaturalSpline::fit(&xs, &ys).unwrap();
        let x = p * xs[xs.len() - 1];
        prop_assert!((s.eval(x) - (a * x + b)).abs() < 1e-9);
    }

    #[test]
    fn ewma_matches_weighted_sum(xs in prop::collection::vec(-100.0f64..100.0, 1..120), span in 1usize..40) {
        let got = ewma(&xs, span).unwrap();
        for (g, w) in got.iter().zip(common::ewma_brute(&xs, span)) {
            prop_assert!((g - w).abs() <= 1e-10);
        }
    }

    #[test]
    fn equalization_is_idempotent_subset(
        days in prop::collection::vec(0u64..30, 0..60),
        exec in prop::collection::btree_set(0u64..30, 0..15),
    ) {
        let general: Vec<ScoredPost> = days.iter().enumerate().map(|(i, d)| general_post(i, *d)).collect();
        let exec_dates: BTreeSet<NaiveDate> = exec.iter().map(|d| day(*d)).collect();
        let once = equalize_coverage(&general, &exec_dates);
        prop_assert_eq!(&equalize_coverage(&once, &exec_dates), &once);
        prop_assert!(once.iter().all(|p| exec_dates.contains(&p.post.date)));
        let expected = general.iter().filter(|p| exec_dates.contains(&p.post.date)).count();
        prop_assert_eq!(once.len(), expected);
    }

    #[test]
    fn metrics_unchanged_by_identity_scaling(
        ys in prop::collection::vec(1.0f64..500.0, 5..40),
        noise in prop::collection::vec(-20.0f64..20.0, 40),
    ) {
        let preds: Vec<f64> = ys.iter().zip(&noise).map(|(y, e)| y + e).collect();
        let raw = compute_metrics(&ys, &preds, 1).unwrap();
        let params = sentiment_forecast::features::ScalerParams {
            columns: vec![TARGET_COLUMN.into()],
            mean: vec![0.0],
            std: vec![1.0],
            fit_range: sentiment_forecast::features::DateRange { start: day(0), end: day(1) },
        };
        let back = compute_metrics(
            &inverse_scale(&ys, &params, TARGET_COLUMN).unwrap(),
            &inverse_scale(&preds, &params, TARGET_COLUMN).unwrap(),
            1,
        ).unwrap();
        prop_assert_eq!(raw, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_frames_are_complete(seed in 0u64..1000, days in 40usize..90) {
        let frame = synthetic_frame(seed, days);
        prop_assert_eq!(frame.width(), 24);
        let unique: HashSet<&String> = frame.columns.iter().collect();
        prop_assert_eq!(unique.len(), 24);
        prop_assert!(frame.values.iter().chain(&frame.target).all(|v| v.is_finite()));
        for ch in ["positive", "negative", "neutral"] {
            prop_assert!(frame.column(ch).unwrap().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn split_partitions_rows_in_order(seed in 0u64..1000, ratio in 0.1f64..0.9) {
        let frame = synthetic_frame(seed, 60);
        let (train, test) = chrono_split(&frame, ratio).unwrap();
        prop_assert_eq!(train.len(), (ratio * frame.len() as f64).floor() as usize);
        prop_assert_eq!(train.len() + test.len(), frame.len());
        let dates: Vec<NaiveDate> = train.dates.iter().chain(&test.dates).copied().collect();
        prop_assert_eq!(&dates, &frame.dates);
        prop_assert!(train.dates.last() < test.dates.first());

        let params = fit_scaler(&frame, train.date_range().unwrap()).unwrap();
        let scaled = apply_scaler(&frame, &params).unwrap();
        for (j, name) in frame.columns.iter().enumerate() {
            let back = inverse_scale(&scaled.values.column(j).to_vec(), &params, name).unwrap();
            for (b, v) in back.iter().zip(frame.values.column(j)) {
                prop_assert!((b - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}

#[test]
fn imputation_fills_every_gap() {
    let obs = [0u64, 4, 5, 11];
    let series: Vec<DailySentiment> = (0..12)
        .map(|i| DailySentiment { date: day(i), scores: obs.contains(&i).then_some([0.2, 0.3, 0.5]) })
        .collect();
    let out = impute_spline(&series).unwrap();
    // constant knots give a constant spline
    assert!(out.iter().all(|s| s.scores.unwrap().iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-12)));
}
