use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sentiment_forecast::features::FeatureFrame;
use sentiment_forecast::ingest::Category;
use sentiment_forecast::runner::{
    load_config, run_evaluate, run_experiment, run_featurize, run_ingest, run_score, run_train, score_posts,
    select_posts, ExperimentConfig, Overrides, VariantStatus,
};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic").join(name)
}

fn write_config(dir: &Path, extra_dataset: Option<serde_json::Value>) -> PathBuf {
    let mut datasets = vec![
        serde_json::json!({ "label": "Y" }),
        serde_json::json!({
            "label": "Y+T",
            "post_sources": [{ "path": fixture("posts.jsonl") }],
            "sentiment": { "mode": "lexicon" }
        }),
        serde_json::json!({
            "label": "Y+G",
            "post_sources": [{ "path": fixture("posts.jsonl"), "category": "general", "handles_path": fixture("handles.txt") }],
            "sentiment": { "mode": "external", "scores_path": fixture("scores.jsonl") },
            "equalize_coverage": true
        }),
    ];
    datasets.extend(extra_dataset);
    let cfg = serde_json::json!({
        "name": "runner-test",
        "seed": 5,
        "ohlcv_path": fixture("ohlcv.csv"),
        "datasets": datasets,
        "models": [{ "preset": "gru", "units": [3, 3, 2] }, { "preset": "ae", "units": [3, 2, 2, 3] }],
        "train": { "max_epochs": 3, "learning_rate": 0.01 },
        "window": 4,
        "output_dir": "out"
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn train_then_evaluate_matches_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), None);
    let staged = load_config(&path, &Overrides { out: Some(dir.path().join("staged")), ..Default::default() }).unwrap();
    assert!(run_train(&staged).unwrap().is_success());
    assert!(run_evaluate(&staged).unwrap().is_success());

    let full = load_config(&path, &Overrides { out: Some(dir.path().join("full")), ..Default::default() }).unwrap();
    let result = run_experiment(&full, "digest").unwrap();
    assert!(result.outcome.is_success());
    assert_eq!(result.reports.len(), 6);

    for f in ["report.json", "report.csv", "plot_Y.csv", "plot_Y+T.csv", "history_Y+G_ae.csv"] {
        let a = fs::read(staged.output_dir.join(f)).unwrap();
        let b = fs::read(full.output_dir.join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert!(staged.output_dir.join("model_Y+T_gru.json").exists());
    assert!(staged.output_dir.join("scaler_Y.json").exists());

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(full.output_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config_sha256"], "digest");
    assert_eq!(manifest["variants"][0]["feature_columns"], 9);
    assert_eq!(manifest["variants"][1]["feature_columns"], 24);
    assert_eq!(manifest["variants"][2]["status"], "ok");
}

#[test]
fn plot_rows_cover_the_test_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_config(dir.path(), None), &Overrides::default()).unwrap();
    let result = run_experiment(&cfg, "").unwrap();
    for (label, plot) in &result.plots {
        let record = result.manifest.variants.iter().find(|v| &v.label == label).unwrap();
        let range = record.test_range.unwrap();
        assert_eq!(plot.dates.first(), Some(&range.start));
        assert_eq!(plot.dates.last(), Some(&range.end));
        let text = fs::read_to_string(cfg.output_dir.join(format!("plot_{label}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), "date,actual,gru,ae");
        assert_eq!(text.lines().count(), plot.dates.len() + 1);
    }
}

#[test]
fn failing_variant_is_recorded_and_others_complete() {
    let dir = tempfile::tempdir().unwrap();
    // malformed lexicon: only this variant should fail
    let extra = serde_json::json!({
        "label": "Y+E",
        "post_sources": [{ "path": fixture("posts.jsonl"), "category": "executive", "handles_path": fixture("handles.txt") }],
        "sentiment": { "mode": "lexicon", "lexicon_path": dir.path().join("lexicon.tsv") }
    });
    fs::write(dir.path().join("lexicon.tsv"), "good\tnot-a-number\n").unwrap();
    let cfg = load_config(&write_config(dir.path(), Some(extra)), &Overrides::default()).unwrap();
    let result = run_experiment(&cfg, "").unwrap();
    assert_eq!(result.outcome.failures.len(), 1);
    assert_eq!(result.outcome.failures[0].0, "Y+E");
    assert!(result.outcome.failures[0].1.is_input_error());
    let failed = &result.manifest.variants[3];
    assert_eq!(failed.status, VariantStatus::Failed);
    assert!(failed.error.is_some());
    assert_eq!(result.reports.len(), 6);
    assert!(!cfg.output_dir.join("plot_Y+E.csv").exists());
}

#[test]
fn stage_commands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_config(dir.path(), None), &Overrides::default()).unwrap();
    assert!(run_ingest(&cfg).unwrap().is_success());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(cfg.output_dir.join("ingest.json")).unwrap()).unwrap();
    assert_eq!(summary["bars"], 160);
    assert_eq!(summary["datasets"][0]["posts"], 0);

    assert!(run_score(&cfg).unwrap().is_success());
    assert!(cfg.output_dir.join("scored_Y+T.jsonl").exists());
    assert!(!cfg.output_dir.join("scored_Y.jsonl").exists());

    assert!(run_featurize(&cfg).unwrap().is_success());
    let price = FeatureFrame::load(&cfg.output_dir.join("frame_Y.csv")).unwrap();
    let sentiment = FeatureFrame::load(&cfg.output_dir.join("frame_Y+T.csv")).unwrap();
    assert_eq!((price.width(), sentiment.width()), (9, 24));
}

#[test]
fn equalized_general_dates_are_executive_dates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_config(dir.path(), None), &Overrides::default()).unwrap();
    let ds = &cfg.datasets[2];
    let selected = select_posts(ds, cfg.seed).unwrap();
    assert!(selected.posts.iter().all(|p| p.category == Category::General));
    let scored = score_posts(ds, &selected).unwrap();
    let dates: BTreeSet<_> = scored.iter().map(|p| p.post.date).collect();
    assert!(dates.is_subset(&selected.executive_dates));
    assert!(scored.len() < selected.posts.len());
}

#[test]
fn seed_override_changes_training_only_through_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), None);
    let a = load_config(&path, &Overrides { seed: Some(1), out: Some(dir.path().join("a")) }).unwrap();
    let b = load_config(&path, &Overrides { seed: Some(2), out: Some(dir.path().join("b")) }).unwrap();
    assert_eq!(a.seed, 1);
    let ra = run_experiment(&a, "").unwrap();
    let rb = run_experiment(&b, "").unwrap();
    assert_ne!(ra.reports, rb.reports);
    assert_eq!(ra.plots[0].1.actual, rb.plots[0].1.actual);
}

#[test]
fn invalid_configs_fail_before_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), None);
    let text = fs::read_to_string(&path).unwrap().replace("\"window\"", "\"windw\"");
    fs::write(&path, text).unwrap();
    let err = load_config(&path, &Overrides::default()).unwrap_err();
    assert!(err.is_input_error());

    let path = write_config(dir.path(), None);
    let mut cfg: ExperimentConfig = load_config(&path, &Overrides::default()).unwrap();
    cfg.ohlcv_path = dir.path().join("missing.csv");
    let err = run_train(&cfg).unwrap_err();
    assert!(err.to_string().contains("missing.csv"));
    assert!(!cfg.output_dir.exists());
}
