//! Plants a sentiment effect in a synthetic 1,000-day market and compares a
//! GRU trained with and without the sentiment columns.
//!
//! ```text
//! cargo run --release --example signal_recovery -- [window] [learning-rate] [epochs]
//! ```

use std::fs;

use sentiment_forecast::runner::{run_experiment, ExperimentConfig};
use sentiment_forecast::synthetic::{generate, SyntheticConfig};

fn main() -> sentiment_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let window: usize = args.next().map_or(30, |a| a.parse().expect("window"));
    let lr: f64 = args.next().map_or(1e-4, |a| a.parse().expect("learning rate"));
    let epochs: usize = args.next().map_or(50, |a| a.parse().expect("epochs"));

    let dir = tempfile::tempdir().expect("temp dir");
    let market = SyntheticConfig::default();
    generate(&market)?.write_to(dir.path(), &market.executives)?;

    let config = serde_json::json!({
        "name": "signal_recovery",
        "ohlcv_path": "ohlcv.csv",
        "datasets": [
            { "label": "Y" },
            {
                "label": "Y+S",
                "post_sources": [{ "path": "posts.jsonl" }],
                "sentiment": { "mode": "external", "scores_path": "scores.jsonl" }
            }
        ],
        "models": [{ "preset": "gru", "units": [32, 32, 16] }],
        "train": { "learning_rate": lr, "max_epochs": epochs },
        "window": window,
        "output_dir": "out"
    });
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(&config)?).expect("write config");
    let cfg = ExperimentConfig::load(&path)?;
    let result = run_experiment(&cfg, &ExperimentConfig::file_digest(&path)?)?;

    for r in &result.reports {
        println!("{:<4} MAE {:.3}  RMSE {:.3}  R2a {:.3}  MAPE {:.3}%", r.dataset, r.mae, r.rmse, r.r2_adjusted, r.mape);
    }
    if let [price_only, with_sentiment] = &result.reports[..] {
        println!("MAE reduction from sentiment: {:.1}%", 100.0 * (1.0 - with_sentiment.mae / price_only.mae));
    }
    Ok(())
}
