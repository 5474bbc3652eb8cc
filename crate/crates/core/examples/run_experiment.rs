//! Runs the bundled smoke experiment end to end: five dataset variants, two
//! small models, reports, plots and a manifest.
//!
//! ```text
//! cargo run --release --example run_experiment -- [config.json] [output-dir]
//! ```

use std::path::{Path, PathBuf};

use sentiment_forecast::runner::{load_config, run_experiment, ExperimentConfig, Overrides};

fn main() -> sentiment_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic_smoke.json"), PathBuf::from);
    let scratch = tempfile::tempdir().expect("temp dir");
    let out = args.next().map_or_else(|| scratch.path().join("smoke"), PathBuf::from);

    let cfg = load_config(&config, &Overrides { seed: None, out: Some(out.clone()) })?;
    let result = run_experiment(&cfg, &ExperimentConfig::file_digest(&config)?)?;
    for r in &result.reports {
        println!("{:<14} {:<11} MAE {:>8.3}  RMSE {:>8.3}  R2a {:>7.3}  MAPE {:>6.3}%", r.dataset, r.model, r.mae, r.rmse, r.r2_adjusted, r.mape);
    }
    for v in &result.manifest.variants {
        if let Some(err) = &v.error {
            println!("{} failed: {err}", v.label);
        }
    }
    let mut files: Vec<String> = std::fs::read_dir(&out)
        .expect("output directory")
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("outputs in {}: {}", out.display(), files.join(" "));
    Ok(())
}
