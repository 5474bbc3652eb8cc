//! Trains a small GRU on the bundled synthetic market, saves a checkpoint,
//! reloads it and checks the reloaded network predicts identically.
//!
//! ```text
//! cargo run --release --example train_model -- [window] [epochs] [seed]
//! ```

use std::path::Path;

use sentiment_forecast::features::{apply_scaler, assemble_price_frame, fit_scaler, split_index, split_windows, EwmaMode};
use sentiment_forecast::ingest::parse_ohlcv;
use sentiment_forecast::nn::{build_preset, predict, train, Checkpoint, TrainConfig};

fn main() -> sentiment_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let window: usize = args.next().map_or(10, |a| a.parse().expect("window"));
    let epochs: usize = args.next().map_or(40, |a| a.parse().expect("epochs"));
    let seed: u64 = args.next().map_or(42, |a| a.parse().expect("seed"));
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");

    let frame = assemble_price_frame(&parse_ohlcv(&dir.join("ohlcv.csv"))?, EwmaMode::Adjusted)?;
    let cut = split_index(frame.len(), 0.8)?;
    let scaler = fit_scaler(&frame, frame.slice_rows(0, cut).date_range().expect("train rows"))?;
    let (train_set, test_set) = split_windows(&apply_scaler(&frame, &scaler)?, cut, window)?;

    let spec = build_preset("gru")?.with_recurrent_units(&[16, 16, 8])?;
    let config = TrainConfig { learning_rate: 3e-3, max_epochs: epochs, patience: 8, seed, ..TrainConfig::default() };
    let (net, history) = train(&spec, &train_set, &config)?;
    println!(
        "{} train windows, stopped at epoch {}, best epoch {} (val MSE {:.5})",
        train_set.len(),
        history.stopped_epoch,
        history.best_epoch,
        history.best_val_loss()
    );

    let ckpt_dir = tempfile::tempdir().expect("temp dir");
    let path = ckpt_dir.path().join("gru.json");
    Checkpoint::from_network(&net, seed).save(&path)?;
    let reloaded = Checkpoint::load(&path)?.into_network()?;
    let before = predict(&net, &test_set)?;
    let after = predict(&reloaded, &test_set)?;
    assert_eq!(before, after, "checkpoint round trip changed predictions");
    println!("checkpoint {} bytes, {} test predictions reproduced exactly", std::fs::metadata(&path).map_or(0, |m| m.len()), after.len());
    Ok(())
}
