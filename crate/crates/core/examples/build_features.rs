//! Builds the 24-column feature frame from the bundled synthetic market:
//! daily sentiment averages, spline-filled gaps, technical indicators and
//! the next-day target.
//!
//! ```text
//! cargo run --example build_features -- [output.csv]
//! ```

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use sentiment_forecast::features::{
    aggregate_daily, align_to_trading_days, assemble_feature_frame, bars_on_dates, impute_spline, EwmaMode,
};
use sentiment_forecast::ingest::{dedup_posts, parse_ohlcv, parse_posts};
use sentiment_forecast::sentiment::{attach_external_scores, read_external_scores};

fn main() -> sentiment_forecast::Result<()> {
    let out: Option<PathBuf> = std::env::args().nth(1).map(PathBuf::from);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");

    let bars = parse_ohlcv(&dir.join("ohlcv.csv"))?;
    let posts = dedup_posts(&parse_posts(&dir.join("posts.jsonl"))?);
    let (scored, missing) = attach_external_scores(&posts, &read_external_scores(&dir.join("scores.jsonl"))?)?;
    println!("{} scored posts, {} without scores", scored.len(), missing);

    let aligned = align_to_trading_days(&aggregate_daily(&scored)?, &bars)?;
    let gaps = aligned.iter().filter(|d| !d.observed()).count();
    let imputed = impute_spline(&aligned)?;
    println!("{} trading days with sentiment, {gaps} filled by spline", imputed.len());

    let dates: Vec<NaiveDate> = imputed.iter().map(|d| d.date).collect();
    let frame = assemble_feature_frame(&bars_on_dates(&bars, &dates)?, &imputed, EwmaMode::Adjusted)?;
    println!("frame: {} rows x {} columns", frame.len(), frame.width());
    println!("columns: {}", frame.columns.join(", "));
    if let Some(path) = out {
        frame.save(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
