//! Writes a synthetic market (prices, posts, classifier logits, executive
//! handles) to a directory.
//!
//! ```text
//! cargo run --example generate_synthetic -- <out-dir> [trading-days] [executive-day-fraction] [seed]
//! ```
//!
//! The bundled fixture in `fixtures/synthetic` was produced with
//! `fixtures/synthetic 160 0.4 7`.

use std::path::PathBuf;

use sentiment_forecast::synthetic::{generate, SyntheticConfig};

fn main() -> sentiment_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let defaults = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        trading_days: args.next().map_or(defaults.trading_days, |a| a.parse().expect("trading days")),
        executive_day_fraction: args.next().map_or(defaults.executive_day_fraction, |a| a.parse().expect("fraction")),
        seed: args.next().map_or(defaults.seed, |a| a.parse().expect("seed")),
        ..defaults
    };
    let data = generate(&cfg)?;
    data.write_to(&out, &cfg.executives)?;
    println!(
        "wrote {} bars and {} posts ({} .. {}) to {}",
        data.bars.len(),
        data.posts.len(),
        data.bars[0].date,
        data.bars[data.bars.len() - 1].date,
        out.display()
    );
    Ok(())
}
