//! Reads the bundled synthetic prices and posts, drops duplicates and splits
//! the posts into executive and general sets with a seeded sample.
//!
//! ```text
//! cargo run --example ingest_posts -- [sample-size] [seed]
//! ```

use std::path::Path;

use sentiment_forecast::ingest::{dedup_posts, parse_ohlcv, parse_posts, partition_posts, HandleList};

fn main() -> sentiment_forecast::Result<()> {
    let mut args = std::env::args().skip(1);
    let sample: usize = args.next().map_or(100, |a| a.parse().expect("sample size"));
    let seed: u64 = args.next().map_or(42, |a| a.parse().expect("seed"));
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");

    let bars = parse_ohlcv(&dir.join("ohlcv.csv"))?;
    println!("{} bars from {} to {}", bars.len(), bars[0].date, bars[bars.len() - 1].date);

    let raw = parse_posts(&dir.join("posts.jsonl"))?;
    let posts = dedup_posts(&raw);
    println!("{} posts, {} after dedup", raw.len(), posts.len());

    let handles = HandleList::load(&dir.join("handles.txt"))?;
    let (exec, general) = partition_posts(&posts, &handles, Some(sample), seed)?;
    println!("{} executive posts, {} general posts kept (sample {sample}, seed {seed})", exec.len(), general.len());
    for p in exec.iter().take(3) {
        println!("  {} {:<14} {}", p.date, p.author, p.text);
    }
    Ok(())
}
