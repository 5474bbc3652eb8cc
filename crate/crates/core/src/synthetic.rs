//! Seeded synthetic market: OHLCV bars whose next-day close responds to a
//! latent daily sentiment, plus posts and classifier logits carrying that
//! sentiment. Used for fixtures, examples and end-to-end checks.

use std::fs;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{validation, Error, Result};
use crate::ingest::{write_ohlcv, Category, DailyBar, Platform, PostRecord};
use crate::seed::derive_seed;

const POSITIVE_WORDS: [&str; 8] = ["great", "bullish", "gain", "excellent", "good", "happy", "confident", "growth"];
const NEGATIVE_WORDS: [&str; 8] = ["bad", "bearish", "crash", "awful", "fear", "decline", "fail", "disappointing"];
const NEUTRAL_WORDS: [&str; 6] = ["stock", "market", "today", "shares", "price", "trading"];

/// Generator knobs. `close[t+1] = close[t] + effect * s[t] - reversion *
/// (close[t] - base_price) + noise`, with `s[t]` uniform on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub trading_days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    pub base_price: f64,
    pub effect: f64,
    pub reversion: f64,
    pub price_noise: f64,
    /// Scale of the sentiment signal in the positive/negative logits.
    pub logit_gain: f64,
    pub logit_noise: f64,
    pub general_posts_per_day: usize,
    pub executive_posts_per_day: usize,
    /// Fraction of trading days that carry executive posts.
    pub executive_day_fraction: f64,
    pub executives: Vec<String>,
    pub general_authors: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            trading_days: 1000,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            seed: 7,
            base_price: 100.0,
            effect: 4.0,
            reversion: 0.1,
            price_noise: 0.5,
            logit_gain: 1.5,
            logit_noise: 0.3,
            general_posts_per_day: 3,
            executive_posts_per_day: 1,
            executive_day_fraction: 1.0,
            executives: vec!["ceo_alpha".into(), "cfo_beta".into(), "founder_gamma".into()],
            general_authors: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub bars: Vec<DailyBar>,
    /// Latent sentiment of each bar's day.
    pub signal: Vec<f64>,
    pub posts: Vec<PostRecord>,
    /// External classifier logits `[positive, negative, neutral]` per post id.
    pub logits: Vec<(String, [f64; 3])>,
}

#[derive(Serialize)]
struct PostLine<'a> {
    id: &'a str,
    date: String,
    user: &'a str,
    text: &'a str,
    platform: &'static str,
}

#[derive(Serialize)]
struct ScoreLine<'a> {
    id: &'a str,
    logits: [f64; 3],
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| validation(format!("invalid noise scale {sd}: {e}")))
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    if config.trading_days < 2 {
        return Err(validation("synthetic series needs at least 2 trading days"));
    }
    if config.general_posts_per_day == 0 || config.general_authors == 0 {
        return Err(validation("synthetic data needs general posts"));
    }
    if !(0.0..=1.0).contains(&config.executive_day_fraction) {
        return Err(validation("executive_day_fraction must lie in [0, 1]"));
    }
    if config.executive_posts_per_day > 0 && config.executives.is_empty() {
        return Err(validation("executive posts requested without executive handles"));
    }
    let dates = trading_days(config.start, config.trading_days);
    let n = dates.len();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synthetic/price"));
    let price_noise = normal(config.price_noise)?;
    let bar_noise = normal(0.3)?;
    let signal: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mut close = Vec::with_capacity(n);
    close.push(config.base_price);
    for t in 0..n - 1 {
        let c = close[t];
        let next = c + config.effect * signal[t] - config.reversion * (c - config.base_price) + price_noise.sample(&mut rng);
        close.push(next);
    }
    let mut bars = Vec::with_capacity(n);
    for t in 0..n {
        let open = if t == 0 { close[0] } else { close[t - 1] + bar_noise.sample(&mut rng) };
        let high = open.max(close[t]) + bar_noise.sample(&mut rng).abs();
        let low = open.min(close[t]) - bar_noise.sample(&mut rng).abs();
        let volume = (1e6 * (1.0 + 0.2 * bar_noise.sample(&mut rng))).round().max(1.0);
        let bar = DailyBar { date: dates[t], open, high, low, close: close[t], volume };
        bar.validate()?;
        bars.push(bar);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synthetic/posts"));
    let logit_noise = normal(config.logit_noise)?;
    let mut posts = Vec::new();
    let mut logits = Vec::new();
    for (t, &date) in dates.iter().enumerate() {
        let exec_today = config.executive_posts_per_day > 0 && rng.gen_bool(config.executive_day_fraction);
        let n_exec = if exec_today { config.executive_posts_per_day } else { 0 };
        for k in 0..config.general_posts_per_day + n_exec {
            let id = format!("p{:07}", posts.len());
            let author = if k < n_exec {
                config.executives.choose(&mut rng).expect("non-empty").clone()
            } else {
                format!("user{:03}", rng.gen_range(0..config.general_authors))
            };
            let s = signal[t];
            let l = [
                config.logit_gain * s + logit_noise.sample(&mut rng),
                -config.logit_gain * s + logit_noise.sample(&mut rng),
                logit_noise.sample(&mut rng),
            ];
            let mood: &[&str] = if l[0] > l[1] && l[0] > l[2] {
                &POSITIVE_WORDS
            } else if l[1] > l[2] {
                &NEGATIVE_WORDS
            } else {
                &NEUTRAL_WORDS
            };
            let text = format!(
                "{} {} {} #{id}",
                NEUTRAL_WORDS.choose(&mut rng).expect("non-empty"),
                mood.choose(&mut rng).expect("non-empty"),
                mood.choose(&mut rng).expect("non-empty"),
            );
            posts.push(PostRecord {
                id: id.clone(),
                date,
                author,
                text,
                platform: if k % 2 == 0 { Platform::Twitter } else { Platform::Reddit },
                category: Category::Unassigned,
                upvotes: None,
            });
            logits.push((id, l));
        }
    }
    Ok(SyntheticData { bars, signal, posts, logits })
}

impl SyntheticData {
    /// Writes `ohlcv.csv`, `posts.jsonl`, `scores.jsonl` and `handles.txt`.
    pub fn write_to(&self, dir: &Path, executives: &[String]) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut csv = Vec::new();
        write_ohlcv(&self.bars, &mut csv)?;
        crate::io_util::write_atomic(&dir.join("ohlcv.csv"), &csv)?;

        let mut posts = Vec::new();
        for p in &self.posts {
            let line = PostLine {
                id: &p.id,
                date: p.date.format("%Y-%m-%d").to_string(),
                user: &p.author,
                text: &p.text,
                platform: match p.platform {
                    Platform::Twitter => "twitter",
                    Platform::Reddit => "reddit",
                },
            };
            serde_json::to_writer(&mut posts, &line)?;
            posts.push(b'\n');
        }
        crate::io_util::write_atomic(&dir.join("posts.jsonl"), &posts)?;

        let mut scores = Vec::new();
        for (id, logits) in &self.logits {
            serde_json::to_writer(&mut scores, &ScoreLine { id, logits: *logits })?;
            scores.push(b'\n');
        }
        crate::io_util::write_atomic(&dir.join("scores.jsonl"), &scores)?;

        let mut handles = executives.join("\n");
        handles.push('\n');
        crate::io_util::write_atomic(&dir.join("handles.txt"), handles.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_ohlcv, parse_posts, HandleList};
    use crate::sentiment::read_external_scores;

    fn small() -> SyntheticConfig {
        SyntheticConfig { trading_days: 40, executive_day_fraction: 0.5, ..SyntheticConfig::default() }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small()).unwrap();
        assert_eq!(a, generate(&small()).unwrap());
        let b = generate(&SyntheticConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.bars, b.bars);
    }

    #[test]
    fn weekdays_and_planted_dynamics() {
        let cfg = SyntheticConfig { price_noise: 1e-9, ..small() };
        let data = generate(&cfg).unwrap();
        assert!(data.bars.iter().all(|b| !matches!(b.date.weekday(), Weekday::Sat | Weekday::Sun)));
        for t in 0..data.bars.len() - 1 {
            let c = data.bars[t].close;
            let want = c + cfg.effect * data.signal[t] - cfg.reversion * (c - cfg.base_price);
            assert!((data.bars[t + 1].close - want).abs() < 1e-6);
        }
    }

    #[test]
    fn files_round_trip_through_ingest() {
        let cfg = small();
        let data = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        data.write_to(dir.path(), &cfg.executives).unwrap();
        let bars = parse_ohlcv(&dir.path().join("ohlcv.csv")).unwrap();
        assert_eq!(bars.len(), data.bars.len());
        let posts = parse_posts(&dir.path().join("posts.jsonl")).unwrap();
        assert_eq!(posts.len(), data.posts.len());
        let scores = read_external_scores(&dir.path().join("scores.jsonl")).unwrap();
        assert_eq!(scores.len(), posts.len());
        let handles = HandleList::load(&dir.path().join("handles.txt")).unwrap();
        let exec_days: std::collections::BTreeSet<_> =
            posts.iter().filter(|p| handles.contains(&p.author)).map(|p| p.date).collect();
        assert!(!exec_days.is_empty() && exec_days.len() < bars.len());
    }
}
