//! Price history and social-media post ingestion.
//!
//! Prices arrive as Yahoo-style daily CSV files, posts as JSONL dumps. Posts
//! are deduplicated per author, split into executive and general categories
//! by a handle list, and the general majority can be under-sampled.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Exact header expected on price history files.
pub const OHLCV_HEADER: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];

/// One trading day of price data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl DailyBar {
    /// Checks the price ordering and sign invariants, naming the first
    /// offending field.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(validation(format!("{}: {name} must be positive, got {v}", self.date)));
            }
        }
        if !(self.volume.is_finite() && self.volume >= 0.0) {
            return Err(validation(format!(
                "{}: volume must be non-negative, got {}",
                self.date, self.volume
            )));
        }
        if self.low > self.open.min(self.close) {
            return Err(validation(format!(
                "{}: low {} exceeds min(open, close)",
                self.date, self.low
            )));
        }
        if self.high < self.open.max(self.close) {
            return Err(validation(format!(
                "{}: high {} below max(open, close)",
                self.date, self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Twitter,
    Reddit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Executive,
    General,
    Unassigned,
}

/// A single social-media post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub date: NaiveDate,
    pub author: String,
    pub text: String,
    pub platform: Platform,
    pub category: Category,
    pub upvotes: Option<u64>,
}

/// Lowercased set of executive author handles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandleList {
    handles: BTreeSet<String>,
}

impl HandleList {
    pub fn new<I, S>(handles: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for h in handles {
            let h = normalize_handle(h.as_ref());
            if h.is_empty() || h.chars().any(char::is_whitespace) {
                return Err(validation(format!("invalid handle {:?}", h)));
            }
            set.insert(h);
        }
        if set.is_empty() {
            return Err(validation("executive handle list is empty"));
        }
        Ok(HandleList { handles: set })
    }

    /// Parses one handle per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn contains(&self, author: &str) -> bool {
        self.handles.contains(&normalize_handle(author))
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }
}

fn normalize_handle(h: &str) -> String {
    h.trim().trim_start_matches('@').to_lowercase()
}

/// Reads a price history CSV from disk.
pub fn parse_ohlcv(path: &Path) -> Result<Vec<DailyBar>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ohlcv(file, &path.display().to_string())
}

/// Reads a price history CSV from any reader. Rows are returned sorted by
/// date; the `Adj Close` column is checked for parseability and dropped.
pub fn read_ohlcv<R: Read>(reader: R, source_name: &str) -> Result<Vec<DailyBar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r?,
        None => {
            return Err(Error::Format {
                source_name: source_name.to_string(),
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    if header != OHLCV_HEADER {
        return Err(Error::Format {
            source_name: source_name.to_string(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", OHLCV_HEADER.join(","), header.join(",")),
        });
    }

    let mut bars = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != OHLCV_HEADER.len() {
            return Err(Error::Format {
                source_name: source_name.to_string(),
                line,
                message: format!("expected 7 fields, found {}", record.len()),
            });
        }
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
            .map_err(|e| parse_err(format!("date {:?}: {e}", &record[0])))?;
        let mut nums = [0.0f64; 6];
        for (k, slot) in nums.iter_mut().enumerate() {
            let raw = record[k + 1].trim();
            *slot = raw
                .parse::<f64>()
                .map_err(|_| parse_err(format!("{} {:?} is not a number", OHLCV_HEADER[k + 1], raw)))?;
        }
        let bar = DailyBar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[5],
        };
        bar.validate()?;
        bars.push(bar);
    }

    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(validation(format!("{}: duplicate date in {source_name}", w[0].date)));
    }
    Ok(bars)
}

/// Writes bars in the same layout `read_ohlcv` accepts (`Adj Close` repeats
/// the close).
pub fn write_ohlcv<W: Write>(bars: &[DailyBar], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(OHLCV_HEADER)?;
    for b in bars {
        wtr.write_record([
            b.date.format("%Y-%m-%d").to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.close.to_string(),
            b.volume.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<ohlcv writer>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct RawPost {
    id: String,
    date: String,
    user: String,
    text: String,
    platform: String,
    #[serde(default)]
    #[allow(dead_code)]
    subreddit: Option<String>,
    #[serde(default)]
    upvotes: Option<u64>,
}

/// Reads a JSONL post dump from disk.
pub fn parse_posts(path: &Path) -> Result<Vec<PostRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_posts(BufReader::new(file), &path.display().to_string())
}

pub fn read_posts<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<PostRecord>> {
    let mut posts = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let format_err = |message: String| Error::Format {
            source_name: source_name.to_string(),
            line: line_no,
            message,
        };
        let raw: RawPost = serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
        let date = parse_post_date(&raw.date).ok_or_else(|| Error::Parse {
            source_name: source_name.to_string(),
            line: line_no,
            message: format!("unrecognised date {:?}", raw.date),
        })?;
        let platform = match raw.platform.to_lowercase().as_str() {
            "twitter" => Platform::Twitter,
            "reddit" => Platform::Reddit,
            other => return Err(format_err(format!("unknown platform {other:?}"))),
        };
        if raw.text.trim().is_empty() {
            return Err(validation(format!("post {} has empty text (line {line_no})", raw.id)));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(validation(format!("duplicate post id {:?} at line {line_no}", raw.id)));
        }
        posts.push(PostRecord {
            id: raw.id,
            date,
            author: raw.user,
            text: raw.text,
            platform,
            category: Category::Unassigned,
            upvotes: raw.upvotes,
        });
    }
    Ok(posts)
}

/// Accepts `YYYY-MM-DD` optionally followed by a time part; the time is
/// discarded.
fn parse_post_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let day = raw.get(..10)?;
    match raw.as_bytes().get(10) {
        None | Some(b'T') | Some(b' ') => NaiveDate::parse_from_str(day, "%Y-%m-%d").ok(),
        _ => None,
    }
}

/// Keeps the earliest post for each (author, trimmed text) pair.
pub fn dedup_posts(posts: &[PostRecord]) -> Vec<PostRecord> {
    let mut keep: HashMap<(String, &str), usize> = HashMap::new();
    for (i, p) in posts.iter().enumerate() {
        let key = (p.author.to_lowercase(), p.text.trim());
        keep.entry(key)
            .and_modify(|j| {
                if p.date < posts[*j].date {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut idx: Vec<usize> = keep.into_values().collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| posts[i].clone()).collect()
}

/// Splits posts into executive and general sets. When `sample_size` is set
/// and the general set is larger, a seeded uniform sample without
/// replacement of exactly that many general posts is kept, in input order.
pub fn partition_posts(
    posts: &[PostRecord],
    executives: &HandleList,
    sample_size: Option<usize>,
    seed: u64,
) -> Result<(Vec<PostRecord>, Vec<PostRecord>)> {
    if sample_size == Some(0) {
        return Err(validation("sample size must be positive"));
    }
    let mut exec = Vec::new();
    let mut general = Vec::new();
    for p in posts {
        let mut p = p.clone();
        if executives.contains(&p.author) {
            p.category = Category::Executive;
            exec.push(p);
        } else {
            p.category = Category::General;
            general.push(p);
        }
    }
    if let Some(k) = sample_size {
        if general.len() > k {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen = rand::seq::index::sample(&mut rng, general.len(), k).into_vec();
            chosen.sort_unstable();
            general = chosen.into_iter().map(|i| general[i].clone()).collect();
        }
    }
    Ok((exec, general))
}
