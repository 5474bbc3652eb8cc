//! Daily sentiment aggregation, trading-day alignment and the feature frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::ewma::{ewma_with, EwmaMode, EWMA_SPANS};
use super::spline::NaturalSpline;
use crate::error::{contract, validation, Error, Result};
use crate::ingest::DailyBar;
use crate::sentiment::ScoredPost;

/// Names of the three sentiment channels, in storage order.
pub const SENTIMENT_CHANNELS: [&str; 3] = ["positive", "negative", "neutral"];
const PRICE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];

/// Mean sentiment of one calendar day; `scores` is `None` when no post was
/// seen that day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub date: NaiveDate,
    pub scores: Option<[f64; 3]>,
}

impl DailySentiment {
    pub fn observed(&self) -> bool {
        self.scores.is_some()
    }
}

/// Date-indexed feature matrix with the next-day close as target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    /// `n x columns.len()`
    pub values: Array2<f64>,
    pub target: Vec<f64>,
}

/// Closed date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// Column layout of the 24-feature sentiment frame.
pub fn sentiment_columns() -> Vec<String> {
    let mut cols: Vec<String> = PRICE_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(SENTIMENT_CHANNELS.iter().map(|s| s.to_string()));
    cols.extend(EWMA_SPANS.iter().map(|s| format!("close_ewma_{s}")));
    for ch in SENTIMENT_CHANNELS {
        cols.extend(EWMA_SPANS.iter().map(|s| format!("{ch}_ewma_{s}")));
    }
    cols
}

/// Column layout of the 9-feature price-only frame.
pub fn price_columns() -> Vec<String> {
    let mut cols: Vec<String> = PRICE_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(EWMA_SPANS.iter().map(|s| format!("close_ewma_{s}")));
    cols
}

impl FeatureFrame {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.values.column(j).to_vec())
    }

    pub fn date_range(&self) -> Option<DateRange> {
        Some(DateRange { start: *self.dates.first()?, end: *self.dates.last()? })
    }

    /// Rows `[start, end)` as a new frame.
    pub fn slice_rows(&self, start: usize, end: usize) -> FeatureFrame {
        FeatureFrame {
            dates: self.dates[start..end].to_vec(),
            columns: self.columns.clone(),
            values: self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            target: self.target[start..end].to_vec(),
        }
    }

    /// Writes `date,<columns>,target` with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("target".into());
        wtr.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.format("%Y-%m-%d").to_string()];
            row.extend(self.values.row(i).iter().map(|v| v.to_string()));
            row.push(self.target[i].to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<frame writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureFrame> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let k = header.len();
        if k < 3 || &header[0] != "date" || &header[k - 1] != "target" {
            return Err(Error::Format {
                source_name: "feature frame".into(),
                line: 1,
                message: "header must be date,<columns>,target".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(1).take(k - 2).map(String::from).collect();
        let mut dates = Vec::new();
        let mut flat = Vec::new();
        let mut target = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let perr = |message: String| Error::Parse { source_name: "feature frame".into(), line, message };
            dates.push(NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| perr(e.to_string()))?);
            for j in 1..k {
                let v: f64 = rec[j].parse().map_err(|_| perr(format!("{:?} is not a number", &rec[j])))?;
                if j == k - 1 {
                    target.push(v);
                } else {
                    flat.push(v);
                }
            }
        }
        let values = Array2::from_shape_vec((dates.len(), columns.len()), flat)
            .map_err(|e| contract(e.to_string()))?;
        Ok(FeatureFrame { dates, columns, values, target })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        crate::io_util::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<FeatureFrame> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

/// Means post scores per calendar day, covering every day from the first
/// to the last post.
pub fn aggregate_daily(posts: &[ScoredPost]) -> Result<Vec<DailySentiment>> {
    if posts.is_empty() {
        return Err(validation("cannot aggregate an empty post set"));
    }
    let mut sums: BTreeMap<NaiveDate, ([f64; 3], usize)> = BTreeMap::new();
    for p in posts {
        let e = sums.entry(p.post.date).or_insert(([0.0; 3], 0));
        for (acc, v) in e.0.iter_mut().zip(p.score.triple()) {
            *acc += v;
        }
        e.1 += 1;
    }
    let first = *sums.keys().next().expect("non-empty");
    let last = *sums.keys().next_back().expect("non-empty");
    Ok(first
        .iter_days()
        .take_while(|d| *d <= last)
        .map(|date| DailySentiment {
            date,
            scores: sums.get(&date).map(|(s, c)| s.map(|v| v / *c as f64)),
        })
        .collect())
}

/// Re-indexes daily sentiment on the bar dates. The result starts at the
/// first and ends at the last bar date carrying observed sentiment, since
/// gaps can only be imputed between observations.
pub fn align_to_trading_days(sentiment: &[DailySentiment], bars: &[DailyBar]) -> Result<Vec<DailySentiment>> {
    if sentiment.is_empty() || bars.is_empty() {
        return Err(validation("alignment needs non-empty sentiment and bars"));
    }
    let by_date: BTreeMap<NaiveDate, Option<[f64; 3]>> = sentiment.iter().map(|s| (s.date, s.scores)).collect();
    let aligned: Vec<DailySentiment> = bars
        .iter()
        .map(|b| DailySentiment { date: b.date, scores: by_date.get(&b.date).copied().flatten() })
        .collect();
    let first = aligned.iter().position(DailySentiment::observed);
    let last = aligned.iter().rposition(DailySentiment::observed);
    match (first, last) {
        (Some(a), Some(b)) => Ok(aligned[a..=b].to_vec()),
        _ => Err(validation("no bar date carries observed sentiment")),
    }
}

/// Fills unobserved days per channel with a natural cubic spline over the
/// day index, clamped to [0, 1].
pub fn impute_spline(series: &[DailySentiment]) -> Result<Vec<DailySentiment>> {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(validation("cannot impute an empty series"));
    };
    if !first.observed() || !last.observed() {
        return Err(validation("cannot impute outside the observed range"));
    }
    let knots: Vec<usize> = (0..series.len()).filter(|&i| series[i].observed()).collect();
    if knots.len() < 2 {
        return Err(validation("spline imputation needs at least 2 observed days"));
    }
    if knots.len() == series.len() {
        return Ok(series.to_vec());
    }
    let xs: Vec<f64> = knots.iter().map(|&i| i as f64).collect();
    let mut splines = Vec::with_capacity(3);
    for ch in 0..3 {
        let ys: Vec<f64> = knots.iter().map(|&i| series[i].scores.expect("knot")[ch]).collect();
        splines.push(NaturalSpline::fit(&xs, &ys)?);
    }
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, s)| match s.scores {
            Some(_) => *s,
            None => DailySentiment {
                date: s.date,
                scores: Some(std::array::from_fn(|ch| splines[ch].eval(i as f64).clamp(0.0, 1.0))),
            },
        })
        .collect())
}

fn check_bars_match(bars: &[DailyBar], dates: &[NaiveDate]) -> Result<()> {
    if bars.len() != dates.len() || bars.iter().zip(dates).any(|(b, d)| b.date != *d) {
        return Err(validation("bars and sentiment are not aligned on the same dates"));
    }
    Ok(())
}

fn price_block(bars: &[DailyBar], mode: EwmaMode) -> Result<Vec<Vec<f64>>> {
    let close: Vec<f64> = bars.iter().map(|b| b.close).collect();
    let mut cols = vec![
        bars.iter().map(|b| b.open).collect(),
        bars.iter().map(|b| b.high).collect(),
        bars.iter().map(|b| b.low).collect(),
        close.clone(),
        bars.iter().map(|b| b.volume).collect(),
    ];
    for span in EWMA_SPANS {
        cols.push(ewma_with(&close, span, mode)?);
    }
    Ok(cols)
}

fn build_frame(bars: &[DailyBar], columns: Vec<String>, data: Vec<Vec<f64>>) -> FeatureFrame {
    let n = bars.len() - 1;
    let values = Array2::from_shape_fn((n, columns.len()), |(i, j)| data[j][i]);
    FeatureFrame {
        dates: bars[..n].iter().map(|b| b.date).collect(),
        columns,
        values,
        target: bars[1..].iter().map(|b| b.close).collect(),
    }
}

/// Builds the 24-column frame; the last aligned day only supplies the
/// previous day's target.
pub fn assemble_feature_frame(bars: &[DailyBar], sentiment: &[DailySentiment], mode: EwmaMode) -> Result<FeatureFrame> {
    if bars.len() < 2 {
        return Err(validation("a feature frame needs at least 2 aligned days"));
    }
    let dates: Vec<NaiveDate> = sentiment.iter().map(|s| s.date).collect();
    check_bars_match(bars, &dates)?;
    let mut channels = [(); 3].map(|_| Vec::with_capacity(bars.len()));
    for s in sentiment {
        let v = s.scores.ok_or_else(|| validation(format!("{}: sentiment not imputed", s.date)))?;
        for ch in 0..3 {
            channels[ch].push(v[ch]);
        }
    }
    let mut data = price_block(bars, mode)?;
    let ewma_cols = data.split_off(5);
    data.extend(channels.iter().cloned());
    data.extend(ewma_cols);
    for ch in &channels {
        for span in EWMA_SPANS {
            data.push(ewma_with(ch, span, mode)?);
        }
    }
    Ok(build_frame(bars, sentiment_columns(), data))
}

/// Builds the 9-column frame (raw prices plus close averages).
pub fn assemble_price_frame(bars: &[DailyBar], mode: EwmaMode) -> Result<FeatureFrame> {
    if bars.len() < 2 {
        return Err(validation("a feature frame needs at least 2 days"));
    }
    let data = price_block(bars, mode)?;
    Ok(build_frame(bars, price_columns(), data))
}

/// Restricts bars to the given dates (which must all be present).
pub fn bars_on_dates(bars: &[DailyBar], dates: &[NaiveDate]) -> Result<Vec<DailyBar>> {
    let by_date: BTreeMap<NaiveDate, &DailyBar> = bars.iter().map(|b| (b.date, b)).collect();
    dates
        .iter()
        .map(|d| by_date.get(d).map(|b| **b).ok_or_else(|| validation(format!("no bar on {d}"))))
        .collect()
}

/// First `floor(ratio * n)` rows train, the rest test.
pub fn chrono_split(frame: &FeatureFrame, ratio: f64) -> Result<(FeatureFrame, FeatureFrame)> {
    let cut = split_index(frame.len(), ratio)?;
    Ok((frame.slice_rows(0, cut), frame.slice_rows(cut, frame.len())))
}

pub fn split_index(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(validation(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let cut = (ratio * n as f64).floor() as usize;
    if cut == 0 || cut >= n {
        return Err(validation(format!("split ratio {ratio} on {n} rows leaves an empty side")));
    }
    Ok(cut)
}

/// Sliding windows of `W` consecutive rows, each labelled with the target of
/// its last row.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSet {
    /// `m x W x features`
    pub samples: Array3<f64>,
    pub targets: Vec<f64>,
    /// Date of the last row of each window.
    pub dates: Vec<NaiveDate>,
    pub window: usize,
}

impl WindowedSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.samples.len_of(Axis(2))
    }

    /// Samples `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> WindowedSet {
        WindowedSet {
            samples: self.samples.slice(ndarray::s![start..end, .., ..]).to_owned(),
            targets: self.targets[start..end].to_vec(),
            dates: self.dates[start..end].to_vec(),
            window: self.window,
        }
    }

    pub fn select(&self, idx: &[usize]) -> WindowedSet {
        WindowedSet {
            samples: self.samples.select(Axis(0), idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            window: self.window,
        }
    }
}

pub fn make_windows(frame: &FeatureFrame, window: usize) -> Result<WindowedSet> {
    let n = frame.len();
    if window == 0 || window > n {
        return Err(validation(format!("window {window} invalid for {n} rows")));
    }
    let m = n - window + 1;
    let samples = Array3::from_shape_fn((m, window, frame.width()), |(i, t, j)| frame.values[[i + t, j]]);
    Ok(WindowedSet {
        samples,
        targets: frame.target[window - 1..].to_vec(),
        dates: frame.dates[window - 1..].to_vec(),
        window,
    })
}

/// Windows for a chronological split at row `cut`: training windows lie
/// wholly in `[0, cut)`; test windows end on each test row and may reach
/// back into the training rows for their lookback.
pub fn split_windows(frame: &FeatureFrame, cut: usize, window: usize) -> Result<(WindowedSet, WindowedSet)> {
    if cut == 0 || cut >= frame.len() {
        return Err(validation("split leaves an empty side"));
    }
    if window > cut {
        return Err(validation(format!("window {window} longer than the {cut} training rows")));
    }
    let train = make_windows(&frame.slice_rows(0, cut), window)?;
    let test = make_windows(&frame.slice_rows(cut + 1 - window, frame.len()), window)?;
    Ok((train, test))
}

/// Drops general posts on days without any executive post.
pub fn equalize_coverage(general: &[ScoredPost], executive_dates: &BTreeSet<NaiveDate>) -> Vec<ScoredPost> {
    general
        .iter()
        .filter(|p| executive_dates.contains(&p.post.date))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Category, Platform, PostRecord};
    use crate::sentiment::{ScoreSource, SentimentScore};

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, day).unwrap()
    }

    fn scored(id: &str, day: u32, pos: f64) -> ScoredPost {
        ScoredPost {
            post: PostRecord {
                id: id.into(),
                date: d(day),
                author: "a".into(),
                text: "t".into(),
                platform: Platform::Twitter,
                category: Category::General,
                upvotes: None,
            },
            score: SentimentScore {
                positive: pos,
                negative: 0.5 - pos / 2.0,
                neutral: 0.5 - pos / 2.0,
                compound: None,
                source: ScoreSource::External,
            },
        }
    }

    fn bar(day: u32, close: f64) -> DailyBar {
        DailyBar { date: d(day), open: close, high: close + 1.0, low: close - 1.0, close, volume: 100.0 }
    }

    #[test]
    fn aggregation_means_and_gaps() {
        let agg = aggregate_daily(&[scored("1", 1, 0.2), scored("2", 1, 0.4), scored("3", 3, 0.6)]).unwrap();
        assert_eq!(agg.len(), 3);
        assert!((agg[0].scores.unwrap()[0] - 0.3).abs() < 1e-15);
        assert!(!agg[1].observed());
        assert_eq!(agg[2].scores.unwrap()[0], 0.6);
        let single = aggregate_daily(&[scored("1", 5, 0.7)]).unwrap();
        let got = single[0].scores.unwrap();
        assert_eq!(got[0], 0.7);
        assert!((got[1] - 0.15).abs() < 1e-15 && (got[2] - 0.15).abs() < 1e-15);
        assert!(aggregate_daily(&[]).is_err());
    }

    #[test]
    fn alignment_drops_weekends_and_leading_gaps() {
        // 2021-03-01 is a Monday
        let sentiment: Vec<DailySentiment> =
            (1..=14).map(|k| DailySentiment { date: d(k), scores: Some([0.1, 0.2, 0.7]) }).collect();
        let bars: Vec<DailyBar> = (1..=14)
            .filter(|k| d(*k).format("%u").to_string().parse::<u32>().unwrap() <= 5)
            .map(|k| bar(k, 10.0))
            .collect();
        let aligned = align_to_trading_days(&sentiment, &bars).unwrap();
        assert_eq!(aligned.len(), bars.len());
        assert!(aligned.iter().zip(&bars).all(|(s, b)| s.date == b.date));

        let late: Vec<DailySentiment> = sentiment[3..].to_vec();
        let out = align_to_trading_days(&late, &bars).unwrap();
        assert_eq!(out[0].date, bars[3].date);

        let disjoint = vec![DailySentiment { date: d(20), scores: Some([0.1, 0.2, 0.7]) }];
        assert!(align_to_trading_days(&disjoint, &bars).is_err());
    }

    #[test]
    fn impute_errors_and_identity() {
        let obs = |k, v: f64| DailySentiment { date: d(k), scores: Some([v, v, v]) };
        let gap = |k| DailySentiment { date: d(k), scores: None };
        assert!(impute_spline(&[gap(1), obs(2, 0.1), obs(3, 0.2)]).is_err());
        assert!(impute_spline(&[obs(1, 0.1), gap(2)]).is_err());
        assert!(impute_spline(&[obs(1, 0.1)]).is_err());
        let full = vec![obs(1, 0.1), obs(2, 0.3)];
        assert_eq!(impute_spline(&full).unwrap(), full);
        let two = impute_spline(&[obs(1, 0.1), gap(2), gap(3), obs(4, 0.4)]).unwrap();
        assert!((two[1].scores.unwrap()[0] - 0.2).abs() < 1e-15);
        assert!((two[2].scores.unwrap()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn frame_layout_and_target() {
        let bars: Vec<DailyBar> = (1..=10).map(|k| bar(k, 10.0 + k as f64)).collect();
        let sent: Vec<DailySentiment> =
            (1..=10).map(|k| DailySentiment { date: d(k), scores: Some([0.2, 0.3, 0.5]) }).collect();
        let f = assemble_feature_frame(&bars, &sent, EwmaMode::Adjusted).unwrap();
        assert_eq!(f.len(), 9);
        assert_eq!(f.width(), 24);
        assert_eq!(f.columns, sentiment_columns());
        for t in 0..9 {
            assert_eq!(f.target[t], bars[t + 1].close);
        }
        let p = assemble_price_frame(&bars, EwmaMode::Adjusted).unwrap();
        assert_eq!(p.width(), 9);
        assert!(assemble_feature_frame(&bars[..1], &sent[..1], EwmaMode::Adjusted).is_err());
        assert!(assemble_feature_frame(&bars[1..], &sent[..9], EwmaMode::Adjusted).is_err());

        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("date,open,high,low,close,volume,positive"));
        assert_eq!(FeatureFrame::read_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn splitting_and_windows() {
        let bars: Vec<DailyBar> = (1..=11).map(|k| bar(k, 10.0 + k as f64)).collect();
        let f = assemble_price_frame(&bars, EwmaMode::Adjusted).unwrap();
        let (train, test) = chrono_split(&f, 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(train.dates.last() < test.dates.first());
        // floor(0.999 * 10) = 9 keeps one test row; floor(0.05 * 10) = 0 empties train
        let (tr, te) = chrono_split(&f, 0.999).unwrap();
        assert_eq!((tr.len(), te.len()), (9, 1));
        assert!(chrono_split(&f, 0.05).is_err());
        assert!(chrono_split(&f, 1.0).is_err());

        let w1 = make_windows(&f, 1).unwrap();
        assert_eq!(w1.len(), f.len());
        let w = make_windows(&f.slice_rows(0, 5), 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.targets, f.target[2..5].to_vec());
        assert_eq!(w.samples[[1, 0, 3]], f.values[[1, 3]]);
        assert!(make_windows(&f, 11).is_err());

        let (tr, te) = split_windows(&f, 8, 3).unwrap();
        assert_eq!(tr.len(), 6);
        assert_eq!(te.targets, test.target);
        assert_eq!(te.dates, test.dates);
    }

    #[test]
    fn equalization() {
        let general = vec![scored("1", 1, 0.1), scored("2", 2, 0.1), scored("3", 3, 0.1)];
        let execs: BTreeSet<NaiveDate> = [d(1), d(3)].into_iter().collect();
        let out = equalize_coverage(&general, &execs);
        assert_eq!(out.iter().map(|p| p.post.id.as_str()).collect::<Vec<_>>(), ["1", "3"]);
        assert_eq!(equalize_coverage(&out, &execs), out);
        let all: BTreeSet<NaiveDate> = (1..=3).map(d).collect();
        assert_eq!(equalize_coverage(&general, &all), general);
        assert!(equalize_coverage(&general, &BTreeSet::new()).is_empty());
    }
}
