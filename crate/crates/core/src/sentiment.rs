//! Per-post three-class sentiment scores.
//!
//! Two sources are supported: a rule-based lexicon scorer (valence lookup
//! with a three-token negation window, booster scaling and a compound score
//! normalised as `S / sqrt(S^2 + 15)`), and externally computed class logits
//! which are normalised with a softmax.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::ingest::PostRecord;

/// Normalisation constant of the compound score.
pub const COMPOUND_ALPHA: f64 = 15.0;
/// Number of preceding tokens searched for a negator.
pub const NEGATION_WINDOW: usize = 3;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Lexicon,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
    /// Only produced by the lexicon scorer.
    pub compound: Option<f64>,
    pub source: ScoreSource,
}

impl SentimentScore {
    /// `[positive, negative, neutral]`
    pub fn triple(&self) -> [f64; 3] {
        [self.positive, self.negative, self.neutral]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPost {
    pub post: PostRecord,
    pub score: SentimentScore,
}

/// Token valences plus negation and booster modifiers.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
    negators: HashSet<String>,
    boosters: HashMap<String, f64>,
}

impl Lexicon {
    pub fn new(
        entries: HashMap<String, f64>,
        negators: HashSet<String>,
        boosters: HashMap<String, f64>,
    ) -> Result<Self> {
        let bad_token = |t: &String| t.is_empty() || *t != t.to_lowercase();
        for (t, v) in &entries {
            if bad_token(t) {
                return Err(validation(format!("lexicon token {t:?} must be non-empty lowercase")));
            }
            if !v.is_finite() || !(-4.0..=4.0).contains(v) {
                return Err(validation(format!("valence of {t:?} must lie in [-4, 4], got {v}")));
            }
        }
        if let Some(t) = negators.iter().find(|t| bad_token(t)) {
            return Err(validation(format!("negator {t:?} must be non-empty lowercase")));
        }
        for (t, inc) in &boosters {
            if bad_token(t) {
                return Err(validation(format!("booster {t:?} must be non-empty lowercase")));
            }
            // a scale factor of zero or below would erase or flip the boosted word
            if !inc.is_finite() || *inc <= -1.0 {
                return Err(validation(format!("booster increment of {t:?} must be finite and > -1")));
            }
        }
        Ok(Lexicon { entries, negators, boosters })
    }

    /// Parses the TSV layout: `token<TAB>valence` lines, then optional
    /// `#NEGATORS` (one token per line) and `#BOOSTERS`
    /// (`token<TAB>increment`) sections. Other `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        enum Section {
            Valence,
            Negators,
            Boosters,
        }
        let mut section = Section::Valence;
        let mut entries = HashMap::new();
        let mut negators = HashSet::new();
        let mut boosters = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            match trimmed {
                "" => continue,
                "#NEGATORS" => {
                    section = Section::Negators;
                    continue;
                }
                "#BOOSTERS" => {
                    section = Section::Boosters;
                    continue;
                }
                t if t.starts_with('#') => continue,
                _ => {}
            }
            let fmt = |message: String| Error::Format {
                source_name: "lexicon".into(),
                line: line_no,
                message,
            };
            match section {
                Section::Negators => {
                    negators.insert(trimmed.to_string());
                }
                Section::Valence | Section::Boosters => {
                    let (token, value) = trimmed
                        .split_once('\t')
                        .ok_or_else(|| fmt(format!("expected token<TAB>value, got {trimmed:?}")))?;
                    let value: f64 = value.trim().parse().map_err(|_| Error::Parse {
                        source_name: "lexicon".into(),
                        line: line_no,
                        message: format!("{value:?} is not a number"),
                    })?;
                    let token = token.trim().to_string();
                    if matches!(section, Section::Valence) {
                        entries.insert(token, value);
                    } else {
                        boosters.insert(token, value);
                    }
                }
            }
        }
        Lexicon::new(entries, negators, boosters)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The small finance-flavoured lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn set_valence(&mut self, token: &str, valence: f64) -> Result<()> {
        if !valence.is_finite() || !(-4.0..=4.0).contains(&valence) {
            return Err(validation(format!("valence must lie in [-4, 4], got {valence}")));
        }
        self.entries.insert(token.to_lowercase(), valence);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Splits on whitespace, strips surrounding punctuation and lowercases.
/// Tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Scores one text with the lexicon.
pub fn lexicon_score(text: &str, lexicon: &Lexicon) -> Result<SentimentScore> {
    if text.trim().is_empty() {
        return Err(validation("cannot score empty text"));
    }
    let tokens = tokenize(text);
    let mut pos_mass = 0.0;
    let mut neg_mass = 0.0;
    let mut neu_mass = 0.0;
    let mut sum = 0.0;
    for (i, tok) in tokens.iter().enumerate() {
        let Some(mut v) = lexicon.valence(tok) else {
            neu_mass += 1.0;
            continue;
        };
        if i > 0 {
            if let Some(inc) = lexicon.boosters.get(&tokens[i - 1]) {
                v *= 1.0 + inc;
            }
        }
        let window = &tokens[i.saturating_sub(NEGATION_WINDOW)..i];
        if window.iter().any(|t| lexicon.negators.contains(t)) {
            v = -v;
        }
        sum += v;
        if v > 0.0 {
            pos_mass += v;
        } else if v < 0.0 {
            neg_mass -= v;
        } else {
            neu_mass += 1.0;
        }
    }
    let total = pos_mass + neg_mass + neu_mass;
    let (positive, negative, neutral) = if total > 0.0 {
        (pos_mass / total, neg_mass / total, neu_mass / total)
    } else {
        (0.0, 0.0, 1.0)
    };
    Ok(SentimentScore {
        positive,
        negative,
        neutral,
        compound: Some(sum / (sum * sum + COMPOUND_ALPHA).sqrt()),
        source: ScoreSource::Lexicon,
    })
}

/// Max-shifted softmax over three logits.
pub fn softmax_normalize(logits: [f64; 3]) -> Result<[f64; 3]> {
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(validation(format!("non-finite logits {logits:?}")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|x| (x - max).exp());
    let z: f64 = exps.iter().sum();
    Ok(exps.map(|e| e / z))
}

/// Scores every post with the lexicon, preserving order.
pub fn score_with_lexicon(posts: &[PostRecord], lexicon: &Lexicon) -> Result<Vec<ScoredPost>> {
    posts
        .iter()
        .map(|p| {
            Ok(ScoredPost {
                post: p.clone(),
                score: lexicon_score(&p.text, lexicon)?,
            })
        })
        .collect()
}

/// Pairs each post with the softmax of its external logits. Returns the
/// scored posts and the number of score entries that matched no post.
pub fn attach_external_scores(
    posts: &[PostRecord],
    scores: &HashMap<String, [f64; 3]>,
) -> Result<(Vec<ScoredPost>, usize)> {
    let missing: Vec<&str> = posts
        .iter()
        .filter(|p| !scores.contains_key(&p.id))
        .map(|p| p.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(validation(format!("no external scores for post ids: {}", missing.join(", "))));
    }
    let mut out = Vec::with_capacity(posts.len());
    for p in posts {
        let [positive, negative, neutral] = softmax_normalize(scores[&p.id])
            .map_err(|e| validation(format!("post {}: {e}", p.id)))?;
        out.push(ScoredPost {
            post: p.clone(),
            score: SentimentScore { positive, negative, neutral, compound: None, source: ScoreSource::External },
        });
    }
    let ids: HashSet<&str> = posts.iter().map(|p| p.id.as_str()).collect();
    let ignored = scores.keys().filter(|k| !ids.contains(k.as_str())).count();
    if ignored > 0 {
        log::warn!("{ignored} external score entries match no post and were ignored");
    }
    Ok((out, ignored))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    id: String,
    logits: [f64; 3],
}

/// Reads `{"id": ..., "logits": [positive, negative, neutral]}` lines.
pub fn read_external_scores(path: &Path) -> Result<HashMap<String, [f64; 3]>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreLine = serde_json::from_str(&line).map_err(|e| Error::Format {
            source_name: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if map.insert(rec.id.clone(), rec.logits).is_some() {
            return Err(validation(format!("duplicate score id {:?} in {}", rec.id, path.display())));
        }
    }
    Ok(map)
}
