use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{validation, Error, Result};
use crate::features::EwmaMode;
use crate::nn::{build_preset, ModelSpec, TrainConfig};

fn default_seed() -> u64 {
    42
}
fn default_window() -> usize {
    30
}
fn default_split() -> f64 {
    0.8
}
fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Declarative description of one experiment: a set of dataset variants,
/// each trained with every listed model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub ohlcv_path: PathBuf,
    pub datasets: Vec<DatasetConfig>,
    pub models: Vec<ModelChoice>,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub scaler_fit: ScalerFit,
    #[serde(default = "default_split")]
    pub split_ratio: f64,
    /// Regressor count for adjusted R²; defaults to the frame's column count.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub ewma_mode: EwmaMode,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// One dataset variant. No post sources means the price-only frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub label: String,
    #[serde(default)]
    pub post_sources: Vec<PostSource>,
    #[serde(default)]
    pub sentiment: Option<SentimentMode>,
    /// Drop general posts on days without an executive post.
    #[serde(default)]
    pub equalize_coverage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostSource {
    pub path: PathBuf,
    #[serde(default)]
    pub category: CategoryMode,
    #[serde(default)]
    pub handles_path: Option<PathBuf>,
    /// Under-sample general posts to this many.
    #[serde(default)]
    pub sample_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryMode {
    #[default]
    All,
    Executive,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SentimentMode {
    Lexicon {
        #[serde(default)]
        lexicon_path: Option<PathBuf>,
    },
    External {
        scores_path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerFit {
    #[default]
    Train,
    All,
}

/// A preset name, or a preset with replacement recurrent widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelChoice {
    Preset(String),
    Custom(CustomModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub preset: String,
    #[serde(default)]
    pub units: Option<Vec<usize>>,
    #[serde(default)]
    pub label: Option<String>,
}

impl ModelChoice {
    pub fn label(&self) -> String {
        match self {
            ModelChoice::Preset(p) => p.to_ascii_lowercase(),
            ModelChoice::Custom(c) => c.label.clone().unwrap_or_else(|| c.preset.to_ascii_lowercase()),
        }
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        match self {
            ModelChoice::Preset(p) => build_preset(p),
            ModelChoice::Custom(c) => {
                let spec = build_preset(&c.preset)?;
                match &c.units {
                    Some(u) => spec.with_recurrent_units(u),
                    None => Ok(spec),
                }
            }
        }
    }
}

/// Training settings that may be overridden per experiment. The seed comes
/// from the experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub validation_split: Option<f64>,
    pub patience: Option<usize>,
}

impl TrainOverrides {
    pub fn resolve(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            validation_split: self.validation_split.unwrap_or(d.validation_split),
            patience: self.patience.unwrap_or(d.patience),
            seed,
            ..d
        }
    }
}

fn check_label(kind: &str, label: &str) -> Result<()> {
    let ok = !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || "+-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(validation(format!("{kind} label {label:?} must be non-empty and use only [A-Za-z0-9+-_.]")))
    }
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the config file bytes.
    pub fn file_digest(path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.ohlcv_path);
        fix(&mut self.output_dir);
        for d in &mut self.datasets {
            for s in &mut d.post_sources {
                fix(&mut s.path);
                if let Some(h) = &mut s.handles_path {
                    fix(h);
                }
            }
            match &mut d.sentiment {
                Some(SentimentMode::Lexicon { lexicon_path: Some(p) }) => fix(p),
                Some(SentimentMode::External { scores_path }) => fix(scores_path),
                _ => {}
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(validation("experiment name is empty"));
        }
        if self.datasets.is_empty() {
            return Err(validation("no datasets configured"));
        }
        if self.models.is_empty() {
            return Err(validation("no models configured"));
        }
        if self.window == 0 {
            return Err(validation("window must be positive"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(validation(format!("split_ratio {} must lie in (0, 1)", self.split_ratio)));
        }
        self.train.resolve(self.seed).validate()?;

        let mut seen = HashSet::new();
        for d in &self.datasets {
            check_label("dataset", &d.label)?;
            if !seen.insert(d.label.as_str()) {
                return Err(validation(format!("duplicate dataset label {:?}", d.label)));
            }
            match (d.post_sources.is_empty(), &d.sentiment) {
                (true, Some(_)) => {
                    return Err(validation(format!("dataset {:?} has a sentiment mode but no post sources", d.label)))
                }
                (false, None) => {
                    return Err(validation(format!("dataset {:?} has post sources but no sentiment mode", d.label)))
                }
                _ => {}
            }
            for s in &d.post_sources {
                let needs_handles = s.category != CategoryMode::All || d.equalize_coverage || s.sample_size.is_some();
                if needs_handles && s.handles_path.is_none() {
                    return Err(validation(format!(
                        "dataset {:?}: source {} needs handles_path",
                        d.label,
                        s.path.display()
                    )));
                }
                if s.sample_size == Some(0) {
                    return Err(validation(format!("dataset {:?}: sample_size must be positive", d.label)));
                }
            }
        }
        let mut seen = HashSet::new();
        for m in &self.models {
            let label = m.label();
            check_label("model", &label)?;
            m.spec()?;
            if !seen.insert(label.clone()) {
                return Err(validation(format!("duplicate model label {label:?}")));
            }
        }
        Ok(())
    }

    /// Every input file the experiment reads, in config order.
    pub fn input_paths(&self) -> Vec<&Path> {
        let mut out = vec![self.ohlcv_path.as_path()];
        for d in &self.datasets {
            for s in &d.post_sources {
                out.push(&s.path);
                if let Some(h) = &s.handles_path {
                    out.push(h);
                }
            }
            match &d.sentiment {
                Some(SentimentMode::Lexicon { lexicon_path: Some(p) }) => out.push(p),
                Some(SentimentMode::External { scores_path }) => out.push(scores_path),
                _ => {}
            }
        }
        out
    }

    /// Fails with [`Error::MissingFile`] on the first absent input.
    pub fn check_inputs(&self) -> Result<()> {
        for p in self.input_paths() {
            if !p.is_file() {
                return Err(Error::MissingFile(p.to_path_buf()));
            }
        }
        Ok(())
    }

    pub fn p_for(&self, width: usize) -> usize {
        self.p.unwrap_or(width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "ohlcv_path": "prices.csv",
        "datasets": [
            {"label": "Y"},
            {"label": "Y+T", "post_sources": [{"path": "posts.jsonl"}],
             "sentiment": {"mode": "external", "scores_path": "s.jsonl"}}
        ],
        "models": ["gru", {"preset": "lstm", "units": [4, 4, 2], "label": "lstm-small"}]
    }"#;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn defaults_and_resolution() {
        let mut cfg = parse(MINIMAL).unwrap();
        assert_eq!((cfg.seed, cfg.window, cfg.split_ratio), (42, 30, 0.8));
        assert_eq!(cfg.scaler_fit, ScalerFit::Train);
        cfg.resolve_paths(Path::new("/data"));
        assert_eq!(cfg.ohlcv_path, Path::new("/data/prices.csv"));
        assert_eq!(cfg.input_paths().len(), 3);
        assert_eq!(cfg.models[1].label(), "lstm-small");
        assert_eq!(cfg.models[1].spec().unwrap().layers[0].units, 4);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"name\": \"t\",", "\"name\": \"t\", \"colour\": 1,");
        assert!(parse(&text).is_err());
        let text = MINIMAL.replace("{\"label\": \"Y\"}", "{\"label\": \"Y\", \"extra\": true}");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn inconsistent_configs_rejected() {
        assert!(parse(&MINIMAL.replace("\"Y+T\"", "\"Y\"")).is_err());
        assert!(parse(&MINIMAL.replace("\"gru\"", "\"transformer\"")).is_err());
        assert!(parse(&MINIMAL.replace("{\"label\": \"Y\"}", "{\"label\": \"Y\", \"sentiment\": {\"mode\": \"lexicon\"}}")).is_err());
        assert!(parse(&MINIMAL.replace("\"path\": \"posts.jsonl\"", "\"path\": \"posts.jsonl\", \"category\": \"executive\"")).is_err());
        assert!(parse(&MINIMAL.replace("\"label\": \"Y\"", "\"label\": \"a/b\"")).is_err());
    }

    #[test]
    fn overrides_keep_experiment_seed() {
        let o = TrainOverrides { max_epochs: Some(3), ..TrainOverrides::default() };
        let t = o.resolve(9);
        assert_eq!((t.max_epochs, t.seed, t.batch_size), (3, 9, TrainConfig::default().batch_size));
    }
}
