use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{contract, Result};
use crate::features::DateRange;
use crate::io_util::write_atomic;
use crate::nn::TrainHistory;

/// Actual and predicted test-day prices for one dataset variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predictions: Vec<(String, Vec<f64>)>,
}

/// Writes `date,actual,<model labels...>`, one row per test day.
pub fn emit_plot_series(
    actual: &[f64],
    predictions: &[(String, Vec<f64>)],
    dates: &[NaiveDate],
    path: &Path,
) -> Result<()> {
    if actual.len() != dates.len() {
        return Err(contract(format!("{} dates but {} actual prices", dates.len(), actual.len())));
    }
    for (label, p) in predictions {
        if p.len() != dates.len() {
            return Err(contract(format!("model {label}: {} predictions for {} dates", p.len(), dates.len())));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string(), "actual".to_string()];
    header.extend(predictions.iter().map(|(l, _)| l.clone()));
    w.write_record(&header)?;
    for (i, d) in dates.iter().enumerate() {
        let mut row = vec![d.format("%Y-%m-%d").to_string(), format!("{:.6}", actual[i])];
        row.extend(predictions.iter().map(|(_, p)| format!("{:.6}", p[i])));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| contract(e.to_string()))?;
    write_atomic(path, &bytes)
}

impl PlotSeries {
    pub fn write(&self, path: &Path) -> Result<()> {
        emit_plot_series(&self.actual, &self.predictions, &self.dates, path)
    }
}

pub fn write_history(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    history.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRecord {
    pub label: String,
    pub status: VariantStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_columns: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_range: Option<DateRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_range: Option<DateRange>,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRecord {
    pub label: String,
    pub seed: u64,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl VariantRecord {
    pub fn failed(label: &str, error: &crate::Error) -> Self {
        VariantRecord {
            label: label.into(),
            status: VariantStatus::Failed,
            error: Some(error.to_string()),
            frame_rows: None,
            feature_columns: None,
            train_range: None,
            test_range: None,
            models: Vec::new(),
        }
    }
}

/// Run metadata; the only file that carries a wall-clock timestamp.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub config_sha256: String,
    pub ohlcv_range: Option<DateRange>,
    pub variants: Vec<VariantRecord>,
    pub created_unix_seconds: u64,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: u32) -> Vec<NaiveDate> {
        (1..=n).map(|d| NaiveDate::from_ymd_opt(2022, 5, d).unwrap()).collect()
    }

    #[test]
    fn shape_with_two_models() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        let preds = vec![("gru".to_string(), vec![1.0; 5]), ("lstm".to_string(), vec![2.0; 5])];
        emit_plot_series(&[3.0; 5], &preds, &dates(5), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "date,actual,gru,lstm");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn zero_models_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_series(&[1.0, 2.0], &[("m".into(), vec![0.0, 0.0])], &dates(2), &path).unwrap();
        emit_plot_series(&[1.0, 2.0], &[], &dates(2), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "date,actual\n2022-05-01,1.000000\n2022-05-02,2.000000\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        let err = emit_plot_series(&[1.0; 3], &[("m".into(), vec![0.0; 2])], &dates(3), &path).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
        assert!(emit_plot_series(&[1.0; 2], &[], &dates(3), &path).is_err());
        assert!(!path.exists());
    }
}
